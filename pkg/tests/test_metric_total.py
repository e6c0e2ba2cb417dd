import math

import numpy as np
import pytest

from torus_ricci.metric_total import SineCap, descent_check, eval_f


def test_sine_cap_shape():
    sc = SineCap(0.05)
    f, f1, f2 = sc.arrays(np.array([0.0, sc.breakpoint, 1.0]))
    assert f[0] == 0.0 and f1[0] == 1.0
    assert f[1] == pytest.approx(0.05, abs=1e-16) and f1[1] == 0.0
    assert f[2] == 0.05 and f1[2] == 0.0 and f2[2] == 0.0
    left = sc.piece_arrays(sc.breakpoint, 0)
    assert abs(float(left[1])) < 1e-15


def test_sine_cap_bounds():
    sc = SineCap(0.05)
    rho = np.linspace(0, 0.2, 2001)
    f, f1, f2 = sc.arrays(rho)
    assert np.all(np.abs(f1) <= 1) and np.all(np.abs(f2) <= 1 / 0.05 + 1e-12)


def test_f_vanishes_on_edges(total_metric, polygon5):
    for e in polygon5.edges:
        x, Y = polygon5.edge_point(e, 0.4)
        f, _ = eval_f(total_metric, e.index, x, Y)
        assert abs(f[0]) < 1e-12


def test_f1_at_equator(total_metric):
    d = total_metric.polygon.quadrangle.params.delta
    f, grad = eval_f(total_metric, 1, -d, 10.0)
    assert f[0] == 0.0
    assert grad[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert grad[1, 0] == 0.0


def test_f_peak_at_cap_radius(total_metric):
    fp = total_metric.fibers[1]  # Gamma_2, scale mu
    e = fp.chart.edge
    s = 0.5 * (e.s_lo + e.s_hi)
    for r in (fp.breakpoint * (1 - 1e-9), fp.breakpoint * (1 + 1e-9)):
        x, Y, *_ = fp.chart.normal_flow(np.array([s]), np.array([r]))
        f, grad = eval_f(total_metric, 2, x, Y)
        assert f[0] == pytest.approx(fp.scale, abs=1e-12)
        assert np.hypot(*grad[:, 0]) < 1e-7


def test_metric_deep_interior(total_metric, polygon5):
    p = polygon5.quadrangle.params
    x, Y = 2.0, 0.5 * polygon5.height
    coeff = total_metric.metric_at(x, Y)[:, 0]
    G = float(polygon5.profile.arrays(x)[0])
    expected = [1.0, G**2, 16 * p.epsilon**2] + [p.mu**2] * 4
    assert np.allclose(coeff, expected, rtol=0, atol=1e-15)


def test_metric_vertices(total_metric, polygon5):
    for v in polygon5.vertices:
        c = total_metric.metric_at(v.x, v.y)[2:, 0]
        zero = set(np.nonzero(np.abs(c) < 1e-10)[0] + 1)
        assert zero == {v.index, v.index % 5 + 1}


def test_descent_check(total_metric):
    rep = descent_check(total_metric)
    assert rep.ok, rep.problems
    assert len(rep.edge_ok) == 5 and len(rep.vertex_ok) == 5


def test_metric_fermi_matches_base(total_metric, polygon5):
    fp = total_metric.fibers[2]
    e = fp.chart.edge
    s = np.linspace(e.s_lo, e.s_hi, 9)[1:-1]
    x, Y, *_ = fp.chart.normal_flow(s, np.full_like(s, 0.5 * fp.chart.tube))
    mb = total_metric.metric_at(x, Y)
    mf = total_metric.metric_fermi(x, Y, 3)
    assert np.array_equal(mb[2:], mf[2:])
    assert np.all(mf[0] == 1.0)
