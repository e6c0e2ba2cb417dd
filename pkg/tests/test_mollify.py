import math

import numpy as np
import pytest

from torus_ricci.curvature import GridSpec
from torus_ricci.mollify import (
    MollifiedProfile,
    MollifierKernel,
    MollifyError,
    Piecewise,
    bounds_preserved,
    convergence_report,
    convolve,
    curvature_in_measure,
    default_beta,
    ladder_csv,
    mollify,
    smooth_pipeline,
)

LADDER = (1e-2, 1e-3, 1e-4)


@pytest.mark.parametrize("lam", [1e-1, 1e-2, 1e-4])
def test_kernel_unit_mass(lam):
    k = MollifierKernel(lam)
    assert abs(k.mass() - 1.0) < 1e-10
    assert abs(k.C - 2.25228362104) < 1e-9


def test_kernel_support():
    k = MollifierKernel(0.01)
    assert np.all(k.eta(np.array([-0.02, -0.01, 0.01, 0.5])) == 0.0)
    assert k.eta(np.array([0.0]))[0] > 0


def test_constant_and_linear_reproduced():
    xs = np.linspace(-1, 1, 21)
    f, f1, f2 = mollify(Piecewise.constant(2.5), 0.05).direct(xs)
    assert np.allclose(f, 2.5, atol=1e-12) and np.allclose(f1, 0, atol=1e-12)
    g, g1, g2 = mollify(Piecewise.linear(3.0, -1.0), 0.05).direct(xs)
    assert np.allclose(g, 3 * xs - 1, atol=1e-12)
    assert np.allclose(g1, 3.0, atol=1e-12) and np.allclose(g2, 0.0, atol=1e-10)


@pytest.mark.parametrize("lam", [0.1, 0.03, 0.001])
def test_abs_rounded_corner(lam):
    f, _, f2 = mollify(Piecewise.abs(), lam).direct(np.linspace(-2 * lam, 2 * lam, 401))
    mid = mollify(Piecewise.abs(), lam).direct(np.array([0.0]))[0][0]
    assert 0 < mid <= 0.1
    assert np.all(f2 >= -1e-10)


def test_abs_far_field_unchanged():
    xs = np.array([-1.0, -0.5, 0.5, 1.0])
    assert np.allclose(mollify(Piecewise.abs(), 0.01)(xs), np.abs(xs), atol=1e-12)


def test_bounds_preserved_for_bounded_source():
    mf = mollify(Piecewise.step(0.0, -1.0, 2.0), 0.05, a=-1, b=1)
    assert bounds_preserved(mf, -1.0, 2.0)
    assert not bounds_preserved(mf, -0.5, 2.0)


def test_derivative_commutes(shifted_profile):
    lam, h = 1e-2, 1e-5
    k = MollifierKernel(lam)
    xs = np.array([0.05, 0.11, 0.199, 0.21, 0.3, 1.0])
    mf = mollify(shifted_profile, lam, a=-0.15, b=1.5)
    num = (mf.direct(xs + h)[0] - mf.direct(xs - h)[0]) / (2 * h)

    class Deriv:
        breakpoints = shifted_profile.breakpoints

        @staticmethod
        def piece_of(x, side="right"):
            return shifted_profile.piece_of(x, side)

        @staticmethod
        def piece_arrays(x, piece):
            f, f1, f2 = shifted_profile.piece_arrays(x, piece)
            return f1, f2, np.zeros_like(f1)

    assert np.max(np.abs(num - convolve(Deriv, k, xs)[0])) < 1e-8


def test_monotone_source_stays_monotone():
    src = Piecewise.step(0.0, 0.0, 1.0)
    f = mollify(src, 0.02)(np.linspace(-0.1, 0.1, 2001))
    assert np.all(np.diff(f) >= -1e-14)


def test_step_flagged_discontinuous():
    rep = convergence_report(Piecewise.step(), LADDER, -1, 1)
    assert rep.discontinuous
    assert not convergence_report(Piecewise.abs(), LADDER, -1, 1).discontinuous


def test_smooth_source_has_empty_bad_set():
    assert convergence_report(Piecewise.linear(1.0, 0.0), LADDER, -1, 1).bad_measure == [0.0, 0.0, 0.0]


@pytest.fixture(scope="module")
def profile_ladder(shifted_profile):
    return convergence_report(shifted_profile, LADDER, shifted_profile.x_start, default_beta(shifted_profile))


def test_profile_ladder_strictly_decreasing(profile_ladder):
    assert profile_ladder.finite()
    assert profile_ladder.strictly_decreasing
    assert profile_ladder.sup_dist[-1] < 1e-5


def test_profile_ladder_bad_set(profile_ladder):
    b = profile_ladder.bad_measure
    for lam, m in zip(LADDER, b):
        assert m <= 4 * lam + 1e-6
    assert b[1] < 0.5 * b[0] and b[2] < 0.5 * b[1]


def test_profile_curvature_in_measure(shifted_profile):
    assert curvature_in_measure(shifted_profile, 1e-3) <= 4e-3


def test_profile_lambda_too_large(shifted_profile):
    with pytest.raises(MollifyError):
        MollifiedProfile(shifted_profile, shifted_profile.params.epsilon / 4)


def test_sigma_not_above_lambda():
    with pytest.raises(MollifyError):
        mollify(Piecewise.abs(), 0.1, sigma=0.1)


def test_mollified_profile_tracks_source(shifted_profile):
    mp = MollifiedProfile(shifted_profile, 1e-3)
    xs = np.linspace(-0.14, 1.0, 500)
    f, _, f2 = mp.arrays(xs)
    g, _, g2 = mp.function.direct(xs)
    assert np.max(np.abs(f - g)) < 1e-9
    assert np.max(np.abs(f2 - g2)) < 1e-5
    assert np.max(np.abs(f - shifted_profile.arrays(xs)[0])) < 1e-4


@pytest.fixture(scope="module")
def smooth3(gb_shifted, kernel53, defaults):
    return smooth_pipeline(defaults, kernel53, 5, 1e-3, gb_shifted, grid=GridSpec(nx=10, ny=10, n_rho=3, n_psi=10))


def test_pipeline_gauss_bonnet_stable(smooth3):
    assert smooth3.gauss_bonnet.feasible
    assert smooth3.change_r < 0.01 and smooth3.change_Delta < 0.01
    assert smooth3.shape_bounds_ok


def test_pipeline_deep_interior(smooth3):
    assert smooth3.certification.deep_interior_dev < 1e-9


def test_ladder_csv_format():
    text = ladder_csv([(1e-3, 1.5e-5, 3e-3, -1.9)])
    assert text.splitlines() == ["lambda,sup_dist,bad_set_measure,min_ricci_bound", "0.001,1.5e-05,0.003,-1.9"]
