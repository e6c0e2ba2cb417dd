"""Fiber warping functions and the metric dx^2 + G^2 dy^2 + sum f_i^2 dphi_i^2 on D x T^m."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fermi import FermiChart, fermi_chart
from .quadrangle import PolygonD


@dataclass(frozen=True)
class SineCap:
    """F(rho) = scale sin(rho / scale) up to rho = (pi/2) scale, then the constant scale."""

    scale: float

    @property
    def breakpoint(self) -> float:
        return 0.5 * math.pi * self.scale

    @property
    def breakpoints(self) -> tuple[float]:
        return (self.breakpoint,)

    def piece_of(self, rho, side="right"):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho < self.breakpoint if side == "right" else rho <= self.breakpoint, 0, 1)

    def piece_arrays(self, rho, piece: int):
        """Sine formula (continued to rho < 0, odd) or the plateau."""
        rho = np.asarray(rho, dtype=float)
        if piece == 0:
            a = rho / self.scale
            return self.scale * np.sin(a), np.cos(a), -np.sin(a) / self.scale
        return np.full_like(rho, self.scale), np.zeros_like(rho), np.zeros_like(rho)

    def arrays(self, rho):
        rho = np.asarray(rho, dtype=float)
        a = np.minimum(rho, self.breakpoint) / self.scale
        cap = rho < self.breakpoint
        f = self.scale * np.sin(a)
        f1 = np.where(cap, np.cos(a), 0.0)
        f2 = np.where(cap, -np.sin(a) / self.scale, 0.0)
        return f, f1, f2


@dataclass(frozen=True)
class FiberProfile:
    """Warping function of the circle phi_index: f = shape(rho_index)."""

    index: int
    scale: float
    chart: FermiChart
    shape: object

    @property
    def breakpoint(self) -> float:
        return 0.5 * math.pi * self.scale


@dataclass
class FiberField:
    """Fiber data at N base points, arrays of shape (m, N).

    Gradients and Hessians are in the orthonormal base frame
    e_-1 = d/dx, e_0 = d/dy / G. ``kappa`` is h_rho / h of the chart, ``beta``
    the angle of grad rho, ``active`` marks points where f is not constant.
    """

    f: np.ndarray
    df: np.ndarray  # F'(rho)
    ddf: np.ndarray  # F''(rho)
    rho: np.ndarray
    kappa: np.ndarray
    beta: np.ndarray
    grad: np.ndarray  # (m, 2, N)
    hess: np.ndarray  # (m, 3, N): (-1,-1), (-1,0), (0,0)
    active: np.ndarray
    foot_x: np.ndarray


@dataclass
class TotalMetric:
    polygon: PolygonD
    profile: object
    fibers: list[FiberProfile] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.fibers)

    def fiber_field(self, x, Y) -> FiberField:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        m, n = self.m, x.size
        out = FiberField(
            f=np.empty((m, n)), df=np.zeros((m, n)), ddf=np.zeros((m, n)),
            rho=np.full((m, n), np.inf), kappa=np.zeros((m, n)), beta=np.zeros((m, n)),
            grad=np.zeros((m, 2, n)), hess=np.zeros((m, 3, n)),
            active=np.zeros((m, n), dtype=bool), foot_x=np.full((m, n), np.nan),
        )
        for k, fp in enumerate(self.fibers):
            fc = fp.chart.locate(x, Y)
            rho = np.where(fc.in_tube, fc.rho, np.inf)
            f, f1, f2 = fp.shape.arrays(np.where(fc.in_tube, rho, fp.breakpoint * 4))
            f = np.where(fc.in_tube, f, fp.shape.arrays(fp.breakpoint * 4)[0])
            f1 = np.where(fc.in_tube, f1, 0.0)
            f2 = np.where(fc.in_tube, f2, 0.0)
            kappa = np.where(fc.in_tube, fc.h_rho / fc.h, 0.0)
            beta = np.where(fc.in_tube, fc.beta, 0.0)
            c, s = np.cos(beta), np.sin(beta)
            out.f[k], out.df[k], out.ddf[k] = f, f1, f2
            out.rho[k], out.kappa[k], out.beta[k] = rho, kappa, beta
            out.foot_x[k] = fc.foot_x
            out.grad[k] = np.stack([f1 * c, f1 * s])
            # Hess f = F'' t t + F' kappa e e with t = (c, s), e = (s, -c)
            out.hess[k] = np.stack(
                [f2 * c * c + f1 * kappa * s * s, (f2 - f1 * kappa) * c * s, f2 * s * s + f1 * kappa * c * c]
            )
            out.active[k] = fc.in_tube & ((np.abs(f1) > 0) | (np.abs(f2) > 0))
        return out

    def metric_at(self, x, Y, phi=None):
        """Diagonal coefficients (1, G^2, f_1^2, ..., f_m^2) in base coordinates.

        ``phi`` is accepted for the full point of D x T^m and never read.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = self.profile.arrays(x)[0]
        ff = self.fiber_field(x, Y)
        return np.vstack([np.ones_like(x), g**2, ff.f**2])

    def metric_fermi(self, x, Y, k: int):
        """Coefficients (1, h_k^2, f_1^2, ..., f_m^2) in the Fermi chart of Gamma_k."""
        fc = self.fibers[k - 1].chart.locate(x, Y)
        if not np.all(fc.in_tube):
            raise ValueError(f"points outside the tube of Gamma_{k}")
        ff = self.fiber_field(x, Y)
        return np.vstack([np.ones_like(fc.h), fc.h**2, ff.f**2])


def eval_f(tm: TotalMetric, i: int, x, Y):
    """(f_i, grad f_i) at base points; the gradient is in the orthonormal frame."""
    ff = tm.fiber_field(x, Y)
    return ff.f[i - 1], ff.grad[i - 1]


def build_total_metric(
    polygon: PolygonD, profile=None, shapes: list | None = None, chart_profile=None
) -> TotalMetric:
    """Metric on D x T^m with f_1 of scale 4 eps and f_i (i >= 2) of scale mu.

    ``profile`` overrides the surface profile used for G; ``chart_profile``
    the one used to build the Fermi charts (both default to the polygon's).
    ``shapes`` replaces the per-fiber one-variable profiles.
    """
    p = polygon.quadrangle.params
    prof = profile if profile is not None else polygon.profile
    cprof = chart_profile if chart_profile is not None else prof
    fibers = []
    for i in range(1, polygon.m + 1):
        scale = 4 * p.epsilon if i == 1 else p.mu
        shape = shapes[i - 1] if shapes is not None else SineCap(scale)
        chart = fermi_chart(polygon, i, tube=0.5 * math.pi * scale, profile=cprof)
        fibers.append(FiberProfile(index=i, scale=scale, chart=chart, shape=shape))
    return TotalMetric(polygon=polygon, profile=prof, fibers=fibers)


@dataclass
class DescentReport:
    edge_ok: list[bool]
    vertex_ok: list[bool]
    interior_ok: bool
    phi_invariant: bool
    problems: list[str]

    @property
    def ok(self) -> bool:
        return all(self.edge_ok) and all(self.vertex_ok) and self.interior_ok and self.phi_invariant


def descent_check(tm: TotalMetric, D: PolygonD | None = None, samples: int = 8, seed: int = 0, tol=1e-10):
    """Degenerate directions of the metric on the boundary of D.

    On an interior point of edge Gamma_i the kernel must be span(dphi_i); at
    vertex F_i it must be span(dphi_i, dphi_{i+1}); interior points must be
    nondegenerate.
    """
    D = D if D is not None else tm.polygon
    rng = np.random.default_rng(seed)
    problems, edge_ok, vertex_ok = [], [], []
    m = D.m
    for e in D.edges:
        t = rng.uniform(0.1, 0.9, samples)
        pts = np.array([D.edge_point(e, tt) for tt in t])
        coeff = tm.metric_at(pts[:, 0], pts[:, 1])
        zero = np.abs(coeff[2:]) < tol
        expected = np.zeros(m, dtype=bool)
        expected[e.index - 1] = True
        ok = bool(np.all(zero == expected[:, None]))
        edge_ok.append(ok)
        if not ok:
            problems.append(f"edge {e.index}: kernel {np.nonzero(zero.any(axis=1))[0] + 1}")
    for v in D.vertices:
        coeff = tm.metric_at(v.x, v.y)[:, 0]
        zero = np.abs(coeff[2:]) < tol
        expected = np.zeros(m, dtype=bool)
        expected[v.index - 1] = True
        expected[v.index % m] = True
        ok = bool(np.all(zero == expected))
        vertex_ok.append(ok)
        if not ok:
            problems.append(f"vertex {v.index}: kernel {np.nonzero(zero)[0] + 1}")
    # interior: jitter the edge-interior points inwards along the chart normal
    xs, ys = [], []
    for fp in tm.fibers:
        e = fp.chart.edge
        s = rng.uniform(e.s_lo + 0.3 * (e.s_hi - e.s_lo), e.s_hi - 0.3 * (e.s_hi - e.s_lo), samples)
        x, y, *_ = fp.chart.normal_flow(s, np.full(samples, 0.5 * fp.chart.tube))
        xs.append(x)
        ys.append(y)
    xs, ys = np.concatenate(xs), np.concatenate(ys)
    coeff = tm.metric_at(xs, ys)
    interior_ok = bool(np.all(np.prod(coeff, axis=0) > 0))
    if not interior_ok:
        problems.append("degenerate interior sample")
    phis = rng.uniform(0, 2 * np.pi, (m, xs.size))
    phi_invariant = bool(np.array_equal(tm.metric_at(xs, ys, phis), coeff))
    return DescentReport(edge_ok, vertex_ok, interior_ok, phi_invariant, problems)
