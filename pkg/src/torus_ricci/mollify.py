"""Convolution with the standard bump kernel and the smoothing pipeline.

One-variable piecewise sources expose ``breakpoints``, ``piece_of(x)`` and
``piece_arrays(x, piece) -> (f, f', f'')`` (each piece continued to all x).
The convolution is computed by Gauss-Legendre quadrature on the kernel
support, split at the source breakpoints so every sub-interval sees a single
analytic piece. Derivatives use

    (f_lam)'  = eta_lam * f'
    (f_lam)'' = eta_lam' * f'

which stay valid for sources with derivative kinks. For repeated evaluation
(ODE right-hand sides, charts) the convolution is tabulated once on a graded
grid and interpolated by quintic splines.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline

from .curvature import CertificationReport, GridSpec, certify
from .metric_total import SineCap, build_total_metric
from .profile import MetricParams, ProfileG, build_profile
from .quadrangle import GaussBonnetResult, assemble_polygon, solve_gauss_bonnet

N_GL = 96
_CHUNK = 2048
_T_GL, _W_GL = np.polynomial.legendre.leggauss(N_GL)


class MollifyError(ValueError):
    """Invalid smoothing radius or extension margin."""


def _bump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    out = np.zeros_like(t)
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class MollifierKernel:
    """eta_lam(t) = C / lam * exp(-1 / (1 - (t/lam)^2)) on |t| < lam."""

    lam: float
    C: float = field(init=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise MollifyError(f"lambda must be positive, got {self.lam}")
        mass = quad(lambda t: float(_bump(t)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
        object.__setattr__(self, "C", 1.0 / mass)

    def eta(self, t):
        return self.C / self.lam * _bump(np.asarray(t, dtype=float) / self.lam)

    def eta_prime(self, t):
        s = np.asarray(t, dtype=float) / self.lam
        inside = np.abs(s) < 1
        d = np.zeros_like(s)
        d[inside] = -2 * s[inside] / (1 - s[inside] ** 2) ** 2
        return self.C / self.lam**2 * _bump(s) * d

    def mass(self) -> float:
        """Integral of eta_lam by adaptive quadrature."""
        return quad(lambda t: float(self.eta(t)), -self.lam, self.lam, epsabs=1e-14, epsrel=1e-13)[0]


@dataclass(frozen=True)
class Piecewise:
    """Piecewise function from callables ``piece(x) -> (f, f', f'')``."""

    breakpoints: tuple
    pieces: tuple

    def piece_of(self, x, side="right"):
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.breakpoints, dtype=float)
        return np.searchsorted(b, x, side="right" if side == "right" else "left")

    def piece_arrays(self, x, piece: int):
        x = np.asarray(x, dtype=float)
        return tuple(np.broadcast_to(v, x.shape).astype(float) for v in self.pieces[piece](x))

    def arrays(self, x, side="right"):
        x = np.asarray(x, dtype=float)
        idx = self.piece_of(x, side)
        parts = [self.piece_arrays(x, k) for k in range(len(self.pieces))]
        return tuple(np.choose(idx, [p[j] for p in parts]) for j in range(3))

    @classmethod
    def constant(cls, c: float):
        return cls((), (lambda x: (c, 0.0, 0.0),))

    @classmethod
    def linear(cls, a: float, b: float):
        return cls((), (lambda x: (a * x + b, a, 0.0),))

    @classmethod
    def abs(cls, at: float = 0.0):
        return cls((at,), (lambda x: (at - x, -1.0, 0.0), lambda x: (x - at, 1.0, 0.0)))

    @classmethod
    def step(cls, at: float = 0.0, lo: float = 0.0, hi: float = 1.0):
        return cls((at,), (lambda x: (lo, 0.0, 0.0), lambda x: (hi, 0.0, 0.0)))


def convolve(source, kernel: MollifierKernel, x):
    """(f_lam, f_lam', f_lam'') at the points x by split Gauss-Legendre quadrature."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size > _CHUNK:
        parts = [_convolve(source, kernel, x[k : k + _CHUNK]) for k in range(0, x.size, _CHUNK)]
        return tuple(np.concatenate([p[j] for p in parts]) for j in range(3))
    return _convolve(source, kernel, x)


def _convolve(source, kernel, x):
    lam = kernel.lam
    bps = sorted(float(b) for b in getattr(source, "breakpoints", ()))
    cols = [x - lam] + [np.clip(b, x - lam, x + lam) for b in bps] + [x + lam]
    cuts = np.stack(cols, axis=1)
    lo, hi = cuts[:, :-1], cuts[:, 1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = mid[..., None] + half[..., None] * _T_GL
    w = half[..., None] * _W_GL
    if bps:
        piece = np.asarray(source.piece_of(mid))[..., None]
        parts = [source.piece_arrays(u, k) for k in range(len(bps) + 1)]
        f = np.choose(piece, [p[0] for p in parts])
        f1 = np.choose(piece, [p[1] for p in parts])
    else:
        f, f1, _ = source.piece_arrays(u, 0)
        f, f1 = np.broadcast_to(f, u.shape), np.broadcast_to(f1, u.shape)
    t = x[:, None, None] - u
    eta, deta = kernel.eta(t) * w, kernel.eta_prime(t) * w
    axes = (1, 2)
    return (eta * f).sum(axis=axes), (eta * f1).sum(axis=axes), (deta * f1).sum(axis=axes)


def _graded_grid(
    a: float, b: float, windows: Sequence[float], fine: float, coarse: float, lam_reach: float, ratio=1.25
):
    """Nodes on [a, b]: spacing ``fine`` within 2 lam_reach of the window centres, then growing geometrically to ``coarse``."""
    pts = [np.linspace(a, b, max(2, int(math.ceil((b - a) / coarse)) + 1))]
    for c in windows:
        if not a - coarse < c < b + coarse:
            continue
        n_core = int(round(2 * lam_reach / fine))
        core = np.linspace(-2 * lam_reach, 2 * lam_reach, 2 * n_core + 1)
        steps, h, off = [], fine, core[-1]
        while h < coarse:
            h *= ratio
            off += h
            steps.append(off)
        steps = np.array(steps)
        local = np.concatenate([-steps[::-1], core, steps])
        pts.append(c + local)
    x = np.unique(np.concatenate(pts))
    x = x[(x >= a) & (x <= b)]
    # drop coarse nodes that crowd a finer neighbour
    keep = np.concatenate([[True], np.diff(x) > fine * 0.5])
    return x[keep]


class MollifiedFunction:
    """f_lam = eta_lam * f restricted to [a, b].

    The source must be defined on [a - sigma, b + lam]; the convolution then
    only reads source values there. ``tabulate`` builds quintic splines of
    (f_lam, f_lam', f_lam'') used by :meth:`arrays` inside the table range.
    """

    def __init__(self, source, lam: float, sigma: float, a: float, b: float):
        if not lam < sigma:
            raise MollifyError(f"lambda = {lam} must be smaller than the extension margin sigma = {sigma}")
        self.source, self.lam, self.sigma = source, float(lam), float(sigma)
        self.a, self.b = float(a), float(b)
        self.kernel = MollifierKernel(self.lam)
        self._spline = None
        self._table = (math.inf, -math.inf)

    @property
    def domain(self) -> tuple[float, float]:
        return self.a - self.sigma + self.lam, self.b

    def direct(self, x):
        return convolve(self.source, self.kernel, x)

    def tabulate(self, coarse: float = 2e-3, fine: float | None = None):
        """Build the spline table on the whole domain (spacing lam/100 near breakpoints)."""
        lo, hi = self.domain
        fine = self.lam / 100 if fine is None else fine
        xs = _graded_grid(lo, hi, getattr(self.source, "breakpoints", ()), fine, max(coarse, fine), self.lam)
        vals = np.stack(self.direct(xs), axis=1)
        self._spline = make_interp_spline(xs, vals, k=5)
        self._table = (float(xs[0]), float(xs[-1]))
        self.nodes = xs
        return self

    def arrays(self, x, side=None):
        x = np.asarray(x, dtype=float)
        if self._spline is None:
            out = self.direct(x.ravel())
            return tuple(v.reshape(x.shape) for v in out)
        lo, hi = self._table
        inside = (x >= lo) & (x <= hi)
        if np.all(inside):
            v = self._spline(x)
            return v[..., 0], v[..., 1], v[..., 2]
        v = self._spline(np.clip(x, lo, hi))
        out = [v[..., j].copy() for j in range(3)]
        if np.any(~inside):
            d = self.direct(np.atleast_1d(x)[np.atleast_1d(~inside)])
            for j in range(3):
                if x.ndim == 0:
                    out[j] = np.asarray(d[j][0])
                else:
                    out[j][~inside] = d[j]
        return tuple(out)

    def __call__(self, x):
        return self.arrays(x)[0]


def mollify(f, lam: float, sigma: float | None = None, a: float = -math.inf, b: float = math.inf):
    """Mollification of the piecewise function ``f`` with radius ``lam``.

    ``sigma`` (default 4 lam) is the margin by which the caller's extension
    reaches left of ``a``.
    """
    sigma = 4 * lam if sigma is None else sigma
    return MollifiedFunction(f, lam, sigma, a, b)


def bounds_preserved(mf: MollifiedFunction, lower: float, upper: float, samples=None, slack=1e-10) -> bool:
    """Mollified values stay in [lower, upper] up to ``slack``."""
    if samples is None:
        lo, hi = mf.domain
        lo = max(lo, -1e3)
        hi = min(hi, 1e3)
        samples = np.linspace(lo, hi, 2001)
    v = mf.arrays(np.asarray(samples, dtype=float))[0]
    return bool(np.all(v >= lower - slack) and np.all(v <= upper + slack))


# ------------------------------------------------------------ convergence


def _eval_grid(a: float, b: float, breakpoints, lam: float, n: int = 4001, n_win: int = 801):
    xs = [np.linspace(a, b, n)]
    for c in breakpoints:
        if a <= c <= b:
            xs.append(np.clip(np.linspace(c - 2 * lam, c + 2 * lam, n_win), a, b))
    return np.unique(np.concatenate(xs))


def _one_sided(source, x, side):
    x = np.asarray(x, dtype=float)
    piece = np.asarray(source.piece_of(x, side))
    parts = [source.piece_arrays(x, k) for k in range(len(source.breakpoints) + 1)]
    return tuple(np.choose(piece, [p[j] for p in parts]) for j in range(3))


def _jumps(source) -> float:
    out = 0.0
    for c in getattr(source, "breakpoints", ()):
        left = float(_one_sided(source, c, "left")[0])
        right = float(_one_sided(source, c, "right")[0])
        out = max(out, abs(left - right))
    return out


@dataclass
class ConvergenceReport:
    lambdas: list[float]
    sup_dist: list[float]
    bad_measure: list[float]
    max_d1: list[float]
    max_d2: list[float]
    source_d1: float
    source_d2: float
    discontinuous: bool
    interval: tuple[float, float]

    @property
    def monotone(self) -> bool:
        """sup distances non-increasing along the ladder within 10% slack."""
        d = self.sup_dist
        return all(d[k + 1] <= 1.1 * d[k] + 1e-15 for k in range(len(d) - 1))

    @property
    def strictly_decreasing(self) -> bool:
        d = self.sup_dist
        return all(d[k + 1] < d[k] for k in range(len(d) - 1))

    @property
    def derivative_bounds_ok(self) -> bool:
        return all(v <= self.source_d1 + 1e-10 for v in self.max_d1) and all(
            v <= self.source_d2 + 1e-10 for v in self.max_d2
        )

    def finite(self) -> bool:
        vals = self.sup_dist + self.bad_measure + self.max_d1 + self.max_d2
        return all(math.isfinite(v) for v in vals)


def convergence_report(f, lambdas: Sequence[float], a: float, b: float, sigma_factor: float = 4.0):
    """sup |f_lam - f| on [a, b] and the derivative maxima along the ladder.

    Bad-set measures are filled in for sources with a curvature (profiles);
    they stay 0 otherwise.
    """
    sup, bad, d1, d2 = [], [], [], []
    src_grid = _eval_grid(a, b, getattr(f, "breakpoints", ()), min(lambdas))
    _, s1, s2 = _one_sided(f, src_grid, "right")
    for lam in lambdas:
        mf = mollify(f, lam, sigma_factor * lam, a, b)
        xs = _eval_grid(a, b, getattr(f, "breakpoints", ()), lam)
        v, v1, v2 = mf.direct(xs)
        ref = np.maximum(
            np.abs(v - _one_sided(f, xs, "right")[0]), np.abs(v - _one_sided(f, xs, "left")[0])
        )
        sup.append(float(ref.max()))
        d1.append(float(np.abs(v1).max()))
        d2.append(float(np.abs(v2).max()))
        bad.append(curvature_in_measure(f, lam, a, b) if hasattr(f, "curvature_arrays") else 0.0)
    return ConvergenceReport(
        lambdas=[float(x) for x in lambdas], sup_dist=sup, bad_measure=bad, max_d1=d1, max_d2=d2,
        source_d1=float(np.abs(s1).max()), source_d2=float(np.abs(s2).max()),
        discontinuous=_jumps(f) > 1e-12, interval=(a, b),
    )


def curvature_in_measure(profile, lam: float, a: float | None = None, b: float | None = None,
                         threshold: float = 0.1, sigma: float | None = None) -> float:
    """Measure of {x in [a, b] : |K_lam(x) - K(x)| > threshold}.

    Estimated on a grid of spacing lam/200 within 2 lam of each breakpoint
    and 1e-3 elsewhere; each grid point carries the length of its cell.
    """
    a = profile.x_start if a is None else a
    b = default_beta(profile) if b is None else b
    mf = mollify(profile, lam, sigma, a, b)
    pieces = [np.linspace(a, b, int(math.ceil((b - a) / 1e-3)) + 1)]
    for c in profile.breakpoints:
        if a < c < b:
            pieces.append(np.linspace(max(a, c - 2 * lam), min(b, c + 2 * lam), 801))
    xs = np.unique(np.concatenate(pieces))
    g, _, g2 = mf.direct(xs)
    k_lam = -g2 / g
    k = profile.curvature_arrays(xs)
    badpt = np.abs(k_lam - k) > threshold
    # cell lengths from midpoints
    mids = np.concatenate([[xs[0]], 0.5 * (xs[1:] + xs[:-1]), [xs[-1]]])
    return float(np.sum(np.diff(mids)[badpt]))


def default_beta(profile) -> float:
    """Right end 2 eps + (x_end - 2 eps)/2 of the convergence compact."""
    e2 = 2 * profile.params.epsilon
    return e2 + 0.5 * (profile.x_end - e2)


# ------------------------------------------------------------ smoothed profile


class MollifiedProfile:
    """G_lam with the profile interface used by geodesics, charts and certification.

    The source is the piecewise G evaluated through its cap formula left of
    -delta (the even extension about the equator). ``piece_of`` still reports
    the source piece so region labels keep their meaning; ``piece_arrays``
    ignores the piece.
    """

    breakpoints: tuple = ()

    def __init__(self, source: ProfileG, lam: float, sigma: float | None = None, coarse: float = 2e-3):
        p = source.params
        if not lam < p.epsilon / 4:
            raise MollifyError(f"lambda = {lam} must be below eps/4 = {p.epsilon / 4}")
        self.source, self.lam = source, float(lam)
        self.sigma = 4 * lam if sigma is None else float(sigma)
        self.params = p
        self.function = mollify(source, lam, self.sigma, -p.delta, source.x_end - lam).tabulate(coarse)

    @property
    def quad_points(self) -> tuple:
        return tuple(self.source.breakpoints)

    @property
    def x_start(self) -> float:
        return -self.params.delta

    @property
    def x_end(self) -> float:
        return self.source.x_end - self.lam

    def piece_of(self, x, side="right"):
        return self.source.piece_of(x, side)

    def piece_arrays(self, x, piece: int = 0):
        return self.function.arrays(x)

    def arrays(self, x, side="right"):
        return self.function.arrays(x)

    def curvature_arrays(self, x, side="right"):
        g, _, g2 = self.function.arrays(x)
        return -g2 / g


class MollifiedShape:
    """Mollified one-variable fiber profile with the ``arrays`` interface of SineCap."""

    def __init__(self, shape: SineCap, lam: float, sigma: float | None = None):
        self.shape, self.lam = shape, float(lam)
        self.scale = shape.scale
        sigma = 4 * lam if sigma is None else sigma
        self.function = mollify(shape, lam, sigma, 0.0, 8 * shape.breakpoint).tabulate(
            coarse=min(2e-3, shape.scale / 50)
        )

    @property
    def breakpoint(self) -> float:
        return self.shape.breakpoint

    def arrays(self, rho):
        rho = np.asarray(rho, dtype=float)
        f, f1, f2 = self.function.arrays(rho)
        # beyond the kernel reach of the plateau the convolution is exactly constant
        flat = rho >= self.shape.breakpoint + self.lam
        return (np.where(flat, self.scale, f), np.where(flat, 0.0, f1), np.where(flat, 0.0, f2))


# ------------------------------------------------------------ pipeline


@dataclass
class SmoothResult:
    lam: float
    passed: bool
    gauss_bonnet: GaussBonnetResult
    change_r: float = float("nan")
    change_Delta: float = float("nan")
    sup_dist: float = float("nan")
    bad_measure: float = float("nan")
    certification: CertificationReport | None = None
    shape_bounds_ok: bool = False
    fermi_source: str = "mollified"
    note: str = ""

    @property
    def min_bound(self) -> float:
        c = self.certification
        return min(c.min_ric_X, c.min_ric_U) if c is not None else float("nan")

    def to_text(self) -> str:
        lines = [
            f"mollified lambda={self.lam:g}: {'PASS' if self.passed else 'FAIL'} (charts: {self.fermi_source})",
            f"  sup|G_lam - G|={self.sup_dist:.6g} bad_set_measure={self.bad_measure:.6g}",
            f"  gauss_bonnet feasible={self.gauss_bonnet.feasible} "
            f"rel_change r={self.change_r:.3g} Delta={self.change_Delta:.3g}",
            f"  fiber derivative bounds preserved={self.shape_bounds_ok}",
        ]
        if self.note:
            lines.append(f"  note: {self.note}")
        if self.certification is not None:
            lines += ["  " + s for s in self.certification.to_text().splitlines()]
        return "\n".join(lines)


def _shape_bounds(shape: MollifiedShape) -> bool:
    rho = np.linspace(0.0, 2 * shape.breakpoint, 4001)
    f, f1, f2 = shape.function.direct(rho)
    return bool(
        np.all(np.abs(f1) <= 1 + 1e-10) and np.all(np.abs(f2) <= 1 / shape.scale + 1e-10)
        and np.all(f >= -1e-12) and np.all(f <= shape.scale + 1e-10)
    )


def smooth_pipeline(
    params: MetricParams,
    kernel_basis,
    m: int,
    lam: float,
    piecewise: GaussBonnetResult,
    sigma: float | None = None,
    beta: float | None = None,
    grid: GridSpec = GridSpec(),
    fermi_source: str = "mollified",
) -> SmoothResult:
    """Steps 1-5 of the smoothing at one radius ``lam``.

    ``piecewise`` is the solved Gauss-Bonnet problem of the piecewise profile;
    its k2 is kept and (r, Delta) are re-solved for G_lam. ``fermi_source``
    picks the base metric whose distance defines rho for the fiber profiles:
    "mollified" (charts of G_lam) or "piecewise" (charts of G).
    """
    if fermi_source not in ("mollified", "piecewise"):
        raise MollifyError(f"unknown fermi_source {fermi_source!r}")
    if not piecewise.feasible:
        raise MollifyError("the piecewise Gauss-Bonnet problem has no solution to smooth")
    if not lam < params.epsilon / 4:
        raise MollifyError(f"lambda = {lam} must be below eps/4 = {params.epsilon / 4}")
    src = piecewise.profile
    k2 = src.params.k2
    beta = default_beta(src) if beta is None else beta

    def factory(p):
        return MollifiedProfile(build_profile(p), lam, sigma)

    gb = solve_gauss_bonnet(replace(params, branch=src.params.branch), k2_ladder=(k2,), profile_factory=factory)
    res = SmoothResult(lam=lam, passed=False, gauss_bonnet=gb, fermi_source=fermi_source)
    mprof = factory(src.params) if gb.profile is None else gb.profile
    xs = _eval_grid(src.x_start, beta, src.breakpoints, lam)
    g_l = mprof.function.direct(xs)[0]
    res.sup_dist = float(np.max(np.abs(g_l - src.arrays(xs)[0])))
    res.bad_measure = curvature_in_measure(src, lam, src.x_start, beta, sigma=sigma)
    if not gb.feasible:
        res.note = "Gauss-Bonnet target not reached for the smoothed profile"
        return res
    q0, q1 = piecewise.quadrangle, gb.quadrangle
    res.change_r = abs(q1.r - q0.r) / abs(q0.r)
    res.change_Delta = abs(q1.Delta - q0.Delta) / abs(q0.Delta)
    poly = assemble_polygon(q1, m)
    shapes = [MollifiedShape(SineCap(4 * params.epsilon if i == 1 else params.mu), lam, sigma) for i in range(1, m + 1)]
    res.shape_bounds_ok = all(_shape_bounds(s) for s in shapes)
    chart_prof = mprof if fermi_source == "mollified" else src
    tm = build_total_metric(poly, profile=mprof, shapes=shapes, chart_profile=chart_prof)
    res.certification = certify(tm, kernel_basis, grid)
    res.passed = res.certification.passed
    return res


def ladder_csv(rows: Sequence[tuple[float, float, float, float]]) -> str:
    """CSV with columns lambda, sup_dist, bad_set_measure, min_ricci_bound."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "sup_dist", "bad_set_measure", "min_ricci_bound"])
    for lam, d, b, r in rows:
        w.writerow([f"{lam:.6g}", f"{d:.12g}", f"{b:.12g}", f"{r:.12g}"])
    return buf.getvalue()
