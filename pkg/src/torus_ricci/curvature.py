"""Curvature of the metric on D x T^m and the Ricci lower bounds of the quotient.

Frame indices: -1 -> d/dx (or d/drho), 0 -> d/dy / G (or d/dpsi / h), i -> dphi_i / f_i.
In tensor arrays the frame index ``a`` is stored at position a + 1, so the
fibers occupy slots 2..m+1.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metric_total import TotalMetric

N_DIR = 16


class CurvatureError(ValueError):
    """Degenerate coframe or invalid evaluation point."""


class OracleError(ValueError):
    """Finite-difference stencil would straddle a breakpoint."""


@dataclass
class CurvatureComponents:
    """Nonzero orthonormal components at N points.

    ``R_m10m10`` has shape (N,); ``R_m1im1i``, ``R_0i0i`` and ``R_m1i0i`` have
    shape (m, N); ``R_ijij`` has shape (m, m, N) with a zero diagonal.
    """

    R_m10m10: np.ndarray
    R_m1im1i: np.ndarray
    R_0i0i: np.ndarray
    R_ijij: np.ndarray
    R_m1i0i: np.ndarray

    def tensor(self) -> np.ndarray:
        """Full (d, d, d, d, N) tensor T[a,b,c,d] = <R(e_c, e_d) e_b, e_a>."""
        m, n = self.R_m1im1i.shape
        d = m + 2
        T = np.zeros((d, d, d, d, n))

        def put(a, b, c, e, val):
            # R_abce with all pair symmetries
            for (p, q, r, s), sgn in (
                ((a, b, c, e), 1), ((b, a, c, e), -1), ((a, b, e, c), -1), ((b, a, e, c), 1),
                ((c, e, a, b), 1), ((e, c, a, b), -1), ((c, e, b, a), -1), ((e, c, b, a), 1),
            ):
                T[p, q, r, s] = sgn * val

        put(0, 1, 0, 1, self.R_m10m10)
        for i in range(m):
            put(0, i + 2, 0, i + 2, self.R_m1im1i[i])
            put(1, i + 2, 1, i + 2, self.R_0i0i[i])
            put(0, i + 2, 1, i + 2, self.R_m1i0i[i])
            for j in range(m):
                if i != j:
                    put(i + 2, j + 2, i + 2, j + 2, self.R_ijij[i, j])
        return T


def _coordinate_partials(G, G1, ff):
    """(f_x, f_y, f_xx, f_xy, f_yy) from the orthonormal gradient and Hessian."""
    fx = ff.grad[:, 0]
    fy = G * ff.grad[:, 1]
    fxx = ff.hess[:, 0]
    fxy = G * ff.hess[:, 1] + (G1 / G) * fy
    fyy = G**2 * ff.hess[:, 2] - G * G1 * fx
    return fx, fy, fxx, fxy, fyy


def components_base(tm: TotalMetric, x, Y, ff=None) -> CurvatureComponents:
    """Components in the coframe dx, G dy, f_i dphi_i from coordinate derivatives."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    if np.any(ff.f <= 0):
        raise CurvatureError("some f_i vanishes: the coframe degenerates on the boundary")
    G, G1, G2 = tm.profile.arrays(x)
    f = ff.f
    fx, fy, fxx, fxy, fyy = _coordinate_partials(G, G1, ff)
    R_m1 = -fxx / f
    R_0 = -fyy / (f * G**2) - (fx / f) * (G1 / G)
    R_mix = -fxy / (f * G) + (fy / f) * (G1 / G**2)
    ax, ay = fx / f, fy / f
    R_ij = -(ax[:, None] * ax[None, :] + ay[:, None] * ay[None, :] / G**2)
    idx = np.arange(tm.m)
    R_ij[idx, idx] = 0.0
    return CurvatureComponents(-G2 / G, R_m1, R_0, R_ij, R_mix)


def components_fermi(tm: TotalMetric, k: int, x, Y, ff=None) -> tuple[CurvatureComponents, np.ndarray]:
    """Components in the coframe d rho_k, h_k d psi_k, f_i dphi_i.

    Only fibers that are functions of rho_k (f_k itself, or constant ones) are
    covered by these formulas; the returned ``valid`` mask (m, N) marks them
    and other entries are NaN.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    chart = tm.fibers[k - 1].chart
    fc = chart.locate(x, Y)
    if not np.all(fc.in_tube):
        raise CurvatureError(f"points outside the tube of Gamma_{k}")
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    if np.any(ff.f <= 0):
        raise CurvatureError("some f_i vanishes: the coframe degenerates on the boundary")
    K = -tm.profile.arrays(x)[2] / tm.profile.arrays(x)[0]  # = -h''/h along the normal geodesic
    kap = fc.h_rho / fc.h
    valid = ~ff.active
    valid[k - 1] = True
    f1, f2, f = ff.df.copy(), ff.ddf.copy(), ff.f
    f1[~valid], f2[~valid] = np.nan, np.nan
    R_m1 = -f2 / f
    R_0 = -(f1 / f) * kap
    q = f1 / f
    R_ij = -(q[:, None] * q[None, :])
    idx = np.arange(tm.m)
    R_ij[idx, idx] = 0.0
    R_mix = np.where(valid, 0.0, np.nan)
    return CurvatureComponents(K, R_m1, R_0, R_ij, R_mix), valid


def rotate_to_fermi(tm: TotalMetric, k: int, comps: CurvatureComponents, x, Y) -> CurvatureComponents:
    """Base-frame components re-expressed in the Fermi frame of Gamma_k."""
    fc = tm.fibers[k - 1].chart.locate(x, Y)
    sig = tm.fibers[k - 1].chart.sigma
    b = fc.beta
    t = np.stack([np.cos(b), np.sin(b)])
    e = np.stack([np.cos(b - sig * math.pi / 2), np.sin(b - sig * math.pi / 2)])
    # mixed-base block as a symmetric 2x2 form per fiber
    A, B, C = comps.R_m1im1i, comps.R_m1i0i, comps.R_0i0i
    tt = A * t[0] ** 2 + 2 * B * t[0] * t[1] + C * t[1] ** 2
    ee = A * e[0] ** 2 + 2 * B * e[0] * e[1] + C * e[1] ** 2
    te = A * t[0] * e[0] + B * (t[0] * e[1] + t[1] * e[0]) + C * t[1] * e[1]
    return CurvatureComponents(comps.R_m10m10, tt, ee, comps.R_ijij, te)


# ------------------------------------------------------------ horizontal frame


@dataclass
class HorizontalFrame:
    """Coefficients c[i, l, N] with U_i = sum_l c_l^i dphi_l / f_l."""

    c: np.ndarray
    c_min: float

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """w_l = sum_i (c_l^i)^2, shape (m, N)."""
        return np.sum(self.c**2, axis=0)


def horizontal_frame(kernel_basis: Sequence[Sequence[int]], f: np.ndarray) -> HorizontalFrame:
    """Orthonormal U_1..U_n orthogonal to the subtorus directions.

    U = sum c_l dphi_l / f_l is orthogonal to V = sum v_l dphi_l exactly when
    c . (v f) = 0, and orthonormal exactly when the c are Euclidean
    orthonormal. The complement is built by Gram-Schmidt over e_1..e_m in
    order, which makes the frame deterministic.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    m, npts = f.shape
    if np.any(f <= 0):
        raise CurvatureError("horizontal frame needs all f_l > 0")
    kb = np.array(kernel_basis, dtype=float).reshape(-1, m)
    n = m - kb.shape[0]
    c = np.empty((n, m, npts))
    for p in range(npts):
        basis = []
        for v in kb * f[:, p]:
            for u in basis:
                v = v - (v @ u) * u
            basis.append(v / np.linalg.norm(v))
        vert = len(basis)
        for l in range(m):
            v = np.zeros(m)
            v[l] = 1.0
            for _ in range(2):
                for u in basis:
                    v = v - (v @ u) * u
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                basis.append(v / nv)
            if len(basis) == vert + n:
                break
        if len(basis) != vert + n:
            raise CurvatureError("kernel directions are dependent")
        c[:, :, p] = np.array(basis[vert:])
    nz = np.abs(c)[np.abs(c) > 1e-12]
    c_min = float(nz.min()) if nz.size else 0.0
    return HorizontalFrame(c=c, c_min=c_min)


# ------------------------------------------------------------ Ricci bounds


def _fiber_quadratic(ff):
    """Per-fiber coefficients (a, b) with Q_l(theta) = a cos^2 + b sin^2 in its own chart frame."""
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(ff.active, -ff.ddf / ff.f, 0.0)
        b = np.where(ff.active, -ff.df * ff.kappa / ff.f, 0.0)
    return a, b


def direction_angles(n_dir: int = N_DIR) -> np.ndarray:
    return 2 * np.pi * np.arange(n_dir) / n_dir


@dataclass
class RicciSample:
    x: float
    y: float
    directions: dict  # fiber index -> (cos, sin)
    ric_X: float
    ric_U: list
    region: str

    @property
    def params(self) -> tuple[float, ...]:
        """(x1, x2, y1, y2, z1, z2) as used for edges i, i+1 and f_1."""
        d = dict(self.directions)
        z = d.pop(1, (1.0, 0.0))
        rest = [d[k] for k in sorted(d)] + [(1.0, 0.0)] * 2
        return (*rest[0], *rest[1], *z)


def ricci_X_bound(tm: TotalMetric, frame: HorizontalFrame, x, Y, angles: dict, ff=None):
    """K + sum_i R(X, U_i, X, U_i) with X written separately for each active fiber.

    ``angles`` maps a fiber index (1-based) to the angle of X in that fiber's
    chart frame (d/drho, d/dpsi / h); fibers absent from the map use angle 0.
    Cross terms R(X, e_l, X, e_s), l != s, vanish, so the sum is
    sum_l w_l Q_l(X_l) with w_l = sum_i (c_l^i)^2.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    G, _, G2 = tm.profile.arrays(x)
    a, b = _fiber_quadratic(ff)
    w = frame.weights
    total = -G2 / G
    for l in range(tm.m):
        th = angles.get(l + 1, 0.0)
        total = total + w[l] * (a[l] * np.cos(th) ** 2 + b[l] * np.sin(th) ** 2)
    return total


def ricci_X_min(tm, frame, x, Y, n_dir: int = N_DIR, ff=None):
    """Minimum of :func:`ricci_X_bound` over the direction grid, and the argmin angles.

    The bound is separable in the per-fiber directions, so the minimum over
    the n_dir^k grid is the sum of per-fiber minima.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    G, _, G2 = tm.profile.arrays(x)
    a, b = _fiber_quadratic(ff)
    th = direction_angles(n_dir)
    c2, s2 = np.cos(th) ** 2, np.sin(th) ** 2
    q = frame.weights[:, None, :] * (a[:, None, :] * c2[None, :, None] + b[:, None, :] * s2[None, :, None])
    k = np.argmin(q, axis=1)  # (m, N)
    total = -G2 / G + np.take_along_axis(q, k[:, None, :], axis=1)[:, 0, :].sum(axis=0)
    return total, th[k]


def ricci_X_exact_min(tm, frame, x, Y, ff=None):
    """K + smallest eigenvalue of sum_l w_l (-Hess f_l / f_l) for a single unit X."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    G, _, G2 = tm.profile.arrays(x)
    w = frame.weights
    A = -(w * ff.hess[:, 0] / ff.f).sum(axis=0)
    B = -(w * ff.hess[:, 1] / ff.f).sum(axis=0)
    C = -(w * ff.hess[:, 2] / ff.f).sum(axis=0)
    lam = 0.5 * (A + C) - np.sqrt(0.25 * (A - C) ** 2 + B**2)
    return -G2 / G + lam


def sectional_fibers(ff, G) -> np.ndarray:
    """R_lsls = -<grad f_l, grad f_s> / (f_l f_s), zero diagonal, shape (m, m, N)."""
    g = ff.grad / ff.f[:, None, :]
    R = -np.einsum("lkn,skn->lsn", g, g)
    idx = np.arange(R.shape[0])
    R[idx, idx] = 0.0
    return R


def ricci_U_bound(tm: TotalMetric, frame: HorizontalFrame, x, Y, i: int | None = None, ff=None, exact=False):
    """R(X, U_i, X, U_i) + R(X~, U_i, X~, U_i) + sum_{j != i} K_ij.

    K_ij = sum_{l,s} (c_l^i)^2 (c_s^j)^2 R_lsls. With ``exact`` the missing
    cross term -c_l^i c_l^j c_s^i c_s^j R_lsls is included, giving the true
    sectional curvature of span(U_i, U_j). Returns shape (n, N), or (N,) when
    ``i`` (1-based) is given.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ff = ff if ff is not None else tm.fiber_field(x, Y)
    G = tm.profile.arrays(x)[0]
    lap = -(ff.hess[:, 0] + ff.hess[:, 2]) / ff.f  # (m, N)
    c = frame.c
    c2 = c**2
    base = np.einsum("iln,ln->in", c2, lap)
    R = sectional_fibers(ff, G)
    K = np.einsum("iln,jsn,lsn->ijn", c2, c2, R)
    if exact:
        K = K - np.einsum("iln,jln,isn,jsn,lsn->ijn", c, c, c, c, R)
    idx = np.arange(frame.n)
    K[idx, idx] = 0.0
    out = base + K.sum(axis=1)
    return out if i is None else out[i - 1]


def relaxed_hyperbolic_bound(params, n: int, c: float) -> float:
    """Worst case over directions of the relaxed band estimate.

    -1 + n c^2 [min(1/mu^2, -mu/(4 eps)) + min(1/(16 eps^2), tanh(nu)/(4 eps tan((2+pi)/4)))]
    """
    eps, mu, nu = params.epsilon, params.mu, params.nu
    t1 = min(1 / mu**2, -mu / (4 * eps))
    t2 = min(1 / (16 * eps**2), math.tanh(nu) / (4 * eps * math.tan((2 + math.pi) / 4)))
    return -1 + n * c**2 * (t1 + t2)


# ------------------------------------------------------------ certification


@dataclass(frozen=True)
class GridSpec:
    """Base points: an nx x ny lattice over D plus n_rho x n_psi points in every edge tube."""

    nx: int = 24
    ny: int = 24
    n_rho: int = 6
    n_psi: int = 24
    n_dir: int = N_DIR
    workers: int = 1
    chunk: int = 256


def base_points(tm: TotalMetric, grid: GridSpec):
    """Deterministic sample points of D, excluding the boundary; (x, Y, origin)."""
    D = tm.polygon
    delta = D.quadrangle.params.delta
    x_hi = float(np.max(D.half_path.samples[:, 1]))
    xs = np.linspace(-delta, x_hi, grid.nx + 2)[1:-1]
    ys = np.linspace(0.0, D.height, grid.ny + 2)[1:-1]
    X, Yg = np.meshgrid(xs, ys, indexing="ij")
    X, Yg = X.ravel(), Yg.ravel()
    keep = D.contains(X, Yg, margin=1e-6)
    px, py, origin = [X[keep]], [Yg[keep]], [np.full(int(keep.sum()), 0)]
    for fp in tm.fibers:
        ch = fp.chart
        e = ch.edge
        rho = ch.tube * (np.arange(1, grid.n_rho + 1) / (grid.n_rho + 0.5))
        s = e.s_lo + (e.s_hi - e.s_lo) * (np.arange(grid.n_psi) + 0.5) / grid.n_psi
        S, R = np.meshgrid(s, rho, indexing="ij")
        x, y, *_ = ch.normal_flow(S.ravel(), R.ravel())
        ok = D.contains(x, y, margin=1e-6)
        px.append(x[ok])
        py.append(y[ok])
        origin.append(np.full(int(ok.sum()), fp.index))
    return np.concatenate(px), np.concatenate(py), np.concatenate(origin)


def region_of(profile, x) -> np.ndarray:
    names = np.array(["cap", "band", "outer"])
    piece = np.asarray(profile.piece_of(x))
    return names[piece] if piece.ndim else names[int(piece)]


@dataclass
class CertificationReport:
    grid: GridSpec
    n_points: int
    n_samples: int
    min_ric_X: float
    argmin_X: tuple
    min_ric_U: float
    argmin_U: tuple
    c_min: float
    deep_interior_dev: float
    deep_interior_count: int
    min_exact_X: float
    min_exact_U: float
    oracle_max_dev: float = float("nan")
    rows: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.min_ric_X > 0 and self.min_ric_U > 0

    def to_text(self) -> str:
        ax, au = self.argmin_X, self.argmin_U
        lines = [
            f"certification: {'PASS' if self.passed else 'FAIL'}",
            f"  base_points={self.n_points} samples={self.n_samples} n_dir={self.grid.n_dir}",
            f"  min_ric_X={self.min_ric_X:.12g} at x={ax[0]:.12g} y={ax[1]:.12g} "
            f"region={ax[2]} params={tuple(round(v, 12) for v in ax[3])}",
            f"  min_ric_U={self.min_ric_U:.12g} at x={au[0]:.12g} y={au[1]:.12g} region={au[2]} i={au[3]}",
            f"  c_min={self.c_min:.12g}",
            f"  deep_interior count={self.deep_interior_count} max|ric_X - 1/k2^2|={self.deep_interior_dev:.3g}",
            f"  diagnostics: exact single-X min={self.min_exact_X:.12g} "
            f"exact K_ij ric_U min={self.min_exact_U:.12g}",
        ]
        if not math.isnan(self.oracle_max_dev):
            lines.append(f"  oracle_max_dev={self.oracle_max_dev:.3g}")
        return "\n".join(lines)

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "region", "active", "min_ric_X", "min_ric_U"])
        for r in self.rows:
            w.writerow([f"{r[0]:.12g}", f"{r[1]:.12g}", r[2], r[3], f"{r[4]:.12g}", f"{r[5]:.12g}"])
        return buf.getvalue()


def _evaluate_chunk(tm, kernel_basis, x, y, n_dir):
    ff = tm.fiber_field(x, y)
    frame = horizontal_frame(kernel_basis, ff.f)
    rx, ang = ricci_X_min(tm, frame, x, y, n_dir=n_dir, ff=ff)
    ru = ricci_U_bound(tm, frame, x, y, ff=ff)
    ex = ricci_X_exact_min(tm, frame, x, y, ff=ff)
    eu = ricci_U_bound(tm, frame, x, y, ff=ff, exact=True)
    return ff, frame, rx, ang, ru, ex, eu


def certify(tm: TotalMetric, kernel_basis, grid: GridSpec = GridSpec()) -> CertificationReport:
    """Minima of the Ricci lower bounds over base points x direction grid.

    Chunks may run on a thread pool; results are reduced in chunk order so
    the report does not depend on the number of workers.
    """
    x, y, _ = base_points(tm, grid)
    chunks = [slice(k, min(k + grid.chunk, x.size)) for k in range(0, x.size, grid.chunk)]

    def work(sl):
        return _evaluate_chunk(tm, kernel_basis, x[sl], y[sl], grid.n_dir)

    if grid.workers > 1:
        with ThreadPoolExecutor(max_workers=grid.workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(sl) for sl in chunks]
    k2 = tm.profile.params.k2
    best_X = (math.inf, None)
    best_U = (math.inf, None)
    rows, c_min = [], math.inf
    dev, ndeep = 0.0, 0
    min_ex, min_eu = math.inf, math.inf
    for sl, (ff, frame, rx, ang, ru, ex, eu) in zip(chunks, results):
        xs, ys = x[sl], y[sl]
        reg = region_of(tm.profile, xs)
        nact = ff.active.sum(axis=0)
        rumin = ru.min(axis=0)
        c_min = min(c_min, frame.c_min)
        min_ex = min(min_ex, float(ex.min()))
        min_eu = min(min_eu, float(eu.min()))
        deep = (nact == 0) & (reg == "outer")
        if np.any(deep):
            dev = max(dev, float(np.max(np.abs(rx[deep] - 1 / k2**2))))
            ndeep += int(deep.sum())
        j = int(np.argmin(rx))
        if rx[j] < best_X[0]:
            dirs = {l + 1: (math.cos(ang[l, j]), math.sin(ang[l, j])) for l in range(tm.m) if ff.active[l, j]}
            smp = RicciSample(float(xs[j]), float(ys[j]), dirs, float(rx[j]), list(ru[:, j]), str(reg[j]))
            best_X = (float(rx[j]), (smp.x, smp.y, smp.region, smp.params))
        j = int(np.argmin(rumin))
        if rumin[j] < best_U[0]:
            i = int(np.argmin(ru[:, j])) + 1
            best_U = (float(rumin[j]), (float(xs[j]), float(ys[j]), str(reg[j]), i))
        for t in range(xs.size):
            rows.append((xs[t], ys[t], str(reg[t]), int(nact[t]), float(rx[t]), float(rumin[t])))
    ndirs = grid.n_dir**3
    return CertificationReport(
        grid=grid, n_points=int(x.size), n_samples=int(x.size) * ndirs,
        min_ric_X=best_X[0], argmin_X=best_X[1], min_ric_U=best_U[0], argmin_U=best_U[1],
        c_min=c_min, deep_interior_dev=dev, deep_interior_count=ndeep,
        min_exact_X=min_ex, min_exact_U=min_eu, rows=rows,
    )


# ------------------------------------------------------------ oracle


def _check_oracle_point(tm: TotalMetric, x: float, Y: float, h: float):
    margin = 10 * h
    for b in tm.profile.breakpoints:
        if abs(x - b) < margin:
            raise OracleError(f"x={x} within {margin} of the profile breakpoint {b}")
    ff = tm.fiber_field(np.array([x]), np.array([Y]))
    for k, fp in enumerate(tm.fibers):
        rho = ff.rho[k, 0]
        if not np.isfinite(rho):
            continue
        if rho < margin or abs(rho - fp.breakpoint) < margin:
            raise OracleError(f"rho_{k + 1}={rho} too close to a breakpoint of f_{k + 1}")
        if fp.chart.edge.kind != "equator":
            lo, hi = sorted((x, float(ff.foot_x[k, 0])))
            for b in tm.profile.breakpoints:
                if lo - margin < b < hi + margin:
                    raise OracleError(f"normal geodesic of Gamma_{k + 1} crosses x={b}")


def fd_oracle(tm: TotalMetric, x: float, Y: float, h: float = 1e-4, metric=None) -> np.ndarray:
    """Riemann tensor T[a,b,c,d] = <R(e_c,e_d)e_b, e_a> from finite differences.

    Derivatives of the diagonal metric (1, G^2, f_1^2, ...) in (x, y) use
    central differences with one Richardson extrapolation; Christoffel symbols
    and the curvature follow from the coordinate formulas. ``metric(x, Y)``
    may replace the coefficient function (must return shape (d, N)).
    """
    if metric is None:
        _check_oracle_point(tm, x, Y, h)
        metric = tm.metric_at
    # dyadic step and point keep every stencil coordinate exactly representable
    h = math.ldexp(round(math.ldexp(h, 40)), -40)
    x = math.ldexp(round(math.ldexp(x, 40)), -40)
    Y = math.ldexp(round(math.ldexp(Y, 40)), -40)
    offs = []
    for s in (h, h / 2):
        offs += [(0, 0), (s, 0), (-s, 0), (0, s), (0, -s), (s, s), (s, -s), (-s, s), (-s, -s)]
    px = np.array([x + a for a, _ in offs])
    py = np.array([Y + b for _, b in offs])
    g_all = metric(px, py)
    d = g_all.shape[0]

    def derivs(g, s):
        c, xp, xm, yp, ym, pp, pm, mp, mm = g
        return (
            (xp - xm) / (2 * s), (yp - ym) / (2 * s),
            (xp - 2 * c + xm) / s**2, (pp - pm - mp + mm) / (4 * s**2), (yp - 2 * c + ym) / s**2,
        )

    D1 = derivs(g_all[:, :9].T, h)
    D2 = derivs(g_all[:, 9:].T, h / 2)
    gx, gy, gxx, gxy, gyy = ((4 * b - a) / 3 for a, b in zip(D1, D2))
    g = g_all[:, 9]
    dg = np.zeros((d, d))  # dg[k, a] = d_k g_aa, k over coordinates
    dg[0], dg[1] = gx, gy
    ddg = np.zeros((d, d, d))
    ddg[0, 0], ddg[0, 1], ddg[1, 0], ddg[1, 1] = gxx, gxy, gxy, gyy
    return _riemann_from_diagonal(g, dg, ddg)


def _riemann_from_diagonal(g, dg, ddg) -> np.ndarray:
    """Orthonormal Riemann tensor of a diagonal metric from its derivatives.

    dg[k, a] = d_k g_aa and ddg[k, l, a] = d_k d_l g_aa.
    """
    d = g.size
    I = np.eye(d)
    # full derivative tensors of g_ab = g_a delta_ab
    Dg = dg[:, :, None] * I[None]  # Dg[k, a, b]
    DDg = ddg[:, :, :, None] * I[None, None]  # DDg[k, l, a, b]
    ginv = 1.0 / g
    # Gamma[a, b, c] = 1/2 g^aa (d_b g_ac + d_c g_ab - d_a g_bc)
    Gam = 0.5 * ginv[:, None, None] * (
        np.einsum("bac->abc", Dg) + np.einsum("cab->abc", Dg) - Dg
    )
    # dGam[k, a, b, c]
    bracket = np.einsum("kbac->kabc", DDg) + np.einsum("kcab->kabc", DDg) - DDg
    first = np.einsum("bac->abc", Dg) + np.einsum("cab->abc", Dg) - Dg
    dginv = -dg / g**2  # dginv[k, a]
    dGam = 0.5 * (dginv[:, :, None, None] * first[None] + ginv[None, :, None, None] * bracket)
    # R^a_{bcd} = d_c Gam^a_db - d_d Gam^a_cb + Gam^a_ce Gam^e_db - Gam^a_de Gam^e_cb
    Rup = (
        np.einsum("cadb->abcd", dGam)
        - np.einsum("dacb->abcd", dGam)
        + np.einsum("ace,edb->abcd", Gam, Gam)
        - np.einsum("ade,ecb->abcd", Gam, Gam)
    )
    Rlow = g[:, None, None, None] * Rup
    s = np.sqrt(g)
    return Rlow / (s[:, None, None, None] * s[None, :, None, None] * s[None, None, :, None] * s[None, None, None, :])


def bianchi_residual(T: np.ndarray) -> float:
    r = T + np.einsum("acdb->abcd", T) + np.einsum("adbc->abcd", T)
    return float(np.max(np.abs(r)))


def oracle_deviation(T_fd: np.ndarray, T_cf: np.ndarray) -> float:
    """max |T_fd - T_cf| / max(1, |T_cf|) over all entries."""
    return float(np.max(np.abs(T_fd - T_cf) / np.maximum(1.0, np.abs(T_cf))))
