"""Geodesics on dx^2 + G(x)^2 dy^2, the quadrangle Pi, Gauss-Bonnet tuning and
the polygon D.

Geodesics are integrated in the orthonormal-angle form

    x' = cos(a),  y' = sin(a) / G(x),  a' = -G'(x) sin(a) / G(x)

where ``a`` is the angle of the unit tangent against d/dx measured in the
frame (d/dx, d/dy / G). G(x) sin(a) is the Clairaut integral. Integration is
restarted on every profile breakpoint so each segment sees a single smooth
piece.
"""

from __future__ import annotations

import csv
import io
import math
import weakref
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .profile import MetricParams, ProfileG, build_profile

RTOL = 1e-13
ATOL = 1e-13


class GeodesicError(RuntimeError):
    """Boundary-value solve failed to converge."""

    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class PolygonError(ValueError):
    pass


@dataclass
class _Segment:
    s0: float
    s1: float
    piece: int
    sol: object  # scipy OdeSolution


@dataclass
class GeodesicPath:
    """Unit-speed geodesic sampled at the integrator's steps.

    ``samples`` columns are (s, x, y, angle). :meth:`at` evaluates the dense
    interpolant at arbitrary arclength.
    """

    samples: np.ndarray
    clairaut_constant: float
    segments: list = field(repr=False, default_factory=list)
    truncated: bool = False
    reason: str = ""

    @property
    def length(self) -> float:
        return float(self.samples[-1, 0])

    @property
    def start(self) -> np.ndarray:
        return self.samples[0, 1:]

    @property
    def end(self) -> np.ndarray:
        return self.samples[-1, 1:]

    def at(self, s) -> np.ndarray:
        """(x, y, angle) at arclength ``s`` (scalar or array) -> shape (3, ...)."""
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s).ravel()
        out = np.empty((3, flat.size))
        for k, seg in enumerate(self.segments):
            last = k == len(self.segments) - 1
            mask = (flat >= seg.s0) & ((flat < seg.s1) | (last & (flat <= seg.s1 + 1e-12)))
            if k == 0:
                mask |= flat < seg.s0
            if np.any(mask):
                out[:, mask] = seg.sol(np.clip(flat[mask], seg.s0, seg.s1))
        return out.reshape((3,) + s.shape)

    def reversed(self) -> "GeodesicPath":
        """The same curve traversed backwards (angles rotated by pi)."""
        L = self.length
        smp = self.samples[::-1].copy()
        smp[:, 0] = L - smp[:, 0]
        smp[:, 3] = np.mod(smp[:, 3] + 2 * np.pi, 2 * np.pi) - np.pi
        rev = _ReversedSegments(self)
        return GeodesicPath(
            samples=smp,
            clairaut_constant=-self.clairaut_constant,
            segments=[rev],
            truncated=self.truncated,
            reason=self.reason,
        )


class _ReversedSegments:
    def __init__(self, path: GeodesicPath):
        self.path = path
        self.s0, self.s1, self.piece = 0.0, path.length, -1

    def sol(self, s):
        v = self.path.at(self.path.length - np.asarray(s))
        v[2] = np.mod(v[2] + 2 * np.pi, 2 * np.pi) - np.pi
        return v


def _rhs_factory(profile, piece: int):
    def rhs(s, z):
        g, g1, _ = profile.piece_arrays(z[0], piece)
        sa = math.sin(z[2])
        return [math.cos(z[2]), sa / g, -g1 * sa / g]

    return rhs


def shoot_geodesic(
    profile,
    start: Sequence[float],
    angle: float,
    length: float,
    stop: Callable | None = None,
    max_step: float = np.inf,
) -> GeodesicPath:
    """Integrate a geodesic from ``start`` with initial ``angle`` for ``length``.

    ``stop(s, z)`` is an optional extra terminal event (zero crossing). Leaving
    the strip x >= -delta or reaching G = 0 truncates the path with a flag.
    """
    x_lo, x_hi = profile.x_start, profile.x_end
    bps = list(profile.breakpoints)
    z = np.array([float(start[0]), float(start[1]), float(angle)])
    s = 0.0
    rows = [[0.0, *z]]
    segments: list[_Segment] = []
    truncated, reason = False, ""

    def ev_exit(s, z):
        return z[0] - (x_lo - 1e-12)

    ev_exit.terminal, ev_exit.direction = True, -1

    def ev_zero(s, z):
        return z[0] - (x_hi - 1e-9)

    ev_zero.terminal, ev_zero.direction = True, 1

    if stop is not None:
        stop.terminal = True

    def bp_event(b, direction):
        def ev_bp(s, z):
            return z[0] - b

        ev_bp.terminal, ev_bp.direction = True, direction
        return ev_bp

    guard = 0
    while s < length - 1e-15:
        guard += 1
        if guard > 10_000:
            raise GeodesicError("too many breakpoint restarts")
        direction_right = math.cos(z[2]) >= 0
        side = "right" if direction_right else "left"
        piece = int(profile.piece_of(z[0], side)) if bps else 0
        # a breakpoint we sit on only counts when it is crossed back
        events = [ev_exit, ev_zero] + [
            bp_event(b, (-1 if direction_right else 1) if abs(z[0] - b) < 1e-12 else 0) for b in bps
        ]
        if stop is not None:
            events.append(stop)
        sol = solve_ivp(
            _rhs_factory(profile, piece),
            (s, length),
            z,
            method="DOP853",
            rtol=RTOL,
            atol=ATOL,
            dense_output=True,
            events=events,
            max_step=max_step,
        )
        if sol.status < 0:
            raise GeodesicError(f"integration failed: {sol.message}")
        s_end = float(sol.t[-1])
        z_end = sol.y[:, -1]
        hit = None
        for k, te in enumerate(sol.t_events):
            # ignore the breakpoint we are sitting on at restart
            valid = [t for t in te if t > s + 1e-13]
            if valid and (hit is None or valid[0] < hit[1]):
                hit = (k, valid[0])
        if hit is not None:
            s_end = hit[1]
            z_end = sol.sol(s_end)
        mask = sol.t <= s_end
        for t, zz in zip(sol.t[mask], sol.y[:, mask].T):
            if t > s:
                rows.append([t, *zz])
        if rows[-1][0] < s_end:
            rows.append([s_end, *z_end])
        segments.append(_Segment(s, s_end, piece, sol.sol))
        s, z = s_end, np.array(z_end)
        if hit is None:
            break
        k = hit[0]
        if k == 0:
            truncated, reason = True, "left the strip x >= -delta"
            break
        if k == 1:
            truncated, reason = True, "reached the zero of G"
            break
        if stop is not None and k == len(events) - 1:
            reason = "stop event"
            break
        # breakpoint: snap and continue on the next piece
        z[0] = bps[k - 2]
    g0 = float(profile.arrays(float(start[0]))[0])
    return GeodesicPath(
        samples=np.array(rows),
        clairaut_constant=g0 * math.sin(angle),
        segments=segments,
        truncated=truncated,
        reason=reason,
    )


def clairaut_drift(profile, path: GeodesicPath) -> float:
    x, a = path.samples[:, 1], path.samples[:, 3]
    g = profile.arrays(x)[0]
    return float(np.max(np.abs(g * np.sin(a) - path.clairaut_constant)))


def connect_geodesic(
    profile,
    p: Sequence[float],
    q: Sequence[float],
    angle_guess: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> GeodesicPath:
    """Geodesic from ``p`` to ``q`` by shooting on the initial angle.

    The path is integrated until it reaches the height y = q_y (y is monotone
    along any geodesic that is not a meridian); the secant iteration drives
    the x-miss to zero.
    """
    px, py = map(float, p)
    qx, qy = map(float, q)
    if abs(qy - py) < 1e-15:
        # meridians y = const are geodesics
        ang = 0.0 if qx >= px else math.pi
        return shoot_geodesic(profile, (px, py), ang, abs(qx - px))
    up = qy > py
    gmax = float(np.max(profile.arrays(np.linspace(profile.x_start, max(px, qx) + 1, 200))[0]))
    reach = 4 * (abs(qx - px) + gmax * abs(qy - py)) + 10

    def stop(s, z):
        return z[1] - qy

    def miss(a):
        path = shoot_geodesic(profile, (px, py), a, reach, stop=stop)
        if path.reason != "stop event":
            return None, path
        return path.end[0] - qx, path

    if angle_guess is None:
        angle_guess = math.atan2(float(profile.arrays(px)[0]) * (qy - py), qx - px)
    a0 = angle_guess
    f0, path0 = miss(a0)
    if f0 is None:
        raise GeodesicError("initial shot does not reach the target height")
    best = (abs(f0), path0)
    a1 = a0 + (1e-3 if up else -1e-3) * (1 if f0 > 0 else -1)
    f1, path1 = miss(a1)
    step = 1e-3
    while f1 is None and step > 1e-12:
        step /= 2
        a1 = a0 + math.copysign(step, a1 - a0)
        f1, path1 = miss(a1)
    if f1 is None:
        raise GeodesicError("no admissible secant partner", best[0])
    for _ in range(max_iter):
        if abs(f1) < best[0]:
            best = (abs(f1), path1)
        if abs(f1) < tol:
            return path1
        if f1 == f0:
            break
        a2 = a1 - f1 * (a1 - a0) / (f1 - f0)
        f2, path2 = miss(a2)
        damp = 0
        while f2 is None and damp < 60:
            a2 = 0.5 * (a2 + a1)
            f2, path2 = miss(a2)
            damp += 1
        if f2 is None:
            break
        a0, f0, a1, f1, path1 = a1, f1, a2, f2, path2
    if best[0] < tol:
        return best[1]
    raise GeodesicError("connect_geodesic did not converge", best[0])


@dataclass
class QuadrangleSpec:
    """Region -delta <= x <= X(y), 0 <= y <= Delta bounded on the right by gamma."""

    profile: object
    gamma: GeodesicPath
    r: float
    Delta: float

    @property
    def params(self) -> MetricParams:
        return self.profile.params

    @property
    def x_turn(self) -> float:
        """Extreme x of gamma (leftmost if it bulges inward, else rightmost)."""
        xs = self.gamma.samples[:, 1]
        return float(xs.min() if xs.min() < self.r - 1e-12 else xs.max())

    def distance_to_2eps(self) -> tuple[float, float]:
        """(nearest, farthest) distance of gamma from the line x = 2 eps."""
        d = np.abs(self.gamma.samples[:, 1] - 2 * self.params.epsilon)
        return float(d.min()), float(d.max())


def make_quadrangle(profile, r: float, Delta: float, angle_guess: float | None = None):
    gamma = connect_geodesic(profile, (r, 0.0), (r, Delta), angle_guess=angle_guess)
    return QuadrangleSpec(profile=profile, gamma=gamma, r=r, Delta=Delta)


def _inner_curvature_integral(profile, a: float, b: float) -> float:
    """Quadrature of K G = -G'' over [a, b], split at breakpoints, smooth part only."""
    cuts = [a] + [c for c in profile.breakpoints if a < c < b] + [b]
    hints = [c for c in getattr(profile, "quad_points", ()) if a < c < b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        piece = int(profile.piece_of(0.5 * (lo + hi)))
        pts = [c for c in hints if lo < c < hi] or None
        total += quad(
            lambda x: -float(profile.piece_arrays(x, piece)[2]),
            lo, hi, epsabs=1e-13, epsrel=1e-13, points=pts, limit=200,
        )[0]
    return total


class _CumulativeCurvature:
    """int_{x_start}^{x} -G'' with partial sums cached on a fixed node grid."""

    STEP = 0.05

    def __init__(self, profile):
        self.profile = profile
        self.sums = [0.0]

    def __call__(self, x: float) -> float:
        a, h = self.profile.x_start, self.STEP
        k = max(0, int((x - a) // h))
        while len(self.sums) <= k:
            j = len(self.sums) - 1
            self.sums.append(self.sums[-1] + _inner_curvature_integral(self.profile, a + j * h, a + (j + 1) * h))
        return self.sums[k] + _inner_curvature_integral(self.profile, a + k * h, x)


_CUMULATIVE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _cumulative_curvature(profile, x: float) -> float:
    try:
        table = _CUMULATIVE[profile]
    except (KeyError, TypeError):
        table = _CumulativeCurvature(profile)
        try:
            _CUMULATIVE[profile] = table
        except TypeError:
            pass
    return table(x)


def kink_jumps(profile) -> list[tuple[float, float]]:
    """(location, G'(b+) - G'(b-)) for every breakpoint with a derivative jump."""
    out = []
    for b in profile.breakpoints:
        jump = float(profile.arrays(b, "right")[1] - profile.arrays(b, "left")[1])
        if abs(jump) > 1e-14:
            out.append((b, jump))
    return out


def strip_curvature(profile, a: float, b: float, height: float, include_line: bool = True):
    """Adaptive quadrature of K dA over [a, b] x [0, height]."""
    val = height * _inner_curvature_integral(profile, a, b)
    if include_line:
        for loc, jump in kink_jumps(profile):
            if a < loc < b:
                val -= jump * height
    return val


def total_curvature(q: QuadrangleSpec) -> float:
    """Integral of K dA over the quadrangle, including line terms at kinks.

    The outer integral runs over gamma's arclength with dy = sin(a)/G ds.
    """
    prof, path = q.profile, q.gamma
    jumps = kink_jumps(prof)

    def integrand(s):
        x, _, a = path.at(s)
        x = float(x)
        dy = math.sin(float(a)) / float(prof.arrays(x)[0])
        inner = _cumulative_curvature(prof, x)
        for loc, jump in jumps:
            if x > loc:
                inner -= jump
        return inner * dy

    L = path.length
    pts = [seg.s1 for seg in path.segments[:-1]] if len(path.segments) > 1 else None
    val, _ = quad(integrand, 0.0, L, points=pts, epsabs=1e-11, epsrel=1e-12, limit=400)
    return val


def boundary_identity(q: QuadrangleSpec) -> float:
    """Closed form -int G'(X(y)) dy (G'(-delta) = 0), integrated along gamma."""
    prof, path = q.profile, q.gamma

    def integrand(s):
        x, _, a = path.at(s)
        g, g1, _ = prof.arrays(float(x))
        return -float(g1) * math.sin(float(a)) / float(g)

    val, _ = quad(integrand, 0.0, path.length, epsabs=1e-12, epsrel=1e-12, limit=400)
    return val


def corner_angles(q: QuadrangleSpec) -> tuple[float, float]:
    """Interior angles of the quadrangle at (r, 0) and (r, Delta)."""
    a0 = float(q.gamma.samples[0, 3])
    a1 = float(q.gamma.samples[-1, 3])
    # bottom: between -d/dx and gamma'(0); top: between -d/dx and -gamma'(L)
    bottom = abs(math.atan2(math.sin(math.pi - a0), math.cos(math.pi - a0)))
    top = abs(math.atan2(math.sin(a1), math.cos(a1)))
    return bottom, top


@dataclass
class GaussBonnetAttempt:
    k2: float
    feasible: bool
    r: float = float("nan")
    Delta: float = float("nan")
    x_turn: float = float("nan")
    total: float = float("nan")
    identity_total: float = float("nan")
    lower_bound: float = float("nan")
    corners: tuple[float, float] = (float("nan"), float("nan"))
    note: str = ""


@dataclass
class GaussBonnetResult:
    """Outcome of the Gauss-Bonnet search; ``quadrangle`` is set on success."""

    feasible: bool
    target: float
    attempts: list[GaussBonnetAttempt]
    quadrangle: QuadrangleSpec | None = None
    profile: object | None = None
    report: str = ""

    @property
    def k2(self) -> float:
        return self.profile.params.k2 if self.profile is not None else float("nan")


def _solve_shifted(profile, target: float, x_turn: float, mu1: float):
    """Quadrangle with corner angle (pi + target)/2 whose gamma turns at ``x_turn``.

    Clairaut gives G(x_turn) = G(r) sin(theta); the height Delta is twice the
    height gained between (r, 0) and the turning point.
    """
    p = profile.params
    theta = 0.5 * (math.pi + target)
    if not 0 < theta < math.pi / 2:
        raise ValueError("target must lie in (-pi, 0)")
    g_turn = float(profile.arrays(x_turn)[0])
    need = g_turn / math.sin(theta)
    x_peak = p.x0 if p.branch == "shifted" else 2 * p.epsilon
    g_peak = float(profile.arrays(x_peak)[0])
    att = GaussBonnetAttempt(k2=p.k2, feasible=False, x_turn=x_turn)
    if x_peak <= x_turn or g_peak <= need:
        att.note = (
            f"max G right of the turning point is {g_peak:.6g} but G(r) = {need:.6g} is needed"
        )
        return att, None
    r = brentq(lambda x: float(profile.arrays(x)[0]) - need, x_turn, x_peak, xtol=1e-15, rtol=1e-15)
    a0 = math.pi - theta

    def at_turn(s, z):
        return z[2] - math.pi / 2

    half = shoot_geodesic(profile, (r, 0.0), a0, 1e4, stop=at_turn)
    if half.reason != "stop event":
        att.note = f"no turning point: {half.reason}"
        return att, None
    Delta = 2 * float(half.end[1])
    q = make_quadrangle(profile, r, Delta, angle_guess=a0)
    att.r, att.Delta = r, Delta
    att.total = total_curvature(q)
    att.identity_total = boundary_identity(q)
    att.corners = corner_angles(q)
    near, _ = q.distance_to_2eps()
    att.feasible = abs(att.total - target) < 1e-6 and near < mu1
    if not att.feasible:
        att.note = f"total {att.total:.9g}, nearest distance to x=2eps {near:.3g}"
    return att, q


def _principal_evidence(profile, r: float, Delta: float) -> GaussBonnetAttempt:
    """Total curvature of an admissible quadrangle when G' < 0 right of eps."""
    p = profile.params
    att = GaussBonnetAttempt(k2=p.k2, feasible=False, r=r, Delta=Delta)
    q = make_quadrangle(profile, r, Delta)
    att.x_turn = q.x_turn
    att.total = total_curvature(q)
    att.identity_total = boundary_identity(q)
    att.lower_bound = Delta * math.sinh(p.nu)
    att.corners = corner_angles(q)
    xs = np.linspace(p.epsilon, min(profile.x_end - 1e-6, q.x_turn + 1.0), 4001)
    gmax = float(np.max(profile.arrays(xs)[1]))
    att.note = (
        f"G' <= {gmax:.6g} <= -sinh(nu) on [eps, x_max]: total = -int G'(X(y)) dy "
        f">= Delta sinh(nu) = {att.lower_bound:.9g} > 0"
    )
    return att


def solve_gauss_bonnet(
    params: MetricParams,
    target: float = -math.pi / 2,
    k2_ladder: Sequence[float] = (10.0, 20.0, 30.0, 40.0, 60.0, 80.0),
    turn_offset: float | None = None,
    profile_factory: Callable | None = None,
) -> GaussBonnetResult:
    """Search k2 over the ladder for a quadrangle with total curvature ``target``.

    ``profile_factory(params)`` builds the surface profile (default: the
    piecewise G). The turning point of gamma is placed at 2 eps +
    ``turn_offset`` (default mu1 / 2).
    """
    factory = profile_factory or build_profile
    offset = params.mu1 / 2 if turn_offset is None else turn_offset
    attempts = []
    for k2 in k2_ladder:
        prof = factory(replace(params, k2=float(k2), k1=float("nan"), x0=float("nan")))
        if prof.params.branch == "principal":
            attempts.append(_principal_evidence(prof, params.r, params.Delta))
            continue
        att, q = _solve_shifted(prof, target, 2 * params.epsilon + offset, params.mu1)
        attempts.append(att)
        if att.feasible:
            res = GaussBonnetResult(True, target, attempts, quadrangle=q, profile=prof)
            res.report = format_gauss_bonnet(res)
            return res
    res = GaussBonnetResult(False, target, attempts)
    res.report = format_gauss_bonnet(res)
    return res


def format_gauss_bonnet(res: GaussBonnetResult) -> str:
    lines = [
        f"gauss_bonnet: {'feasible' if res.feasible else 'INFEASIBLE'} (target {res.target:.12g})"
    ]
    for a in res.attempts:
        lines.append(
            f"  k2={a.k2:g} feasible={a.feasible} r={a.r:.12g} Delta={a.Delta:.12g} "
            f"x_turn={a.x_turn:.12g} total={a.total:.12g} identity={a.identity_total:.12g} "
            f"corners=({a.corners[0]:.12g}, {a.corners[1]:.12g})"
        )
        if not math.isnan(a.lower_bound):
            lines.append(f"    lower_bound Delta*sinh(nu) = {a.lower_bound:.12g}")
        if a.note:
            lines.append(f"    {a.note}")
    return "\n".join(lines)


# ---------------------------------------------------------------- polygon D


@dataclass(frozen=True)
class Edge:
    """Boundary edge Gamma_index of the polygon.

    kind ``equator``: x = -delta. ``meridian``: Y = level, -delta <= x <= x_turn.
    ``gamma``: copy of gamma with turning point at (x_turn, level), arclength
    parameter s in [s_lo, s_hi] increasing with Y. ``side`` is +1 when the
    interior lies to the left of the direction of increasing parameter.
    """

    index: int
    kind: Literal["equator", "meridian", "gamma"]
    level: float
    s_lo: float
    s_hi: float
    side: int


@dataclass(frozen=True)
class Vertex:
    index: int  # between Gamma_index and Gamma_index+1
    x: float
    y: float
    angle: float


@dataclass
class PolygonD:
    quadrangle: QuadrangleSpec
    m: int
    pieces: list[str]
    edges: list[Edge]
    vertices: list[Vertex]
    half_path: GeodesicPath  # from the turning point (s = 0) up to (r, Delta/2)

    @property
    def profile(self):
        return self.quadrangle.profile

    @property
    def Delta(self) -> float:
        return self.quadrangle.Delta

    @property
    def height(self) -> float:
        return (self.m - 4) * self.Delta

    @property
    def x_turn(self) -> float:
        return float(self.half_path.samples[0, 1])

    @property
    def r(self) -> float:
        return self.quadrangle.r

    @property
    def half_length(self) -> float:
        return self.half_path.length

    def edge(self, i: int) -> Edge:
        return self.edges[(i - 1) % self.m]

    def gamma_point(self, s):
        """(x, dy, angle) along a gamma copy, s measured from its turning point."""
        s = np.asarray(s, dtype=float)
        x, y, a = self.half_path.at(np.abs(s))
        y = y - self.half_path.samples[0, 2]
        return x, np.sign(s) * y, np.where(s >= 0, a, np.pi - a)

    def right_boundary(self, Y):
        """x-coordinate of the right boundary at height Y."""
        Y = np.asarray(Y, dtype=float)
        k = np.clip(np.round(Y / self.Delta), 0, self.m - 4)
        dy = np.abs(Y - k * self.Delta)
        ys = self.half_path.samples[:, 2] - self.half_path.samples[0, 2]
        xs = self.half_path.samples[:, 1]
        return np.interp(dy, ys, xs)

    def contains(self, x, Y, margin: float = 0.0):
        x = np.asarray(x, dtype=float)
        Y = np.asarray(Y, dtype=float)
        inside = (x >= -self.quadrangle.params.delta + margin) & (Y >= margin)
        inside &= Y <= self.height - margin
        return inside & (x <= self.right_boundary(Y) - margin)

    def geometry_csv(self, samples_per_edge: int = 64) -> str:
        """Edge polylines and vertex angles as CSV (x, Y in polygon coordinates)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["record", "index", "t", "x", "y", "angle"])
        for e in self.edges:
            for k, t in enumerate(np.linspace(0.0, 1.0, samples_per_edge)):
                x, y = self.edge_point(e, t)
                w.writerow(["edge", e.index, k, f"{x:.12g}", f"{y:.12g}", ""])
        for v in self.vertices:
            w.writerow(["vertex", v.index, "", f"{v.x:.12g}", f"{v.y:.12g}", f"{v.angle:.12g}"])
        return buf.getvalue()

    def edge_point(self, e: Edge, t: float) -> tuple[float, float]:
        delta = self.quadrangle.params.delta
        if e.kind == "equator":
            return -delta, t * self.height
        if e.kind == "meridian":
            return -delta + t * (self.x_turn + delta), e.level
        s = e.s_lo + t * (e.s_hi - e.s_lo)
        x, dy, _ = self.gamma_point(s)
        return float(x), float(e.level + dy)


def assemble_polygon(q: QuadrangleSpec, m: int) -> PolygonD:
    """Stack Pi_-, (m - 5) copies of Pi and Pi_+ into the m-gon D.

    Polygon coordinates put the turning points of the gamma copies at
    Y = k Delta, k = 0..m-4; Gamma_1 is x = -delta, Gamma_2 the top cut,
    Gamma_3..Gamma_{m-1} the gamma arcs from top to bottom, Gamma_m the bottom
    cut.
    """
    if m < 5:
        raise PolygonError(f"m={m} < 5: use orbit_space.small_case")
    prof, Delta, r = q.profile, q.Delta, q.r
    gamma = q.gamma
    # half path: from the turning point up to (r, Delta)
    xs = gamma.samples[:, 1]
    bulge_in = xs.min() < r - 1e-12
    if not bulge_in:
        raise PolygonError("gamma does not bulge into the quadrangle; Gauss-Bonnet unsolved?")

    def at_turn(s, z):
        return z[2] - math.pi / 2

    a0 = float(gamma.samples[0, 3])
    first = shoot_geodesic(prof, (r, 0.0), a0, gamma.length, stop=at_turn)
    x_turn, y_turn = (float(v) for v in first.end[:2])
    half = shoot_geodesic(prof, (x_turn, y_turn), math.pi / 2, gamma.length - first.length)
    L2 = half.length
    H = (m - 4) * Delta
    delta = q.params.delta
    edges = [
        Edge(1, "equator", 0.0, 0.0, H, -1),
        Edge(2, "meridian", H, 0.0, x_turn + delta, -1),
    ]
    for i in range(3, m):
        k = m - 1 - i
        lo = -L2 if i != m - 1 else 0.0
        hi = L2 if i != 3 else 0.0
        edges.append(Edge(i, "gamma", k * Delta, lo, hi, 1))
    edges.append(Edge(m, "meridian", 0.0, 0.0, x_turn + delta, 1))

    a_top = float(half.samples[-1, 3])
    # incoming arc ends at angle a_top, the next one leaves at pi - a_top
    joint = 2 * a_top
    a_turn = float(half.samples[0, 3])
    turn_corner = math.acos(min(1.0, abs(math.cos(a_turn))))
    vertices = [Vertex(1, -delta, H, math.pi / 2)]
    vertices.append(Vertex(2, x_turn, H, turn_corner))
    for i in range(3, m - 1):
        k = m - 2 - i
        vertices.append(Vertex(i, r, k * Delta + Delta / 2, joint))
    vertices.append(Vertex(m - 1, x_turn, 0.0, turn_corner))
    vertices.append(Vertex(m, -delta, 0.0, math.pi / 2))
    pieces = ["Pi_-"] + ["Pi"] * (m - 5) + ["Pi_+"]
    return PolygonD(q, m, pieces, edges, vertices, half)
