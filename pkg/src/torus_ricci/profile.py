"""Warping profile G of the base surface dx^2 + G(x)^2 dy^2.

G glues three constant-curvature pieces: a k1-sphere cap on [-delta, eps], a
hyperbolic band on [eps, 2 eps] and a k2-sphere piece beyond 2 eps. The
matching constants k1 and x0 come from

    tanh(eps + nu) = tan((eps + delta) / k1) / k1
    tan((2 eps - x0) / k2) = k2 tanh(nu)

The third-piece amplitude defaults to sqrt(1 + (1 + k2^2) sinh^2(nu)), the
value for which G is continuous at 2 eps; ``amplitude="printed"`` swaps in
sinh^2(eps + nu) for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

Branch = Literal["principal", "shifted"]


class ParameterError(ValueError):
    """Construction parameters violate their admissibility constraints."""


class ProfileDomainError(ValueError):
    """Evaluation outside the domain where G is defined and positive."""


@dataclass(frozen=True)
class MetricParams:
    """Scalar parameters of the construction.

    ``k1`` and ``x0`` are filled in by :func:`solve_params`.
    """

    epsilon: float = 0.1
    delta: float = 0.15
    nu: float = 0.05
    Delta: float = 1.0
    k2: float = 10.0
    mu1: float = 0.2
    mu: float = 0.05
    r: float = 0.3
    branch: Branch = "principal"
    k1: float = float("nan")
    x0: float = float("nan")

    def violations(self) -> list[str]:
        eps, out = self.epsilon, []
        if not eps > 0:
            out.append("epsilon must be > 0")
        if not eps * (math.pi - 1) > self.delta > self.nu > 0:
            out.append("need eps(pi-1) > delta > nu > 0")
        if not self.Delta > 0:
            out.append("Delta must be > 0")
        if not self.k2 > 0:
            out.append("k2 must be > 0")
        if not 0 < self.mu1 <= eps * (math.pi - 1):
            out.append("need 0 < mu1 <= eps(pi-1)")
        if not 0 < self.mu <= 2 * math.pi * self.mu1:
            out.append("need 0 < mu <= 2 pi mu1")
        if not self.mu < eps:
            out.append("need mu < eps")
        if not self.r > 2 * eps:
            out.append("need r > 2 eps")
        if self.branch not in ("principal", "shifted"):
            out.append(f"unknown branch {self.branch!r}")
        return out

    def validate(self) -> "MetricParams":
        bad = self.violations()
        if bad:
            raise ParameterError("; ".join(bad))
        return self


def solve_k1(eps: float, delta: float, nu: float) -> float:
    """Root of tanh(eps+nu) = tan((eps+delta)/k1)/k1 with (eps+delta)/k1 in (0, pi/2).

    Bisection in the angle t = (eps+delta)/k1, where t tan t is increasing,
    then one Newton step.
    """
    if not (eps > 0 and eps * (math.pi - 1) > delta > nu > 0):
        raise ParameterError("need eps > 0 and eps(pi-1) > delta > nu > 0")
    s = eps + delta
    target = s * math.tanh(eps + nu)

    def phi(t):
        return t * math.tan(t) - target

    lo, hi = 1e-300, math.pi / 2 - 1e-15
    if not (phi(lo) < 0 < phi(hi)):
        raise ParameterError("no sign change for the k1 equation")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    dphi = math.tan(t) + t / math.cos(t) ** 2
    t -= phi(t) / dphi
    return s / t


def solve_x0(eps: float, nu: float, k2: float, branch: Branch = "principal") -> float:
    """Matching point of the third piece.

    ``principal`` gives a C^1 join at 2 eps with G decreasing afterwards;
    ``shifted`` mirrors the phase so that G increases after 2 eps (continuous,
    with derivative kink +sinh(nu) vs -sinh(nu)).
    """
    if not k2 > 0:
        raise ParameterError("k2 must be > 0")
    theta = math.atan(k2 * math.tanh(nu))
    if branch == "principal":
        return 2 * eps - k2 * theta
    if branch == "shifted":
        return 2 * eps + k2 * theta
    raise ParameterError(f"unknown branch {branch!r}")


def solve_params(params: MetricParams) -> MetricParams:
    params.validate()
    k1 = solve_k1(params.epsilon, params.delta, params.nu)
    x0 = solve_x0(params.epsilon, params.nu, params.k2, params.branch)
    return replace(params, k1=k1, x0=x0)


@dataclass(frozen=True)
class ProfileG:
    """The piecewise profile; build with :func:`build_profile`."""

    params: MetricParams
    amplitude: Literal["corrected", "printed"] = "corrected"
    c1: float = field(init=False)
    c2: float = field(init=False)

    def __post_init__(self):
        p = self.params
        if math.isnan(p.k1) or math.isnan(p.x0):
            raise ParameterError("params are not solved; use build_profile")
        c1 = math.sqrt(1 + (1 + p.k1**2) * math.sinh(p.epsilon + p.nu) ** 2)
        s = p.nu if self.amplitude == "corrected" else p.epsilon + p.nu
        c2 = math.sqrt(1 + (1 + p.k2**2) * math.sinh(s) ** 2)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def breakpoints(self) -> tuple[float, float]:
        return (self.params.epsilon, 2 * self.params.epsilon)

    @property
    def x_start(self) -> float:
        return -self.params.delta

    @property
    def x_end(self) -> float:
        """First zero of the third piece; G > 0 on [-delta, x_end)."""
        p = self.params
        return p.x0 + p.k2 * math.pi / 2

    def piece_of(self, x, side: Literal["left", "right"] = "right"):
        """0, 1 or 2 for the cap, band and outer piece (breakpoints by ``side``)."""
        x = np.asarray(x, dtype=float)
        e1, e2 = self.breakpoints
        if side == "right":
            return np.where(x < e1, 0, np.where(x < e2, 1, 2))
        return np.where(x <= e1, 0, np.where(x <= e2, 1, 2))

    def piece_arrays(self, x, piece: int):
        """(G, G', G'') using the formula of one piece, continued to any x."""
        p = self.params
        x = np.asarray(x, dtype=float)
        if piece == 0:
            a = (x + p.delta) / p.k1
            return self.c1 * np.cos(a), -self.c1 / p.k1 * np.sin(a), -self.c1 / p.k1**2 * np.cos(a)
        if piece == 1:
            a = x - 2 * p.epsilon - p.nu
            return np.cosh(a), np.sinh(a), np.cosh(a)
        a = (x - p.x0) / p.k2
        return self.c2 * np.cos(a), -self.c2 / p.k2 * np.sin(a), -self.c2 / p.k2**2 * np.cos(a)

    def arrays(self, x, side: Literal["left", "right"] = "right"):
        """Vectorized (G, G', G'') without domain checks.

        The cap formula is used for x < -delta as well, which is the even
        extension about the equator x = -delta.
        """
        x = np.asarray(x, dtype=float)
        piece = self.piece_of(x, side)
        parts = [self.piece_arrays(x, k) for k in range(3)]
        return tuple(np.choose(piece, [parts[k][j] for k in range(3)]) for j in range(3))

    def curvature_arrays(self, x, side: Literal["left", "right"] = "right"):
        """Piecewise-constant Gauss curvature, vectorized."""
        p = self.params
        piece = self.piece_of(x, side)
        return np.choose(piece, [1 / p.k1**2, -1.0, 1 / p.k2**2])

    def _check(self, x: float):
        if x < self.x_start - 1e-15:
            raise ProfileDomainError(f"x={x} < -delta={self.x_start}")
        if x >= self.x_end:
            raise ProfileDomainError(f"x={x} beyond the zero of G at {self.x_end}")

    def eval(self, x: float, side: Literal["left", "right"] = "right"):
        """(G, G', G'') at a point; at breakpoints the one-sided limit from ``side``."""
        self._check(x)
        g, g1, g2 = (float(v) for v in self.arrays(x, side))
        if g <= 0:
            raise ProfileDomainError(f"G({x}) = {g} <= 0")
        return g, g1, g2

    def gauss_curvature(self, x: float, side: Literal["left", "right"] = "right"):
        """(K, at_breakpoint) with K = -G''/G, one-sided at breakpoints."""
        self._check(x)
        at_bp = any(abs(x - b) < 1e-14 for b in self.breakpoints)
        return float(self.curvature_arrays(x, side)), at_bp


def eval_G(profile: ProfileG, x: float, side: Literal["left", "right"] = "right"):
    return profile.eval(x, side)


def gauss_curvature(profile: ProfileG, x: float, side: Literal["left", "right"] = "right"):
    return profile.gauss_curvature(x, side)


def build_profile(params: MetricParams, amplitude: Literal["corrected", "printed"] = "corrected"):
    if math.isnan(params.k1) or math.isnan(params.x0):
        params = solve_params(params)
    return ProfileG(params=params, amplitude=amplitude)


@dataclass(frozen=True)
class ContinuityReport:
    branch: Branch
    amplitude: str
    value_jump_eps: float
    deriv_jump_eps: float
    value_jump_2eps: float
    deriv_jump_2eps: float
    expected_kink: float

    @property
    def c1_ok(self) -> bool:
        return max(self.value_jump_eps, self.deriv_jump_eps, self.value_jump_2eps) < 1e-9 and (
            abs(self.deriv_jump_2eps - self.expected_kink) < 1e-9
        )


def continuity_report(profile: ProfileG) -> ContinuityReport:
    """Value/derivative jumps of G at eps and 2 eps (right minus left limits)."""
    jumps = []
    for b in profile.breakpoints:
        gl, g1l, _ = profile.arrays(b, "left")
        gr, g1r, _ = profile.arrays(b, "right")
        jumps.append((abs(float(gr - gl)), abs(float(g1r - g1l))))
    kink = 0.0 if profile.params.branch == "principal" else 2 * math.sinh(profile.params.nu)
    return ContinuityReport(
        branch=profile.params.branch,
        amplitude=profile.amplitude,
        value_jump_eps=jumps[0][0],
        deriv_jump_eps=jumps[0][1],
        value_jump_2eps=jumps[1][0],
        deriv_jump_2eps=jumps[1][1],
        expected_kink=kink,
    )
