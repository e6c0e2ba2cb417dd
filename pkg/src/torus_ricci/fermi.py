"""Fermi coordinates (rho, psi) along the edges of the polygon D.

A point p near edge Gamma is written p = exp_{c(psi)}(rho * n(psi)) with c the
unit-speed edge, n its unit normal pointing into D and rho >= 0. The map is
inverted by Newton's method; its Jacobian columns are the normal-geodesic
tangent and the Jacobi field h E, where h'' = -K h, h(0) = 1, h'(0) = 0 (edges
are geodesics) and E is the parallel unit normal. In these coordinates the
base metric is d rho^2 + h^2 d psi^2.

Normal geodesics are integrated with a vectorized fixed-step RK4 so that many
points are located at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrangle import Edge, PolygonD, shoot_geodesic

N_RHO = 64


class ChartError(ValueError):
    """Query point outside the chart tube or foot not found."""


@dataclass(frozen=True)
class FermiCoords:
    """Vectorized chart data for a batch of query points.

    ``beta`` is the angle of grad(rho) at the query point in the frame
    (d/dx, d/dy / G); ``h`` and ``h_rho`` are the Jacobi factor and its rho
    derivative there; ``foot_x`` the x coordinate of the foot point.
    """

    rho: np.ndarray
    psi: np.ndarray
    h: np.ndarray
    h_rho: np.ndarray
    beta: np.ndarray
    foot_x: np.ndarray
    in_tube: np.ndarray


def _unit(beta, g):
    """Coordinate components (dx, dy) of the unit vector at angle beta."""
    return np.cos(beta), np.sin(beta) / g


class FermiChart:
    """Fermi chart of one edge of ``polygon``; ``tube`` caps rho."""

    def __init__(self, polygon: PolygonD, index: int, tube: float, profile=None):
        self.polygon = polygon
        self.edge: Edge = polygon.edge(index)
        self.index = self.edge.index
        self.profile = profile if profile is not None else polygon.profile
        self.tube = float(tube)
        self.sigma = self.edge.side
        self._delta = polygon.quadrangle.params.delta
        if self.edge.kind == "gamma":
            hp = polygon.half_path
            x_t, y_t = (float(v) for v in hp.samples[0, 1:3])
            ext = shoot_geodesic(
                self.profile, (x_t, y_t), math.pi / 2, polygon.half_length + 2 * self.tube + 0.5
            )
            self._path, self._y_turn = ext, y_t
            self._s_max = ext.length
        self._poly_s, self._poly_x, self._poly_y = self._polyline()

    # ---------------------------------------------------------------- edge

    def edge_point(self, s):
        """(x, Y, tangent angle) of the (extended) edge at parameter s."""
        x, dy, a = self._edge_local(s)
        return x, self.edge.level + dy, a

    def _edge_local(self, s):
        # Y measured from the edge level keeps rounding independent of height
        s = np.asarray(s, dtype=float)
        e = self.edge
        if e.kind == "meridian":
            return s - self._delta, np.zeros_like(s), np.zeros_like(s)
        if e.kind == "equator":
            return np.full_like(s, -self._delta), s, np.full_like(s, math.pi / 2)
        a = np.clip(np.abs(s), 0.0, self._s_max)
        x, y, ang = self._path.at(a)
        dy = y - self._y_turn
        return x, np.sign(s) * dy, np.where(s >= 0, ang, math.pi - ang)

    def _polyline(self):
        e, pad = self.edge, self.tube + 0.05
        lo, hi = e.s_lo - pad, e.s_hi + pad
        n = max(64, int(math.ceil((hi - lo) / 0.005)) + 1)
        s = np.linspace(lo, hi, n)
        x, y, _ = self.edge_point(s)
        return s, x, y

    # ---------------------------------------------------------------- flow

    def normal_flow(self, s, rho, n_steps: int = N_RHO):
        """Follow the normal geodesic from c(s) for length rho.

        Returns (x, Y, beta, h, h_rho) where beta is the angle of the geodesic
        tangent (= grad rho).
        """
        x, dy, beta, h, hr = self._flow_local(s, rho, n_steps)
        return x, self.edge.level + dy, beta, h, hr

    def _flow_local(self, s, rho, n_steps: int = N_RHO):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        x, y, a = self._edge_local(s)
        z = np.stack([x, y, a + self.sigma * math.pi / 2, np.ones_like(x), np.zeros_like(x)])
        dt = rho / n_steps
        prof = self.profile

        def rhs(z):
            g, g1, g2 = prof.arrays(z[0])
            sa = np.sin(z[2])
            return np.stack([np.cos(z[2]), sa / g, -g1 * sa / g, z[4], (g2 / g) * z[3]])

        for _ in range(n_steps):
            k1 = rhs(z)
            k2 = rhs(z + 0.5 * dt * k1)
            k3 = rhs(z + 0.5 * dt * k2)
            k4 = rhs(z + dt * k3)
            z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return z[0], z[1], z[2], z[3], z[4]

    def chebyshev_gap(self, x, Y):
        """Lower bound on the distance from (x, Y) to the edge polyline.

        Any path of length L changes x by at most L and, where G >= 1, Y by
        at most L. The polyline spacing is accounted for by the caller's
        margin.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        if self.edge.kind == "equator":
            return x + self._delta, np.clip(Y, self.edge.s_lo, self.edge.s_hi)
        if self.edge.kind == "meridian":
            s0 = np.clip(x + self._delta, self.edge.s_lo, self.edge.s_hi)
            return np.abs(Y - self.edge.level), s0
        d = np.maximum(
            np.abs(x[:, None] - self._poly_x[None, :]), np.abs(Y[:, None] - self._poly_y[None, :])
        )
        k = np.argmin(d, axis=1)
        return d[np.arange(len(x)), k], self._poly_s[k]

    # ---------------------------------------------------------------- locate

    def locate(self, x, Y, max_iter: int = 60, strict: bool = False) -> FermiCoords:
        """Fermi coordinates of the points (x, Y).

        Points whose distance certainly exceeds the tube are returned with
        ``in_tube`` False and rho = inf, or raise ChartError when ``strict``.
        """
        out = self._locate(x, Y, max_iter)
        if strict and not np.all(out.in_tube):
            raise ChartError(f"edge {self.index}: query point outside the tube of radius {self.tube}")
        return out

    def _locate(self, x, Y, max_iter: int) -> FermiCoords:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        n = x.size
        prof = self.profile
        if self.edge.kind == "equator":
            g, g1, _ = prof.arrays(x)
            rho = x + self._delta
            return FermiCoords(
                rho=rho, psi=Y.copy(), h=g, h_rho=g1, beta=np.zeros(n), foot_x=np.full(n, -self._delta),
                in_tube=(rho >= -1e-12) & (rho <= self.tube),
            )
        out = FermiCoords(
            rho=np.full(n, np.inf), psi=np.full(n, np.nan), h=np.full(n, np.nan),
            h_rho=np.full(n, np.nan), beta=np.full(n, np.nan), foot_x=np.full(n, np.nan),
            in_tube=np.zeros(n, dtype=bool),
        )
        gap, s_guess = self.chebyshev_gap(x, Y)
        cand = np.nonzero(gap < self.tube + 0.01)[0]
        if cand.size == 0:
            return out
        px, py = x[cand], Y[cand] - self.edge.level
        s = s_guess.copy()[cand]
        ex, ey, ea = self._edge_local(s)
        gp = prof.arrays(px)[0]
        nrm = ea + self.sigma * math.pi / 2
        rho = (px - ex) * np.cos(nrm) + gp * (py - ey) * np.sin(nrm)
        extra = 0
        for _ in range(max_iter):
            fx, fy, beta, h, _ = self._flow_local(s, rho)
            g = prof.arrays(fx)[0]
            rx, ry = px - fx, py - fy
            tx, ty = _unit(beta, g)
            ux, uy = _unit(beta - self.sigma * math.pi / 2, g)
            jx, jy = h * ux, h * uy
            det = jx * ty - jy * tx
            ds = (rx * ty - ry * tx) / det
            dr = (jx * ry - jy * rx) / det
            step = np.maximum(np.abs(ds), np.abs(dr))
            scale = np.minimum(1.0, 0.05 / step.clip(1e-300))
            s = s + scale * ds
            rho = rho + scale * dr
            # two polishing steps past convergence make the result a smooth
            # function of the query point
            if np.all(step < 1e-13):
                extra += 1
                if extra > 2:
                    break
        fx, fy, beta, h, hr = self._flow_local(s, rho)
        res = np.hypot(px - fx, py - fy)
        if np.any(res > 1e-10):
            bad = cand[res > 1e-10][0]
            raise ChartError(f"edge {self.index}: Newton failed at ({x[bad]}, {Y[bad]})")
        e = self.edge
        inside = (rho <= self.tube) & (s >= e.s_lo - self.tube) & (s <= e.s_hi + self.tube)
        inside &= rho >= -1e-9
        far = ~inside & ((rho > self.tube) | (s < e.s_lo - self.tube) | (s > e.s_hi + self.tube))
        if np.any(~inside & ~far):
            bad = cand[~inside & ~far][0]
            raise ChartError(f"edge {self.index}: point ({x[bad]}, {Y[bad]}) lies on the outer side")
        foot_x = self.edge_point(s)[0]
        rho_out = np.where(inside, rho, np.inf)
        out.rho[cand] = rho_out
        out.psi[cand] = s
        out.h[cand] = h
        out.h_rho[cand] = hr
        out.beta[cand] = beta
        out.foot_x[cand] = foot_x
        out.in_tube[cand] = inside
        return out

    def h_model(self, rho, foot_x):
        """Jacobi factor predicted by the constant curvature of the foot's piece.

        For Gamma_1 (psi = y, not arclength) this is G itself.
        """
        prof = self.profile
        if self.edge.kind == "equator":
            return prof.arrays(np.asarray(rho, dtype=float) - self._delta)[0]
        p = prof.params
        piece = np.asarray(prof.piece_of(foot_x))
        rho = np.asarray(rho, dtype=float)
        return np.choose(piece, [np.cos(rho / p.k1), np.cosh(rho), np.cos(rho / p.k2)])


def fermi_chart(polygon: PolygonD, i: int, tube: float | None = None, profile=None) -> FermiChart:
    """Chart of edge Gamma_i with the tube radius of its fiber profile."""
    p = polygon.quadrangle.params
    if tube is None:
        tube = (math.pi / 2) * (4 * p.epsilon if i == 1 else p.mu)
    return FermiChart(polygon, i, tube, profile=profile)
