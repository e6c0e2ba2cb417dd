"""Brute-force reference implementations shared by the test modules."""

import math
from fractions import Fraction
from itertools import product

import numpy as np

from torus_ricci.orbit_space import WeightedDisk, is_simply_connected, validate_disk


def stabilizer_witness(d: WeightedDisk, max_den: int = 12):
    """A nonzero t in (Q/Z)^m fixing some vertex and mapped to 0 in T^n, or None.

    For a simply connected disk the kernel of T^m -> T^n is the subtorus, and
    the T^m isotropy at vertex i is the coordinate 2-torus of slots i, i+1, so
    the subtorus acts freely iff no such t exists. Denominators up to
    ``max_den`` cover every finite stabilizer for entries |a| <= 2 and detect
    continuous ones through their rational points.
    """
    m = d.m
    fr = sorted({Fraction(k, den) for den in range(1, max_den + 1) for k in range(den)})
    L = math.lcm(*range(1, max_den + 1))
    num = np.array([int(f * L) for f in fr], dtype=np.int64)
    s_num, t_num = np.meshgrid(num, num, indexing="ij")
    nonzero = (s_num != 0) | (t_num != 0)
    for i in range(m):
        j = (i + 1) % m
        a, b = d.weights[i], d.weights[j]
        # s a + t b in Z^n  <=>  every component of (L s) a + (L t) b is divisible by L
        ok = nonzero.copy()
        for x, y in zip(a, b):
            ok &= (s_num * x + t_num * y) % L == 0
        if ok.any():
            k, l = np.argwhere(ok)[0]
            return i + 1, (fr[k], fr[l])
    return None


def _canonical(weights):
    """Representative under per-weight sign flips, rotations and reflection."""
    def norm(w):
        for v in w:
            if v:
                return w if v > 0 else tuple(-x for x in w)
        return w

    ws = [norm(tuple(w)) for w in weights]
    m = len(ws)
    cands = []
    for seq in (ws, ws[::-1]):
        for r in range(m):
            cands.append(tuple(seq[r:] + seq[:r]))
    return min(cands)


def enumerate_disks(max_n=3, max_m=5, bound=2, cap=10_000, seed=0):
    """Canonical disks with 2 <= n <= max_n, n <= m <= max_m, entries in [-bound, bound].

    Small (n, m) classes are exhaustive; larger ones are sampled with a fixed
    seed so the total stays below ``cap``.
    """
    rng = np.random.default_rng(seed)
    out, seen = [], set()
    classes = [(n, m) for n in range(2, max_n + 1) for m in range(n, max_m + 1)]
    share = cap // len(classes)
    for n, m in classes:
        vecs = [v for v in product(range(-bound, bound + 1), repeat=n) if any(v)]
        vecs = sorted({_canonical([v])[0] for v in vecs})
        total = len(vecs) ** m
        picked = 0
        if total <= share:
            it = product(vecs, repeat=m)
        else:
            it = (tuple(vecs[k] for k in rng.integers(0, len(vecs), m)) for _ in range(share * 4))
        for ws in it:
            c = _canonical(ws)
            if c in seen:
                continue
            seen.add(c)
            out.append(WeightedDisk(n, c))
            picked += 1
            if picked >= share:
                break
    return out


def random_valid_disks(count, seed=1, max_n=3, max_m=6, bound=2):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, max_n + 1))
        m = int(rng.integers(n, max_m + 1))
        ws = [tuple(int(x) for x in rng.integers(-bound, bound + 1, n)) for _ in range(m)]
        if any(not any(w) for w in ws):
            continue
        d = WeightedDisk(n, ws)
        if validate_disk(d).ok and is_simply_connected(d):
            out.append(d)
    return out


def oracle_points(tm, count, seed=0, rho_range=(0.15, 0.9)):
    """Points inside edge tubes (rho in the given fraction of the tube) accepted by the FD oracle."""
    from torus_ricci.curvature import OracleError, _check_oracle_point

    rng = np.random.default_rng(seed)
    D = tm.polygon
    pts = []
    k = 0
    while len(pts) < count:
        fp = tm.fibers[k % tm.m]
        k += 1
        e = fp.chart.edge
        s = rng.uniform(e.s_lo, e.s_hi)
        r = rng.uniform(*rho_range) * fp.chart.tube
        x, y, *_ = fp.chart.normal_flow(np.array([s]), np.array([r]))
        x, y = float(x[0]), float(y[0])
        if not D.contains(x, y, margin=1e-3):
            continue
        try:
            _check_oracle_point(tm, x, y, 1e-4)
        except OracleError:
            continue
        pts.append((x, y))
    return pts
