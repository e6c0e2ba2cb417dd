"""Weighted orbit disks of cohomogeneity-two torus actions and the N_m model.

A :class:`WeightedDisk` is the cyclic list of edge weights ``a_1..a_m`` in
``Z^n``. Edge ``i`` carries ``a_i``; vertex ``i`` sits between edges ``i`` and
``i+1`` (indices mod ``m``). Indices in the public API are 1-based to match
the edge labels Gamma_1..Gamma_m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal, Sequence

from . import lattice
from .lattice import IntMatrix, IntVector, KernelLattice, LatticeError


class DiskError(ValueError):
    """Invalid orbit data."""


class IsotropyMismatch(RuntimeError):
    """Reconstructed isotropy disagrees with the declared weights."""


@dataclass(frozen=True)
class WeightedDisk:
    n: int
    weights: tuple[IntVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(tuple(int(v) for v in w) for w in self.weights))
        if any(len(w) != self.n for w in self.weights):
            raise DiskError(f"every weight must have {self.n} components")

    @property
    def m(self) -> int:
        return len(self.weights)

    def weight(self, i: int) -> IntVector:
        """Weight of edge ``i`` (1-based, cyclic)."""
        return self.weights[(i - 1) % self.m]

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "weights": [list(w) for w in self.weights]}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightedDisk":
        try:
            n, weights = int(data["n"]), data["weights"]
        except KeyError as exc:
            raise DiskError(f"disk is missing key {exc.args[0]!r}") from None
        if "m" in data and int(data["m"]) != len(weights):
            raise DiskError(f"m={data['m']} but {len(weights)} weights given")
        for idx, w in enumerate(weights, start=1):
            if not isinstance(w, (list, tuple)) or len(w) != n:
                raise DiskError(f"weights[{idx}] must be a list of {n} integers")
        return cls(n=n, weights=tuple(tuple(w) for w in weights))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "WeightedDisk":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PairVerdict:
    index: int  # vertex i, between edges i and i+1
    primitive: tuple[bool, bool]
    legal: bool
    reason: str = ""


@dataclass(frozen=True)
class ValidationReport:
    n: int
    m: int
    pairs: tuple[PairVerdict, ...]
    problems: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.problems and all(p.legal and all(p.primitive) for p in self.pairs)


def _primitive(w: Sequence[int]) -> bool:
    return any(w) and lattice.is_primitive(w)


def validate_disk(d: WeightedDisk) -> ValidationReport:
    problems = []
    if d.n < 2:
        problems.append(f"torus rank n={d.n} < 2")
    if d.m < d.n:
        problems.append(f"edge count m={d.m} < n={d.n}")
    pairs = []
    for i in range(1, d.m + 1):
        a, b = d.weight(i), d.weight(i + 1)
        prim = (_primitive(a), _primitive(b))
        legal, reason = False, ""
        if not all(prim):
            reason = "non-primitive weight"
        else:
            g = lattice.minor_gcd(a, b)
            if g == 0:
                reason = "dependent adjacent weights"
            elif g != 1:
                reason = f"adjacent circles intersect in a group of order {g}"
            else:
                legal = True
        pairs.append(PairVerdict(index=i, primitive=prim, legal=legal, reason=reason))
    for i in range(1, d.m + 1):
        if not _primitive(d.weight(i)):
            problems.append(f"weight {i} {d.weight(i)} is not primitive")
    for p in pairs:
        if all(p.primitive) and not p.legal:
            problems.append(f"vertex {p.index}: {p.reason}")
    return ValidationReport(n=d.n, m=d.m, pairs=tuple(pairs), problems=tuple(problems))


def weight_matrix(d: WeightedDisk) -> IntMatrix:
    """n x m matrix whose i-th column is a_i."""
    return lattice.transpose(d.weights)


def is_simply_connected(d: WeightedDisk) -> bool:
    """True iff the weights generate Z^n."""
    snf = lattice.smith_normal_form(weight_matrix(d))
    return len(snf.invariant_factors) == d.n and all(f == 1 for f in snf.invariant_factors)


def nm_disk(m: int) -> WeightedDisk:
    """Orbit data of N_m: standard basis weights e_1..e_m in Z^m."""
    if m < 2:
        raise DiskError("N_m needs m >= 2")
    return WeightedDisk(n=m, weights=lattice.identity(m))


def subtorus_lattice(d: WeightedDisk) -> KernelLattice:
    """Kernel lattice of the weight matrix; rank m - n."""
    if not is_simply_connected(d):
        raise DiskError("weight matrix is not onto Z^n (see is_simply_connected)")
    return lattice.integer_kernel(weight_matrix(d))


def check_free_action(d: WeightedDisk) -> bool:
    """Freeness of the T^(m-n) action: primitivity plus adjacent legality."""
    if not is_simply_connected(d):
        raise DiskError("weight matrix is not onto Z^n (see is_simply_connected)")
    for i in range(1, d.m + 1):
        a, b = d.weight(i), d.weight(i + 1)
        if not (_primitive(a) and _primitive(b)):
            return False
        if lattice.minor_gcd(a, b) != 1:
            return False
    return True


@dataclass(frozen=True)
class IsotropyDescriptor:
    kind: Literal["principal", "edge", "vertex"]
    index: int
    generators: tuple[IntVector, ...]


def induced_isotropy(
    d: WeightedDisk, kind: Literal["principal", "edge", "vertex"], i: int = 0
) -> IsotropyDescriptor:
    """Isotropy of the T^n action on N_m / T^(m-n) at an edge or vertex.

    The collapsed coordinate circles over the location are pushed through the
    weight matrix, each pushed generator is checked to have the coordinate
    vector as a preimage up to the kernel, and the saturated lattice they
    generate is compared with the declared weights.
    """
    if kind == "principal":
        return IsotropyDescriptor(kind="principal", index=0, generators=())
    A = weight_matrix(d)
    if not is_simply_connected(d):
        raise DiskError("weight matrix is not onto Z^n (see is_simply_connected)")
    edges = [i] if kind == "edge" else [i, i + 1]
    computed = []
    for e in edges:
        j = (e - 1) % d.m
        coord = [int(k == j) for k in range(d.m)]
        image = lattice.matvec(A, coord)
        w = lattice.solve_preimage(A, image)
        diff = [wi - ci for wi, ci in zip(w, coord)]
        if any(lattice.matvec(A, diff)):
            raise IsotropyMismatch(f"preimage of edge {e} generator leaves the kernel coset")
        computed.append(image)
    declared = [d.weight(e) for e in edges]
    if lattice.saturate(computed) != lattice.saturate(declared) or len(
        lattice.hermite_rows(computed)
    ) != len(edges):
        raise IsotropyMismatch(f"{kind} {i}: computed {computed} vs declared {declared}")
    for c, w in zip(computed, declared):
        if lattice.hermite_rows([c]) != lattice.hermite_rows([w]):
            raise IsotropyMismatch(f"{kind} {i}: circle {c} does not match weight {w}")
    return IsotropyDescriptor(kind=kind, index=i, generators=tuple(tuple(c) for c in computed))


@dataclass(frozen=True)
class SmallCaseResult:
    model_name: str
    action_description: str


_SMALL_CASES = {
    (2, 2): SmallCaseResult("S^4", "linear T^2 action on S^4; round metric"),
    (3, 3): SmallCaseResult("S^5", "linear T^3 action on S^5; round metric"),
    (4, 4): SmallCaseResult(
        "S^3 x S^3", "T^4 action on S^3 x S^3 with the product of round metrics"
    ),
    (4, 3): SmallCaseResult(
        "S^2 x S^3 or S^2 x~ S^3",
        "N_4 / T^1 with N_4 = S^3 x S^3; submersion metric from the product of round metrics",
    ),
}


def small_case(m: int, n: int) -> SmallCaseResult:
    """Known models for 2 <= n <= m <= 4."""
    if m >= 5:
        raise DiskError(f"m={m} >= 5: use the general construction pipeline")
    if not 2 <= n <= m:
        raise DiskError(f"no model for (m, n) = ({m}, {n}); need 2 <= n <= m")
    try:
        return _SMALL_CASES[(m, n)]
    except KeyError:
        raise DiskError(f"(m, n) = ({m}, {n}) has no recorded small-case model") from None


__all__ = [
    "DiskError",
    "IsotropyDescriptor",
    "IsotropyMismatch",
    "LatticeError",
    "SmallCaseResult",
    "ValidationReport",
    "WeightedDisk",
    "check_free_action",
    "induced_isotropy",
    "is_simply_connected",
    "nm_disk",
    "small_case",
    "subtorus_lattice",
    "validate_disk",
    "weight_matrix",
]
