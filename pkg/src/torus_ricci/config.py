"""Run configuration: one JSON file holding every input of a pipeline run."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .curvature import GridSpec
from .orbit_space import DiskError, WeightedDisk
from .profile import MetricParams, ParameterError


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ParamsSection:
    epsilon: float = 0.1
    delta: float = 0.15
    nu: float = 0.05
    mu: float = 0.05
    mu1: float = 0.2
    r: float = 0.3
    Delta: float = 1.0
    k2_ladder: tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 60.0, 80.0)
    branch: str = "shifted"

    def metric_params(self) -> MetricParams:
        return MetricParams(
            epsilon=self.epsilon, delta=self.delta, nu=self.nu, Delta=self.Delta,
            k2=float(self.k2_ladder[0]), mu1=self.mu1, mu=self.mu, r=self.r, branch=self.branch,
        )


@dataclass(frozen=True)
class GridSection:
    nx: int = 24
    ny: int = 24
    n_rho: int = 6
    n_psi: int = 24
    n_dir: int = 16
    workers: int = 1

    def spec(self) -> GridSpec:
        return GridSpec(nx=self.nx, ny=self.ny, n_rho=self.n_rho, n_psi=self.n_psi, n_dir=self.n_dir,
                        workers=self.workers)


@dataclass(frozen=True)
class MollifySection:
    lambdas: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    sigma: float | None = None  # default 4 lambda
    beta: float | None = None  # default 2 eps + (x_end - 2 eps) / 2
    fermi_source: str = "mollified"
    certify_lambdas: tuple[float, ...] = (1e-4,)


@dataclass(frozen=True)
class Tolerances:
    gauss_bonnet: float = 1e-6
    corner: float = 1e-3


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    geometry_csv: str = "polygon_geometry.csv"
    samples_csv: str = "certification_samples.csv"
    ladder_csv: str = "mollification_ladder.csv"
    report: str = "report.txt"


@dataclass(frozen=True)
class Config:
    disk: WeightedDisk
    params: ParamsSection = ParamsSection()
    grid: GridSection = GridSection()
    mollify: MollifySection = MollifySection()
    tolerances: Tolerances = Tolerances()
    output: OutputSection = OutputSection()
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "disk": self.disk.to_dict(),
            "params": _plain(asdict(self.params)),
            "grid": asdict(self.grid),
            "mollify": _plain(asdict(self.mollify)),
            "tolerances": asdict(self.tolerances),
            "output": asdict(self.output),
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _section(cls, data, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    values = {}
    defaults = cls()
    for key, raw in data.items():
        default = getattr(defaults, key)
        loc = f"{name}.{key}"
        try:
            if isinstance(default, tuple):
                if not isinstance(raw, list) or not raw:
                    raise TypeError("expected a non-empty list")
                values[key] = tuple(float(v) for v in raw)
            elif isinstance(default, bool):
                values[key] = bool(raw)
            elif isinstance(default, int):
                if isinstance(raw, bool) or int(raw) != raw:
                    raise TypeError("expected an integer")
                values[key] = int(raw)
            elif isinstance(default, float) or (default is None and key in ("sigma", "beta")):
                values[key] = None if raw is None else float(raw)
            else:
                if not isinstance(raw, str):
                    raise TypeError("expected a string")
                values[key] = raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{loc}: {exc}") from None
        if isinstance(values[key], float) and not math.isfinite(values[key]):
            raise ConfigError(f"{loc}: must be finite")
    return replace(defaults, **values)


def from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    unknown = sorted(set(data) - {"disk", "params", "grid", "mollify", "tolerances", "output", "seed"})
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    if "disk" not in data:
        raise ConfigError("disk: missing")
    try:
        disk = WeightedDisk.from_dict(data["disk"])
    except (DiskError, TypeError, ValueError) as exc:
        raise ConfigError(f"disk: {exc}") from None
    params = _section(ParamsSection, data.get("params"), "params")
    try:
        params.metric_params().validate()
    except ParameterError as exc:
        raise ConfigError(f"params: {exc}") from None
    grid = _section(GridSection, data.get("grid"), "grid")
    if min(grid.nx, grid.ny, grid.n_rho, grid.n_psi, grid.n_dir, grid.workers) < 1:
        raise ConfigError("grid: all counts must be >= 1")
    moll = _section(MollifySection, data.get("mollify"), "mollify")
    if moll.fermi_source not in ("mollified", "piecewise"):
        raise ConfigError(f"mollify.fermi_source: unknown value {moll.fermi_source!r}")
    for lam in moll.lambdas + moll.certify_lambdas:
        if not 0 < lam < params.epsilon / 4:
            raise ConfigError(f"mollify.lambdas: {lam} is outside (0, eps/4)")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    return Config(
        disk=disk, params=params, grid=grid, mollify=moll,
        tolerances=_section(Tolerances, data.get("tolerances"), "tolerances"),
        output=_section(OutputSection, data.get("output"), "output"), seed=seed,
    )


def loads(text: str) -> Config:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def load(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def default_config(m: int = 5, n: int = 3) -> Config:
    """Defaults with the m=5, n=3 disk used throughout the tests."""
    weights = {
        (5, 3): ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1)),
        (4, 3): ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0)),
    }
    if (m, n) in weights:
        disk = WeightedDisk(n=n, weights=weights[(m, n)])
    else:
        disk = WeightedDisk(n=m, weights=tuple(tuple(int(i == j) for j in range(m)) for i in range(m)))
    return Config(disk=disk)
