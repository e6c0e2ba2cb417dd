"""Command line entry point: ``torus-ricci {validate,build,certify,mollify-report} CONFIG``.

Exit codes: 0 pass, 1 usage or configuration error, 2 Gauss-Bonnet target
infeasible, 3 positivity failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

from . import lattice
from .config import Config, ConfigError, load
from .curvature import certify
from .metric_total import build_total_metric
from .mollify import convergence_report, default_beta, ladder_csv, smooth_pipeline
from .orbit_space import (
    DiskError,
    IsotropyMismatch,
    check_free_action,
    induced_isotropy,
    is_simply_connected,
    small_case,
    subtorus_lattice,
    validate_disk,
)
from .profile import build_profile, continuity_report
from .quadrangle import assemble_polygon, solve_gauss_bonnet

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_POSITIVITY = 0, 1, 2, 3

STAGES = ("disk validation", "lattice", "profile", "gauss-bonnet", "certification", "mollified certification")


@dataclass
class Stage:
    name: str
    status: str  # pass | fail | stop
    detail: str = ""


@dataclass
class RunReport:
    command: str
    stages: list[Stage] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    seed: int = 0

    def add(self, name: str, status: str, detail: str = "", seconds: float | None = None) -> Stage:
        st = Stage(name, status, detail)
        self.stages.append(st)
        if seconds is not None:
            self.timings[name] = seconds
        return st

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK

    def to_text(self, timings: bool = False) -> str:
        """Structured text; timings are left out unless asked for so reruns compare equal."""
        lines = [f"command: {self.command}", f"seed: {self.seed}", f"exit_code: {self.exit_code}"]
        for st in self.stages:
            lines.append(f"[{st.name}] {st.status}")
            lines += ["  " + s for s in st.detail.splitlines() if s]
            if timings and st.name in self.timings:
                lines.append(f"  seconds: {self.timings[st.name]:.3f}")
        if self.files:
            lines.append("files:")
            lines += [f"  {f}" for f in self.files]
        return "\n".join(lines) + "\n"


def _write(cfg: Config, report: RunReport, name: str, text: str) -> None:
    os.makedirs(cfg.output.directory, exist_ok=True)
    path = os.path.join(cfg.output.directory, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    report.files.append(name)


def _timed(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t


# ------------------------------------------------------------ stages


def _stage_validate(cfg: Config, rep: RunReport) -> bool:
    """Disk and lattice stages; False stops the pipeline."""
    d = cfg.disk
    t = time.perf_counter()
    v = validate_disk(d)
    lines = [f"n={d.n} m={d.m} weights={[list(w) for w in d.weights]}"]
    for p in v.pairs:
        lines.append(f"vertex {p.index}: primitive={p.primitive} legal={p.legal} {p.reason}".rstrip())
    lines += [f"problem: {s}" for s in v.problems]
    sc = is_simply_connected(d)
    lines.append(f"simply_connected={sc}")
    if not v.ok or not sc:
        rep.add("disk validation", "fail", "\n".join(lines), time.perf_counter() - t)
        rep.exit_code = EXIT_CONFIG
        return False
    free = check_free_action(d)
    lines.append(f"free_action={free}")
    try:
        for i in range(1, d.m + 1):
            induced_isotropy(d, "edge", i)
            induced_isotropy(d, "vertex", i)
        lines.append("isotropy reconstruction: all edges and vertices match")
        iso_ok = True
    except IsotropyMismatch as exc:
        lines.append(f"isotropy reconstruction: {exc}")
        iso_ok = False
    ok = free and iso_ok
    rep.add("disk validation", "pass" if ok else "fail", "\n".join(lines), time.perf_counter() - t)
    if not ok:
        rep.exit_code = EXIT_CONFIG
        return False
    if d.m <= 4:
        sc_res = small_case(d.m, d.n)
        rep.add("lattice", "stop", f"small case (m, n) = ({d.m}, {d.n}): {sc_res.model_name}\n"
                f"{sc_res.action_description}\npipeline stops here")
        return False
    t = time.perf_counter()
    kl = subtorus_lattice(d)
    basis = kl.integer_kernel_basis
    snf = lattice.smith_normal_form([list(r) for r in zip(*d.weights)])
    rep.add("lattice", "pass", f"invariant_factors={list(snf.invariant_factors)}\nkernel_basis={[list(b) for b in basis]}",
            time.perf_counter() - t)
    return True


def _stage_build(cfg: Config, rep: RunReport):
    """Profile and Gauss-Bonnet stages; returns the solver result or None."""
    base = cfg.params.metric_params()
    t = time.perf_counter()
    prof = build_profile(base)
    cont = continuity_report(prof)
    rep.add("profile", "pass", f"branch={base.branch} k1={prof.params.k1:.15g} x0(k2={base.k2:g})={prof.params.x0:.15g}\n"
            f"jump at eps: value={cont.value_jump_eps:.3g} derivative={cont.deriv_jump_eps:.3g}",
            time.perf_counter() - t)
    gb, sec = _timed(solve_gauss_bonnet, base, k2_ladder=cfg.params.k2_ladder)
    if not gb.feasible:
        rep.add("gauss-bonnet", "fail", gb.report, sec)
        rep.exit_code = EXIT_INFEASIBLE
        return None
    q = gb.quadrangle
    err = abs(gb.attempts[-1].total + math.pi / 2)
    corners = gb.attempts[-1].corners
    ok = err < cfg.tolerances.gauss_bonnet and all(abs(c - math.pi / 4) < cfg.tolerances.corner for c in corners)
    rep.add("gauss-bonnet", "pass" if ok else "fail",
            gb.report + f"\n|total + pi/2|={err:.3g}\nr={q.r:.15g} Delta={q.Delta:.15g}", sec)
    if not ok:
        rep.exit_code = EXIT_INFEASIBLE
        return None
    return gb


def cmd_validate(cfg: Config) -> RunReport:
    rep = RunReport("validate", seed=cfg.seed)
    _stage_validate(cfg, rep)
    _write(cfg, rep, cfg.output.report, rep.to_text())
    return rep


def cmd_build(cfg: Config) -> RunReport:
    rep = RunReport("build", seed=cfg.seed)
    if cfg.disk.m < 5:
        rep.add("disk validation", "fail", f"m={cfg.disk.m} < 5: run 'validate' for the small-case models")
        rep.exit_code = EXIT_CONFIG
        return rep
    if _stage_validate(cfg, rep):
        gb = _stage_build(cfg, rep)
        if gb is not None:
            poly = assemble_polygon(gb.quadrangle, cfg.disk.m)
            _write(cfg, rep, cfg.output.geometry_csv, poly.geometry_csv())
    _write(cfg, rep, cfg.output.report, rep.to_text())
    return rep


def _piecewise_certification(cfg: Config, rep: RunReport, gb, basis):
    poly = assemble_polygon(gb.quadrangle, cfg.disk.m)
    _write(cfg, rep, cfg.output.geometry_csv, poly.geometry_csv())
    tm = build_total_metric(poly)
    cr, sec = _timed(certify, tm, basis, cfg.grid.spec())
    rep.add("certification", "pass" if cr.passed else "fail", cr.to_text(), sec)
    _write(cfg, rep, cfg.output.samples_csv, cr.samples_csv())
    return cr


def cmd_certify(cfg: Config) -> RunReport:
    rep = RunReport("certify", seed=cfg.seed)
    if cfg.disk.m < 5:
        rep.add("disk validation", "fail", f"m={cfg.disk.m} < 5: run 'validate' for the small-case models")
        rep.exit_code = EXIT_CONFIG
        return rep
    if _stage_validate(cfg, rep):
        gb = _stage_build(cfg, rep)
        if gb is not None:
            basis = subtorus_lattice(cfg.disk).integer_kernel_basis
            cr = _piecewise_certification(cfg, rep, gb, basis)
            if not cr.passed:
                rep.exit_code = EXIT_POSITIVITY
            rows, all_pass, details = [], True, []
            t = time.perf_counter()
            for lam in cfg.mollify.certify_lambdas:
                sr = smooth_pipeline(
                    cfg.params.metric_params(), basis, cfg.disk.m, lam, gb, sigma=cfg.mollify.sigma,
                    beta=cfg.mollify.beta, grid=cfg.grid.spec(), fermi_source=cfg.mollify.fermi_source,
                )
                all_pass &= sr.passed
                details.append(sr.to_text())
                if sr.certification is not None:
                    rel = abs(sr.min_bound - min(cr.min_ric_X, cr.min_ric_U))
                    rel /= max(abs(min(cr.min_ric_X, cr.min_ric_U)), 1e-300)
                    details.append(f"  relative change of the min bound vs piecewise: {rel:.3g}")
                rows.append((lam, sr.sup_dist, sr.bad_measure, sr.min_bound))
            rep.add("mollified certification", "pass" if all_pass else "fail", "\n".join(details),
                    time.perf_counter() - t)
            _write(cfg, rep, cfg.output.ladder_csv, ladder_csv(rows))
            if not all_pass:
                rep.exit_code = EXIT_POSITIVITY
    _write(cfg, rep, cfg.output.report, rep.to_text())
    return rep


def cmd_mollify_report(cfg: Config) -> RunReport:
    """Convergence of G_lam over the ladder plus a smoothed certification per lambda."""
    rep = RunReport("mollify-report", seed=cfg.seed)
    if cfg.disk.m < 5:
        rep.add("disk validation", "fail", f"m={cfg.disk.m} < 5: run 'validate' for the small-case models")
        rep.exit_code = EXIT_CONFIG
        return rep
    if _stage_validate(cfg, rep):
        gb = _stage_build(cfg, rep)
        if gb is not None:
            prof = gb.profile
            beta = cfg.mollify.beta if cfg.mollify.beta is not None else default_beta(prof)
            conv, sec = _timed(convergence_report, prof, cfg.mollify.lambdas, prof.x_start, beta)
            lines = [f"interval=[{prof.x_start:.12g}, {beta:.12g}]"]
            for lam, d, b in zip(conv.lambdas, conv.sup_dist, conv.bad_measure):
                lines.append(f"lambda={lam:g} sup|G_lam - G|={d:.6g} bad_set_measure={b:.6g} (bound {4 * lam:g})")
            lines.append(f"monotone={conv.monotone} strictly_decreasing={conv.strictly_decreasing}")
            rep.add("profile", "pass" if conv.strictly_decreasing else "fail", "\n".join(lines), sec)
            basis = subtorus_lattice(cfg.disk).integer_kernel_basis
            rows, all_pass, details = [], True, []
            t = time.perf_counter()
            for lam in cfg.mollify.lambdas:
                sr = smooth_pipeline(
                    cfg.params.metric_params(), basis, cfg.disk.m, lam, gb, sigma=cfg.mollify.sigma,
                    beta=beta, grid=cfg.grid.spec(), fermi_source=cfg.mollify.fermi_source,
                )
                all_pass &= sr.passed
                details.append(sr.to_text())
                rows.append((lam, sr.sup_dist, sr.bad_measure, sr.min_bound))
            rep.add("mollified certification", "pass" if all_pass else "fail", "\n".join(details),
                    time.perf_counter() - t)
            _write(cfg, rep, cfg.output.ladder_csv, ladder_csv(rows))
            if not all_pass:
                rep.exit_code = EXIT_POSITIVITY
    _write(cfg, rep, cfg.output.report, rep.to_text())
    return rep


COMMANDS = {
    "validate": cmd_validate,
    "build": cmd_build,
    "certify": cmd_certify,
    "mollify-report": cmd_mollify_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="torus-ricci", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="JSON configuration file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load(args.config)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = COMMANDS[args.command](cfg)
    except (DiskError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(rep.to_text(timings=True))
    return rep.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
