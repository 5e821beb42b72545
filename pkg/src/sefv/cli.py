"""``sefv`` command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure (including
loss of positivity), 3 verification failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import parse_config, parse_overrides
from .diagnostics import cesaro_mean, energy_inequality_report
from .ensemble import NORMS, cesaro_study, convergence_study, run_ensemble
from .errors import ChecksumMismatch, IoFailure, ParseError, SefvError, ValidationError, VersionMismatch
from .persist import RunResult, persist, write_field_file
from .physics import State
from .scheme import init_from_functions, run
from .verify import format_table, run_all

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3, 4

SUBCOMMANDS = ("run", "ensemble", "converge", "cesaro", "verify")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sefv",
        description="Finite-volume solver for the stochastic barotropic Euler equations.",
        epilog="Any config field can be overridden with --section.key=value, e.g. --scheme.cfl=0.3.",
    )
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("-c", "--config", help="TOML configuration file (defaults are used when omitted)")
    p.add_argument("--seed", type=int, help="master seed for all random draws (overrides ensemble.seed)")
    p.add_argument("-o", "--out", help="output directory (overrides outputs.directory)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _summary(key: str, value) -> None:
    print(f"{key}={value}")


def _fmt(x: float) -> str:
    return f"{x:.6e}"


def cmd_run(cfg, out: Path) -> int:
    mesh, eos, scheme = cfg.mesh, cfg.eos, cfg.scheme
    prob = cfg.problem
    init = init_from_functions(prob.rho0, prob.u0, mesh, eos)
    times = np.linspace(0.0, scheme.t_end, cfg["outputs"]["n_outputs"] + 1)
    tr = run(init, cfg.noise, mesh, eos, scheme, times, (cfg.seed, 0))
    persist(RunResult({"run": tr}, {"seed": cfg.seed}), out)
    mass = tr.total_mass()
    _summary("STATUS", tr.status)
    _summary("STEPS", tr.info["n_steps"])
    _summary("MASS_DRIFT", _fmt(float(np.max(np.abs(mass - mass[0]) / mass[0]))))
    if len(tr.ledger):
        _summary("ENERGY_SLACK_MIN", _fmt(energy_inequality_report(tr.ledger).min_slack))
    _summary("MIN_RHO", _fmt(tr.info["min_rho"]))
    if not tr.completed:
        print(f"run aborted at t={tr.abort_time:.6g}: {tr.abort_reason}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_ensemble(cfg, out: Path) -> int:
    spec = cfg.ensemble_spec()
    spec.output_dir = str(out)
    res = run_ensemble(spec, level=cfg["mesh"]["cells"])
    _summary("PATHS", res.n_paths)
    _summary("ABORTED", len(res.aborted))
    _summary("DEGRADED", int(res.degraded))
    if res.energy:
        _summary("ENERGY_SLACK_MIN", _fmt(float(res.energy["min_slack"].min())))
        _summary("ENERGY_BALANCE_MEAN", _fmt(res.energy["balance_mean"]))
        _summary("MIN_RHO", _fmt(min(res.trajectories[i].info["min_rho"] for i in res.completed)))
    for y in res.young:
        if y is not None:
            print(f"YOUNG t={y.t:.6g} cell={y.cell} samples={y.n_samples} occupied_bins={y.occupied_bins} mean={np.array2string(y.mean, precision=6)}")
    if res.aborted:
        print(f"aborted paths: {res.aborted}", file=sys.stderr)
    return EXIT_RUNTIME if res.degraded else EXIT_OK


def cmd_converge(cfg, out: Path) -> int:
    spec = cfg.ensemble_spec()
    table = convergence_study(spec, cfg["ensemble"]["reference"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.csv").write_text(table.to_csv())
    print(f"{'cells':>6} {'h':>10} " + " ".join(f"{k:>12}" for k in NORMS))
    for i, n in enumerate(table.levels):
        print(f"{n:>6} {table.h[i]:>10.4e} " + " ".join(f"{table.mean[k][i]:>12.4e}" for k in NORMS))
    rates = table.rates["L1_rho"]
    _summary("RATE_L1_RHO", ",".join(f"{r:.4f}" for r in rates) if rates.size else "none")
    return EXIT_OK


def cmd_cesaro(cfg, out: Path) -> int:
    spec = cfg.ensemble_spec()
    study = cesaro_study(spec, 0)
    coupled = study.coupled
    labelled = {f"level_{m.cells_per_axis}": tr for m, tr in zip(coupled.meshes, coupled.trajectories)}
    persist(RunResult(labelled, {"seed": spec.master_seed}), out)
    mean = State(study.mean, cesaro_mean(coupled.final_fields("m"), study.target))
    write_field_file(out / "cesaro_mean.sefv", mean, study.target, spec.eos, spec.scheme.t_end)
    lines = ["n_levels,l1_increment"] + [f"{i + 2},{v!r}" for i, v in enumerate(study.increments)]
    (out / "cesaro.csv").write_text("\n".join(lines) + "\n")
    _summary("CESARO_INCREMENTS", ",".join(_fmt(v) for v in study.increments) if study.increments.size else "none")
    return EXIT_OK


def cmd_verify(cfg, out: Path) -> int:
    results = run_all(cfg.seed)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    _summary("VERIFY", "pass" if not failed else "fail")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "ensemble": cmd_ensemble, "converge": cmd_converge, "cesaro": cmd_cesaro, "verify": cmd_verify}


def main(argv=None) -> int:
    args, extra = build_parser().parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = parse_overrides(extra)
        if args.seed is not None:
            overrides.setdefault("ensemble", {})["seed"] = args.seed
        if args.out is not None:
            overrides.setdefault("outputs", {})["directory"] = args.out
        cfg = parse_config(args.config, overrides)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["outputs"]["directory"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        _summary("CONFIG", cfg.echo(out))
        return COMMANDS[args.command](cfg, out)
    except (IoFailure, VersionMismatch, ChecksumMismatch, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SefvError, ValueError, FloatingPointError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
