"""Monte Carlo ensembles, common-noise refinement runs and convergence tables."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (
    YoungHistogram,
    cesaro_increments,
    cesaro_mean,
    empirical_young_measure,
    energy_inequality_report,
    lp_error_fields,
    observed_rates,
    transfer,
)
from .errors import IncompatibleTimeGrids, MissingReference, NonNestedMeshes, SefvError, TooFewSamples
from .mesh import Mesh, project
from .noise import NoiseModel, build_noise, standard_normals
from .persist import RunResult, persist, read_field_file
from .physics import EosParams, State, global_lambda
from .problems import SineWave
from .scheme import SchemeConfig, Trajectory, init_from_functions, run

log = logging.getLogger(__name__)

NORMS = ("L1_rho", "L1_m", "Lgamma_rho", "Lq_m")


def check_levels(levels) -> tuple:
    levels = tuple(int(n) for n in levels)
    if not levels:
        raise NonNestedMeshes("need at least one mesh level")
    for coarse, fine in zip(levels, levels[1:]):
        ratio = fine // coarse
        if fine <= coarse or fine % coarse or ratio & (ratio - 1):
            raise NonNestedMeshes(f"levels must be dyadic refinements, got {coarse} then {fine}")
    return levels


@dataclass
class EnsembleSpec:
    n_paths: int = 1
    master_seed: int = 0
    levels: tuple = (64,)
    dim: int = 1
    edge_length: float = 1.0
    eos: EosParams = field(default_factory=EosParams)
    noise: NoiseModel = field(default_factory=build_noise)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    problem: SineWave = field(default_factory=SineWave)
    n_outputs: int = 10
    probes: tuple = ()
    output_dir: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.n_outputs < 1:
            raise ValueError("n_outputs must be at least 1")
        self.levels = check_levels(self.levels)
        if self.noise.dim != self.dim or self.problem.dim != self.dim:
            raise ValueError("noise, problem and spec dimensions differ")

    def mesh(self, n: int) -> Mesh:
        return Mesh(self.dim, n, self.edge_length)

    @property
    def output_times(self) -> np.ndarray:
        return np.linspace(0.0, self.scheme.t_end, self.n_outputs + 1)

    def initial_state(self, mesh: Mesh) -> State:
        return init_from_functions(self.problem.rho0, self.problem.u0, mesh, self.eos)


def worker_count(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    env = os.environ.get("SEFV_THREADS")
    if env:
        n = min(n, max(1, int(env)))
    return max(1, n)


# ---------------------------------------------------------------- ensembles


@dataclass
class EnsembleResult:
    n_cells: int
    times: np.ndarray
    trajectories: list
    aborted: list
    mean_rho: np.ndarray | None
    var_rho: np.ndarray | None
    mean_m: np.ndarray | None
    var_m: np.ndarray | None
    energy: dict
    young: list

    @property
    def n_paths(self) -> int:
        return len(self.trajectories)

    @property
    def completed(self) -> list:
        return [i for i in range(self.n_paths) if i not in set(self.aborted)]

    @property
    def degraded(self) -> bool:
        return len(self.aborted) > 0.1 * self.n_paths


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else math.nan
    return float(x.mean()), se


def energy_statistics(trajectories) -> dict:
    """Per-path energy-ledger summaries and their ensemble means.

    ``balance`` is E(T) - E(0) - sum of Ito corrections; its mean should not
    exceed a few standard errors above zero.
    """
    final, ito, corr, slack = [], [], [], []
    for tr in trajectories:
        rep = energy_inequality_report(tr.ledger)
        final.append(tr.ledger.column("energy")[-1] if len(tr.ledger) else tr.ledger.energy0)
        ito.append(rep.ito_cumulative[-1] if len(tr.ledger) else 0.0)
        corr.append(rep.correction_cumulative[-1] if len(tr.ledger) else 0.0)
        slack.append(rep.min_slack)
    final, ito, corr = (np.asarray(v) for v in (final, ito, corr))
    e0 = np.array([tr.ledger.energy0 for tr in trajectories])
    out = {
        "energy0": e0,
        "final_energy": final,
        "ito_cumulative": ito,
        "correction_cumulative": corr,
        "min_slack": np.asarray(slack),
    }
    for name in ("final_energy", "ito_cumulative", "correction_cumulative"):
        out[name + "_mean"], out[name + "_se"] = _mean_se(out[name])
    out["balance_mean"], out["balance_se"] = _mean_se(final - e0 - corr)
    return out


def _run_path(spec: EnsembleSpec, mesh: Mesh, init: State, path: int) -> Trajectory:
    return run(init, spec.noise, mesh, spec.eos, spec.scheme, spec.output_times, (spec.master_seed, path))


def run_ensemble(spec: EnsembleSpec, level: int | None = None) -> EnsembleResult:
    """Run ``spec.n_paths`` independent paths on one mesh level (finest by default).

    Path i uses lineage (master_seed, i). Aborted paths are listed and left
    out of the statistics. Results are merged in path order, so aggregates
    do not depend on the number of workers.
    """
    n = spec.levels[-1] if level is None else int(level)
    mesh = spec.mesh(n)
    init = spec.initial_state(mesh)
    workers = min(worker_count(spec.workers), spec.n_paths)
    if workers == 1:
        trajs = [_run_path(spec, mesh, init, i) for i in range(spec.n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(lambda i: _run_path(spec, mesh, init, i), range(spec.n_paths)))
    aborted = [i for i, tr in enumerate(trajs) if not tr.completed]
    good = [tr for tr in trajs if tr.completed]
    if len(aborted) > 0.1 * spec.n_paths:
        log.warning("ensemble degraded: %d of %d paths aborted", len(aborted), spec.n_paths)

    mean_rho = var_rho = mean_m = var_m = None
    young: list[YoungHistogram | None] = []
    times = np.asarray(trajs[0].times if not good else good[0].times)
    if good:
        rho = np.stack([np.stack([s.rho for s in tr.states]) for tr in good])
        m = np.stack([np.stack([s.m for s in tr.states]) for tr in good])
        ddof = 1 if len(good) > 1 else 0
        mean_rho, var_rho = rho.mean(axis=0), rho.var(axis=0, ddof=ddof)
        mean_m, var_m = m.mean(axis=0), m.var(axis=0, ddof=ddof)
        for t, cell in spec.probes:
            i = int(np.argmin(np.abs(times - t)))
            cell = tuple(int(c) for c in np.atleast_1d(cell))
            samples = np.column_stack([rho[(slice(None), i) + cell]] + [m[(slice(None), i, j) + cell] for j in range(mesh.dim)])
            try:
                young.append(empirical_young_measure(samples, float(times[i]), cell))
            except TooFewSamples:
                young.append(None)

    result = EnsembleResult(
        n, times, trajs, aborted, mean_rho, var_rho, mean_m, var_m, energy_statistics(good) if good else {}, young
    )
    if spec.output_dir:
        meta = {"master_seed": spec.master_seed, "n_paths": spec.n_paths, "cells_per_axis": n, "aborted": aborted}
        persist(RunResult({f"path_{i:05d}": tr for i, tr in enumerate(trajs)}, meta), spec.output_dir)
    return result


# ---------------------------------------------------------------- common-noise coupling


@dataclass
class CoupledRun:
    levels: tuple
    meshes: list
    trajectories: list
    dt_fine: float
    fine_increments: np.ndarray
    level_increments: list

    def final_fields(self, which: str = "rho") -> list:
        return [(mesh, getattr(tr.final, which)) for mesh, tr in zip(self.meshes, self.trajectories)]


def coupled_time_grid(spec: EnsembleSpec, lambda_safety: float = 1.25) -> float:
    """Fine step such that the coarsest step divides every output interval.

    The coarse step is CFL-limited with a safety margin on the initial wave
    speed and capped by ``noise_dt_cap``; each level l then steps with
    dt_fine * n_finest / n_l, so all levels run at the same CFL number.
    """
    levels = spec.levels
    cfg = spec.scheme
    coarse = spec.mesh(levels[0])
    init = spec.initial_state(spec.mesh(levels[-1]))
    lam = lambda_safety * cfg.lambda_multiplier * global_lambda(init.rho, init.m, spec.eos)
    dt_c = min(cfg.cfl * coarse.h / (coarse.dim * lam), cfg.noise_dt_cap)
    interval = cfg.t_end / spec.n_outputs
    sub = max(1, math.ceil(interval / dt_c - 1e-9))
    return interval / sub / (levels[-1] // levels[0])


def coupled_refinement_run(spec: EnsembleSpec, path: int = 0, dt_fine: float | None = None) -> CoupledRun:
    """Run every mesh level on one Wiener path.

    Increments are drawn once per fine step, from lineage (seed, path, j), and
    level l consumes the sums of consecutive blocks of n_finest / n_l of them.
    """
    levels = check_levels(spec.levels)
    cfg = spec.scheme
    ratio = levels[-1] // levels[0]
    if dt_fine is None:
        dt_fine = coupled_time_grid(spec)
    dt_c = dt_fine * ratio
    interval = cfg.t_end / spec.n_outputs
    per_output = interval / dt_c
    if cfg.t_end > 0 and abs(per_output - round(per_output)) > 1e-9 * max(per_output, 1.0):
        raise IncompatibleTimeGrids(f"coarse step {dt_c} does not divide the output interval {interval}")
    n_fine = int(round(cfg.t_end / dt_fine)) if cfg.t_end > 0 else 0
    K = spec.noise.k_modes
    sq = np.sqrt(dt_fine)
    fine = np.array([sq * standard_normals((spec.master_seed, path, j), K) for j in range(n_fine)]).reshape(n_fine, K)

    meshes, trajs, per_level = [], [], []
    for n in reversed(levels):
        r = levels[-1] // n
        incr = fine.reshape(n_fine // r, r, K).sum(axis=1)
        mesh = spec.mesh(n)
        init = spec.initial_state(mesh)
        if cfg.t_end > 0:
            tr = run(
                init,
                spec.noise,
                mesh,
                spec.eos,
                cfg,
                spec.output_times,
                (spec.master_seed, path),
                fixed_dt=dt_fine * r,
                increment_source=lambda step, dt, incr=incr: incr[step],
            )
        else:
            tr = run(init, spec.noise, mesh, spec.eos, cfg, None, (spec.master_seed, path))
        if tr.info.get("max_cfl", 0.0) > 1.0:
            log.warning("level %d exceeded the stability limit (CFL %.3f)", n, tr.info["max_cfl"])
        meshes.append(mesh)
        trajs.append(tr)
        per_level.append(incr)
    return CoupledRun(levels, meshes[::-1], trajs[::-1], dt_fine, fine, per_level[::-1])


@dataclass
class CesaroStudy:
    coupled: CoupledRun
    target: Mesh
    increments: np.ndarray
    mean: np.ndarray


def cesaro_study(spec: EnsembleSpec, path: int = 0, which: str = "rho") -> CesaroStudy:
    """Cesaro means of the final fields, coarse to fine, on the finest mesh."""
    coupled = coupled_refinement_run(spec, path)
    fields = coupled.final_fields(which)
    target = coupled.meshes[-1]
    return CesaroStudy(coupled, target, cesaro_increments(fields, target), cesaro_mean(fields, target))


# ---------------------------------------------------------------- convergence tables


@dataclass
class ConvergenceTable:
    levels: tuple
    h: np.ndarray
    mean: dict
    se: dict
    n_paths: int
    reference: str

    @property
    def rates(self) -> dict:
        return {k: observed_rates(self.h, v) for k, v in self.mean.items()}

    def to_csv(self) -> str:
        head = ["cells_per_axis", "h"] + [f"{k}_{s}" for k in NORMS for s in ("mean", "se")]
        head += [f"rate_{k}" for k in NORMS]
        rates = self.rates
        lines = [",".join(head)]
        for i, n in enumerate(self.levels):
            row = [str(n), repr(float(self.h[i]))]
            for k in NORMS:
                row += [repr(float(self.mean[k][i])), repr(float(self.se[k][i]))]
            row += [repr(float(rates[k][i - 1])) if i > 0 else "" for k in NORMS]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def state_errors(state: State, ref: State, mesh: Mesh, eos: EosParams) -> dict:
    """L^1 errors plus L^gamma (density) and L^{2 gamma/(gamma+1)} (momentum)."""
    e1_rho, e1_m = lp_error_fields(state, ref.rho, ref.m, mesh, 1.0)
    eg_rho, eq_m = lp_error_fields(state, ref.rho, ref.m, mesh, eos.gamma, 2.0 * eos.gamma / (eos.gamma + 1.0))
    return {"L1_rho": e1_rho, "L1_m": e1_m, "Lgamma_rho": eg_rho, "Lq_m": eq_m}


def error_table(samples, meshes, eos: EosParams, reference: str = "") -> ConvergenceTable:
    """Tabulate ``samples[path][level] = (state, ref_state)`` as mean and standard error."""
    levels = tuple(m.cells_per_axis for m in meshes)
    errs = {k: np.array([[state_errors(s, r, mesh, eos)[k] for (s, r), mesh in zip(row, meshes)] for row in samples]) for k in NORMS}
    n = len(samples)
    mean = {k: v.mean(axis=0) for k, v in errs.items()}
    se = {k: (v.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(len(levels), np.nan)) for k, v in errs.items()}
    return ConvergenceTable(levels, np.array([m.h for m in meshes]), mean, se, n, reference)


def _resolve_external(path, spec: EnsembleSpec, mesh: Mesh) -> State:
    try:
        ref, ref_mesh, _, t = read_field_file(path, spec.edge_length)
    except (SefvError, OSError) as exc:
        raise MissingReference(f"cannot read reference {path}: {exc}") from exc
    if ref_mesh.dim != mesh.dim or ref_mesh.cells_per_axis % mesh.cells_per_axis:
        raise MissingReference(f"reference with {ref_mesh.cells_per_axis} cells cannot be restricted to {mesh.cells_per_axis}")
    if not np.isclose(t, spec.scheme.t_end):
        log.warning("reference time %g differs from t_end %g", t, spec.scheme.t_end)
    return State(transfer(ref.rho, ref_mesh, mesh), transfer(ref.m, ref_mesh, mesh))


def convergence_study(spec: EnsembleSpec, reference="manufactured", n_paths: int | None = None) -> ConvergenceTable:
    """Errors at t_end against a reference, per level.

    ``reference`` is ``"manufactured"`` (forced sine wave, deterministic runs
    only), ``"finest"`` (the finest level of a common-noise coupled run; the
    table then lists the other levels) or a path to a field file.
    """
    meshes = [spec.mesh(n) for n in spec.levels]
    t_end = spec.scheme.t_end
    if reference == "manufactured":
        if spec.noise.k_modes:
            raise MissingReference("the manufactured reference is exact only without noise (K = 0)")
        prob = spec.problem
        source = prob.momentum_source(spec.eos)
        row = []
        for mesh in meshes:
            tr = run(spec.initial_state(mesh), spec.noise, mesh, spec.eos, spec.scheme, None, (spec.master_seed, 0), source=source)
            if not tr.completed:
                raise SefvError(f"level {mesh.cells_per_axis} aborted: {tr.abort_reason}")
            ref = State(project(prob.exact_rho(t_end), mesh), project(prob.exact_m(t_end), mesh).reshape(tr.final.m.shape))
            row.append((tr.final, ref))
        return error_table([row], meshes, spec.eos, "manufactured")

    paths = range(n_paths if n_paths is not None else (spec.n_paths if spec.noise.k_modes else 1))
    samples = []
    for p in paths:
        coupled = coupled_refinement_run(spec, p)
        if any(not tr.completed for tr in coupled.trajectories):
            log.warning("path %d aborted on some level; left out of the table", p)
            continue
        finals = [tr.final for tr in coupled.trajectories]
        if reference == "finest":
            if len(meshes) < 2:
                raise MissingReference("the finest-level reference needs at least two levels")
            fine_mesh, fine = meshes[-1], finals[-1]
            refs = [State(transfer(fine.rho, fine_mesh, m), transfer(fine.m, fine_mesh, m)) for m in meshes[:-1]]
            samples.append(list(zip(finals[:-1], refs)))
        elif isinstance(reference, (str, Path)):
            if not Path(reference).exists():
                raise MissingReference(f"reference file {reference} not found")
            samples.append([(s, _resolve_external(reference, spec, m)) for s, m in zip(finals, meshes)])
        else:
            raise MissingReference(f"unknown reference {reference!r}")
    if not samples:
        raise SefvError("every path aborted")
    used = meshes[:-1] if reference == "finest" else meshes
    return error_table(samples, used, spec.eos, str(reference))
