"""Scaled-down property suites run by ``sefv verify``."""

from __future__ import annotations

import hashlib
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import (
    consistency_residuals,
    energy_inequality_report,
    forward_euler_production,
    loglog_fit,
    relative_energy,
)
from .ensemble import EnsembleSpec, cesaro_study, convergence_study, run_ensemble
from .mesh import Mesh
from .noise import build_noise
from .persist import persist
from .physics import EosParams, State, phys_flux
from .problems import SineWave
from .scheme import SchemeConfig, entropy_production, init_from_functions, lf_flux, run


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_states(rng, n, dim, rho_range=(0.1, 5.0), u_max=3.0) -> State:
    rho = rng.uniform(*rho_range, size=n)
    u = rng.uniform(-u_max, u_max, size=(dim, n))
    return State(rho, rho * u)


def bounded_jump_field(rng, mesh: Mesh, jump: float = 0.5) -> State:
    """Piecewise smooth field: a random smooth background plus a few jumps of bounded size."""
    x = mesh.centers
    rho = 1.0 + 0.3 * rng.uniform(-1, 1) * np.sin(2 * np.pi * x[0] + rng.uniform(0, 2 * np.pi))
    rho = rho + jump * rng.uniform(0, 1) * (x[0] > rng.uniform(0.2, 0.8))
    m = rng.uniform(-1, 1, size=(mesh.dim,) + mesh.shape) * rho
    m = m + jump * rng.uniform(-1, 1) * (x[-1] > rng.uniform(0.2, 0.8))
    return State(rho, m)


def suite_mass(seed: int = 0) -> SuiteResult:
    worst = 0.0
    steps = []
    for dim, n, t_end in ((1, 64, 4.0), (2, 16, 8.0)):
        mesh = Mesh(dim, n)
        prob = SineWave(dim, velocity=(0.5,) + (0.25,) * (dim - 1))
        init = init_from_functions(prob.rho0, prob.u0, mesh)
        tr = run(init, build_noise(4, 0.1, dim=dim), mesh, EosParams(), SchemeConfig(t_end=t_end), None, (seed, 0))
        mass = tr.total_mass()
        worst = max(worst, float(np.max(np.abs(mass - mass[0]) / mass[0])))
        steps.append(tr.info["n_steps"])
    ok = worst <= 1e-12 and min(steps) >= 1000
    return SuiteResult("mass conservation", ok, f"max relative drift {worst:.2e} over {steps} steps")


def suite_flux_consistency(seed: int = 0, n: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    eos = EosParams()
    worst = 0.0
    for dim in (1, 2, 3):
        s = random_states(rng, n, dim)
        U = s.stacked()
        for p in range(dim):
            F = lf_flux(U, U, 2.0, p, eos)
            f = phys_flux(s.rho, s.m, p, eos)
            worst = max(worst, float(np.max(np.abs(F - f) / np.maximum(1.0, np.abs(f)))))
    return SuiteResult("flux consistency F(a,a)=f(a)", worst <= 1e-13, f"max relative defect {worst:.2e}")


def suite_entropy_stability(seed: int = 0, n_fields: int = 1000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    eos = EosParams()
    cfg = SchemeConfig()
    worst = -np.inf
    offender = None
    for i in range(n_fields):
        mesh = Mesh(1, 32) if i % 2 == 0 else Mesh(2, 8)
        state = bounded_jump_field(rng, mesh)
        prod, scale = entropy_production(state, mesh, eos, cfg)
        ratio = prod / max(scale, 1e-300)
        if ratio > worst:
            worst, offender = ratio, (i, mesh.dim, prod, scale)
    ok = worst <= 1e-10
    return SuiteResult("semi-discrete entropy stability", ok, f"max normalised production {worst:.3e} (field {offender[0]})")


def suite_energy_decay() -> SuiteResult:
    mesh = Mesh(1, 128)
    prob = SineWave()
    init = init_from_functions(prob.rho0, prob.u0, mesh)
    quiet = build_noise(0)
    prods = []
    ok = True
    for cfl in (0.4, 0.2):
        tr = run(init, quiet, mesh, EosParams(), SchemeConfig(cfl=cfl, t_end=0.5))
        e = np.concatenate([[tr.ledger.energy0], tr.ledger.column("energy")])
        allowance = 10 * tr.ledger.column("dt").max() * tr.ledger.energy0
        ok &= bool(np.all(np.diff(e) <= 0) or (e.max() - e[0]) <= allowance)
        ok &= energy_inequality_report(tr.ledger).min_slack >= -allowance
        prods.append(float(forward_euler_production(tr.ledger).sum()))
    ratio = prods[0] / prods[1]
    ok &= 2 / 1.5 <= ratio <= 2 * 1.5
    return SuiteResult("deterministic energy decay", bool(ok), f"production {prods[0]:.3e} -> {prods[1]:.3e} (ratio {ratio:.2f})")


def suite_pathwise_energy(seed: int = 0, n_paths: int = 200, t_end: float = 0.5) -> SuiteResult:
    spec = EnsembleSpec(n_paths=n_paths, master_seed=seed, levels=(64,), noise=build_noise(4, 0.1), scheme=SchemeConfig(t_end=t_end), n_outputs=1)
    res = run_ensemble(spec)
    worst = np.inf
    for tr in (res.trajectories[i] for i in res.completed):
        rep = energy_inequality_report(tr.ledger)
        worst = min(worst, rep.min_slack / rep.tolerance)
    ito = res.energy["ito_cumulative"]
    z = abs(ito.mean()) / (ito.std(ddof=1) / np.sqrt(ito.size))
    ok = worst >= -1.0 and z <= 4.0 and not res.aborted
    return SuiteResult(
        "pathwise energy inequality",
        ok,
        f"{len(res.completed)} paths, min slack/allowance {worst:.3f}, martingale mean at {z:.2f} SE",
    )


def residual_slopes(levels=(32, 64, 128, 256), t_end: float = 0.25, n_out: int = 50) -> dict:
    """Log-log slope and R^2 of |R1|, |R2|, |N1|, |N2| against h for each trig test function."""
    prob = SineWave()
    table: dict = {}
    hs = []
    for n in levels:
        mesh = Mesh(1, n)
        init = init_from_functions(prob.rho0, prob.u0, mesh)
        tr = run(init, build_noise(0), mesh, EosParams(), SchemeConfig(t_end=t_end), np.linspace(0, t_end, n_out + 1))
        hs.append(mesh.h)
        for name, res in consistency_residuals(tr).items():
            for key in ("R1", "R2", "N1", "N2"):
                table.setdefault((name, key), []).append(float(np.max(np.abs(res[key]))))
    return {k: loglog_fit(hs, v) for k, v in table.items()}


def suite_consistency_rate() -> SuiteResult:
    fits = residual_slopes()
    bad = {k: v for k, v in fits.items() if not (v[0] >= 1.0 and v[1] >= 0.98)}
    lo = min(v[0] for v in fits.values())
    r2 = min(v[1] for v in fits.values())
    detail = f"min slope {lo:.2f}, min R^2 {r2:.4f}" + (f"; failing {sorted(bad)}" if bad else "")
    return SuiteResult("consistency residual rate", not bad, detail)


def suite_relative_energy(seed: int = 0, n_pairs: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(seed)
    mesh = Mesh(1, 4)
    hand = relative_energy(State(np.full(4, 2.0), np.zeros((1, 4))), np.ones(4), np.zeros((1, 4)), mesh, EosParams(2.0, 1.0))
    same = random_states(rng, 4, 1)
    zero = relative_energy(same, same.rho, same.m / same.rho, mesh, EosParams())
    single = Mesh(1, 2)
    worst = np.inf
    for _ in range(n_pairs // 100):
        a = random_states(rng, 200, 1)
        b = random_states(rng, 200, 1)
        for j in range(0, 200, 2):
            s = State(a.rho[j : j + 2], a.m[:, j : j + 2])
            worst = min(worst, relative_energy(s, b.rho[j : j + 2], b.m[:, j : j + 2] / b.rho[j : j + 2], single, EosParams()))
    ok = abs(hand - 1.0) <= 1e-12 and abs(zero) <= 1e-12 and worst > 0
    return SuiteResult("relative energy", ok, f"hand case {hand:.15f}, self {zero:.1e}, min over random pairs {worst:.2e}")


def suite_strong_convergence() -> SuiteResult:
    spec = EnsembleSpec(levels=(32, 64, 128, 256), noise=build_noise(0), scheme=SchemeConfig(t_end=0.25), n_outputs=1)
    tab = convergence_study(spec, "manufactured")
    e = tab.mean["L1_rho"]
    ok = bool(np.all(np.diff(e) < 0))
    return SuiteResult("strong convergence surrogate", ok, "L1 density errors " + ", ".join(f"{v:.2e}" for v in e))


def suite_cesaro(seed: int = 0, levels=(16, 32, 64, 128)) -> SuiteResult:
    spec = EnsembleSpec(levels=levels, master_seed=seed, noise=build_noise(4, 0.05), scheme=SchemeConfig(t_end=0.25), n_outputs=1)
    inc = cesaro_study(spec).increments
    ok = bool(np.all(np.diff(inc) <= 0))
    return SuiteResult("Cesaro stabilisation", ok, "increments " + ", ".join(f"{v:.2e}" for v in inc))


def suite_reproducibility(seed: int = 0) -> SuiteResult:
    mesh = Mesh(1, 32)
    prob = SineWave()
    init = init_from_functions(prob.rho0, prob.u0, mesh)
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for rep in range(2):
            tr = run(init, build_noise(4), mesh, EosParams(), SchemeConfig(t_end=0.2), np.linspace(0, 0.2, 5), (seed, 0))
            root = persist(tr, Path(tmp) / str(rep)).parent
            files = sorted(p for p in root.rglob("*") if p.is_file() and p.name != "manifest.txt")
            digests.append([(p.relative_to(root).as_posix(), hashlib.sha256(p.read_bytes()).hexdigest()) for p in files])
    ok = digests[0] == digests[1]
    return SuiteResult("bit-identical reruns", ok, f"{len(digests[0])} files compared")


SUITES = (
    suite_mass,
    suite_flux_consistency,
    suite_entropy_stability,
    suite_energy_decay,
    suite_pathwise_energy,
    suite_consistency_rate,
    suite_relative_energy,
    suite_strong_convergence,
    suite_cesaro,
    suite_reproducibility,
)


def run_all(seed: int = 0) -> list[SuiteResult]:
    results = []
    for suite in SUITES:
        t0 = time.perf_counter()
        try:
            res = suite(seed) if "seed" in suite.__code__.co_varnames[: suite.__code__.co_argcount] else suite()
        except Exception as exc:  # a crashing suite is a failed suite
            res = SuiteResult(suite.__name__.removeprefix("suite_"), False, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'pass' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
