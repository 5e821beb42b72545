"""Computable counterparts of the stability and convergence analysis.

Energy inequality slack, consistency residuals against smooth test
functions, relative energy (Bregman distance) to a reference state, Cesaro
means over nested meshes, empirical Young measures and L^p errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyLedger, NonNestedMeshes, TooFewSamples, VacuumState
from .ledger import LEDGER_COLUMNS, EnergyLedger
from .mesh import Mesh, central_diff, discrete_laplacian, project
from .physics import RHO_FLOOR, EosParams, State, global_lambda, pressure, pressure_potential, pressure_potential_derivative

__all__ = [
    "EnergyLedger",
    "LEDGER_COLUMNS",
    "EnergyReport",
    "energy_inequality_report",
    "forward_euler_production",
    "production_constant",
    "TestFunction",
    "trig_test_functions",
    "residual_integrands",
    "consistency_residuals",
    "relative_energy",
    "relative_energy_parts",
    "relative_energy_expanded",
    "transfer",
    "cesaro_mean",
    "cesaro_increments",
    "YoungHistogram",
    "empirical_young_measure",
    "lp_error",
    "lp_error_fields",
    "observed_rates",
    "loglog_fit",
]


# ---------------------------------------------------------------- energy


@dataclass
class EnergyReport:
    times: np.ndarray
    slack: np.ndarray
    ito_cumulative: np.ndarray
    correction_cumulative: np.ndarray
    tolerance: float

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    @property
    def violated(self) -> bool:
        return self.min_slack < -self.tolerance


def energy_inequality_report(ledger: EnergyLedger, tol_factor: float = 10.0) -> EnergyReport:
    """slack(t) = E(0) + sum dN + sum correction - E(t) at every step boundary.

    The flag threshold is ``tol_factor * dt_max * E(0)``, the allowance for
    the O(dt) energy production of forward Euler.
    """
    if len(ledger) == 0:
        raise EmptyLedger("ledger has no steps")
    a = ledger.as_array()
    col = {c: a[:, j] for j, c in enumerate(LEDGER_COLUMNS)}
    ito = np.concatenate([[0.0], np.cumsum(col["ito_increment"])])
    corr = np.concatenate([[0.0], np.cumsum(col["ito_correction"])])
    energy = np.concatenate([[ledger.energy0], col["energy"]])
    slack = ledger.energy0 + ito + corr - energy
    times = np.concatenate([[0.0], col["t"]])
    tol = tol_factor * float(col["dt"].max()) * ledger.energy0
    return EnergyReport(times, slack, ito, corr, tol)


def forward_euler_production(ledger: EnergyLedger) -> np.ndarray:
    """Per-step E(t + dt) - E(t) - dt h^d sum eta' . drift.

    For a deterministic run this is the energy created by the time
    discretisation alone; it is non-negative by convexity of eta.
    """
    if len(ledger) == 0:
        raise EmptyLedger("ledger has no steps")
    e = np.concatenate([[ledger.energy0], ledger.column("energy")])
    return np.diff(e) - ledger.column("entropy_rate")


def production_constant(ledger: EnergyLedger) -> float:
    """Smallest C with E(t + dt) - E(t) <= C dt^2 for every step of the run."""
    e = np.concatenate([[ledger.energy0], ledger.column("energy")])
    return float(max(0.0, np.max(np.diff(e) / ledger.column("dt") ** 2)))


# ---------------------------------------------------------------- consistency


@dataclass(frozen=True)
class TestFunction:
    """Smooth periodic scalar function with exact gradient and Laplacian."""

    name: str
    value: Callable
    grad: Callable
    laplacian: Callable

    __test__ = False  # not a pytest class


def trig_test_functions(dim: int = 1, edge_length: float = 1.0, wavenumbers=(1,)) -> list[TestFunction]:
    """cos and sin of 2 pi k x_p / l for every axis, plus the full cosine product when d > 1."""
    out = []
    for k in wavenumbers:
        w = 2.0 * np.pi * k / edge_length
        for p in range(dim):

            def grad_cos(x, p=p, w=w):
                g = np.zeros_like(x)
                g[p] = -w * np.sin(w * x[p])
                return g

            def grad_sin(x, p=p, w=w):
                g = np.zeros_like(x)
                g[p] = w * np.cos(w * x[p])
                return g

            out.append(
                TestFunction(
                    f"cos{k}_x{p + 1}",
                    lambda x, p=p, w=w: np.cos(w * x[p]),
                    grad_cos,
                    lambda x, p=p, w=w: -w * w * np.cos(w * x[p]),
                )
            )
            out.append(
                TestFunction(
                    f"sin{k}_x{p + 1}",
                    lambda x, p=p, w=w: np.sin(w * x[p]),
                    grad_sin,
                    lambda x, p=p, w=w: -w * w * np.sin(w * x[p]),
                )
            )
        if dim > 1:

            def prod_value(x, w=w):
                return np.prod(np.cos(w * x), axis=0)

            def prod_grad(x, w=w):
                c = np.cos(w * x)
                g = np.empty_like(x)
                for p in range(x.shape[0]):
                    others = np.prod(np.delete(c, p, axis=0), axis=0)
                    g[p] = -w * np.sin(w * x[p]) * others
                return g

            out.append(
                TestFunction(
                    f"cos{k}_prod",
                    prod_value,
                    prod_grad,
                    lambda x, w=w: -x.shape[0] * w * w * np.prod(np.cos(w * x), axis=0),
                )
            )
    return out


# Gauss points per axis for test-function averages; keeps quadrature error
# near rounding so the residuals measure the stencils alone.
TEST_FUNCTION_POINTS = 8


def _stencil_defects(phi: TestFunction, mesh: Mesh):
    """Cell integrals of (d_s phi - central difference) and (Lap phi - discrete Laplacian)."""
    d = mesh.dim
    vol = mesh.cell_volume
    q = TEST_FUNCTION_POINTS
    avg = project(phi.value, mesh, q)
    grad_avg = project(phi.grad, mesh, q).reshape((d,) + mesh.shape)
    first = np.stack([vol * (grad_avg[s] - central_diff(avg, mesh, s)) for s in range(d)])
    second = vol * (project(phi.laplacian, mesh, q) - discrete_laplacian(avg, mesh))
    return first, second


def residual_integrands(state: State, mesh: Mesh, eos: EosParams, tests: Sequence[TestFunction], lam: float, defects=None) -> dict:
    """Instantaneous integrands of R1, R2, N1, N2 for every test function.

    For the vector residuals the test field is phi e_z, z = 1..d, so R2 and
    N2 are length-d arrays. N1 and N2 carry the lambda h prefactor.
    """
    d = mesh.dim
    rho, m = state.rho, state.m
    T = m[:, None] * m[None, :] / rho
    T[np.arange(d), np.arange(d)] += pressure(rho, eos)
    out = {}
    for i, phi in enumerate(tests):
        first, second = defects[i] if defects is not None else _stencil_defects(phi, mesh)
        out[phi.name] = {
            "R1": float(np.sum(m * first)),
            "R2": np.array([np.sum(T[:, z] * first) for z in range(d)]),
            "N1": lam * mesh.h * float(np.sum(rho * second)),
            "N2": lam * mesh.h * np.array([np.sum(m[z] * second) for z in range(d)]),
        }
    return out


def consistency_residuals(trajectory, tests: Sequence[TestFunction] | None = None, lambda_multiplier: float = 1.0) -> dict:
    """Time integrals (trapezoidal over snapshots) of the residual integrands.

    The diffusion coefficient at each snapshot is the global wave speed of
    that snapshot times ``lambda_multiplier``.
    """
    mesh, eos = trajectory.mesh, trajectory.eos
    if tests is None:
        tests = trig_test_functions(mesh.dim, mesh.edge_length)
    defects = [_stencil_defects(phi, mesh) for phi in tests]
    times = np.asarray(trajectory.times, dtype=float)
    per_time = []
    for s in trajectory.states:
        lam = lambda_multiplier * global_lambda(s.rho, s.m, eos)
        per_time.append(residual_integrands(s, mesh, eos, tests, lam, defects))
    out = {}
    for phi in tests:
        out[phi.name] = {}
        for key in ("R1", "R2", "N1", "N2"):
            series = np.array([pt[phi.name][key] for pt in per_time])
            if len(times) < 2:
                out[phi.name][key] = np.zeros_like(series[0]) if series.ndim > 1 else 0.0
            else:
                w = np.diff(times)
                val = np.tensordot(0.5 * w, series[1:] + series[:-1], axes=(0, 0))
                out[phi.name][key] = float(val) if np.ndim(val) == 0 else val
    return out


# ---------------------------------------------------------------- relative energy


def relative_energy_parts(state: State, ref_rho, ref_Q, mesh: Mesh, eos: EosParams, rho_floor: float = RHO_FLOOR):
    """(kinetic, internal) parts of the relative energy, each integrated over the torus."""
    rho, m = state.rho, state.m
    s = np.asarray(ref_rho, dtype=float)
    Q = np.asarray(ref_Q, dtype=float).reshape(m.shape)
    if np.any(rho <= rho_floor) or np.any(s <= rho_floor):
        raise VacuumState("relative energy needs densities above the floor")
    du = m / rho - Q
    kinetic = 0.5 * rho * np.sum(du * du, axis=0)
    internal = pressure_potential(rho, eos) - pressure_potential_derivative(s, eos) * (rho - s) - pressure_potential(s, eos)
    return float(mesh.integrate(kinetic)), float(mesh.integrate(internal))


def relative_energy(state: State, ref_rho, ref_Q, mesh: Mesh, eos: EosParams, D: float = 0.0) -> float:
    """int 1/2 rho |u - Q|^2 + P(rho) - P'(s)(rho - s) - P(s) dx + D."""
    kin, internal = relative_energy_parts(state, ref_rho, ref_Q, mesh, eos)
    return kin + internal + D


def relative_energy_expanded(state: State, ref_rho, ref_Q, mesh: Mesh, eos: EosParams, D: float = 0.0) -> float:
    """Same functional written term by term for a Dirac state.

    int eta(U) - m.Q + 1/2 rho |Q|^2 - rho P'(s) + (P'(s) s - P(s)) dx + D
    """
    rho, m = state.rho, state.m
    s = np.asarray(ref_rho, dtype=float)
    Q = np.asarray(ref_Q, dtype=float).reshape(m.shape)
    dP = pressure_potential_derivative(s, eos)
    terms = (
        0.5 * np.sum(m * m, axis=0) / rho + pressure_potential(rho, eos),
        -np.sum(m * Q, axis=0),
        0.5 * rho * np.sum(Q * Q, axis=0),
        -rho * dP,
        dP * s - pressure_potential(s, eos),
    )
    return float(sum(mesh.integrate(t) for t in terms)) + D


# ---------------------------------------------------------------- Cesaro means


def transfer(values: np.ndarray, source: Mesh, target: Mesh) -> np.ndarray:
    """Move a cell field between nested meshes.

    Refinement copies each coarse value into its children (piecewise-constant
    injection); coarsening averages the children.
    """
    if source.dim != target.dim or not np.isclose(source.edge_length, target.edge_length):
        raise NonNestedMeshes("meshes must share dimension and domain")
    d = source.dim
    values = np.asarray(values, dtype=float)
    lead = values.shape[: values.ndim - d]
    ns, nt = source.cells_per_axis, target.cells_per_axis
    if ns == nt:
        return values.copy()
    if nt % ns == 0:
        r = nt // ns
        out = values
        for ax in range(values.ndim - d, values.ndim):
            out = np.repeat(out, r, axis=ax)
        return out
    if ns % nt == 0:
        r = ns // nt
        shape = lead + sum(((nt, r) for _ in range(d)), ())
        axes = tuple(len(lead) + 2 * i + 1 for i in range(d))
        return values.reshape(shape).mean(axis=axes)
    raise NonNestedMeshes(f"{ns} and {nt} cells per axis are not nested")


def cesaro_mean(fields: Sequence[tuple[Mesh, np.ndarray]], target: Mesh) -> np.ndarray:
    """(1/N) sum of the fields after transferring each one to ``target``."""
    if not fields:
        raise ValueError("need at least one field")
    acc = None
    for mesh, values in fields:
        v = transfer(values, mesh, target)
        acc = v if acc is None else acc + v
    return acc / len(fields)


def cesaro_increments(fields: Sequence[tuple[Mesh, np.ndarray]], target: Mesh) -> np.ndarray:
    """||C_N - C_{N-1}||_1 on ``target`` for N = 2..len(fields).

    Vector fields use the Euclidean norm of the component axis pointwise.
    """
    out = []
    prev = None
    for n in range(1, len(fields) + 1):
        c = cesaro_mean(fields[:n], target)
        if prev is not None:
            diff = c - prev
            if diff.ndim > target.dim:
                diff = np.sqrt(np.sum(diff * diff, axis=tuple(range(diff.ndim - target.dim))))
            out.append(float(target.integrate(np.abs(diff))))
        prev = c
    return np.array(out)


# ---------------------------------------------------------------- Young measures


@dataclass
class YoungHistogram:
    t: float | None
    cell: tuple | None
    edges: list
    counts: np.ndarray
    n_samples: int
    mean: np.ndarray
    second_moment: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return self.second_moment - np.outer(self.mean, self.mean)

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def occupied_bins(self) -> int:
        return int(np.count_nonzero(self.counts))


def empirical_young_measure(samples, t=None, cell=None, bins="fd") -> YoungHistogram:
    """Joint histogram of the sampled (rho, m) values at one (t, cell) probe.

    ``samples`` is ``(N, 1 + d)``. Bin edges per component follow the
    Freedman-Diaconis rule by default; moments are those of the samples.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 samples, got {x.shape[0]}")
    edges = [np.histogram_bin_edges(x[:, j], bins=bins) for j in range(x.shape[1])]
    counts, _ = np.histogramdd(x, bins=edges)
    mean = x.mean(axis=0)
    second = x.T @ x / x.shape[0]
    return YoungHistogram(t, cell, edges, counts, x.shape[0], mean, second)


# ---------------------------------------------------------------- errors and rates


def lp_error_fields(state: State, ref_rho, ref_m, mesh: Mesh, p: float = 1.0, p_m: float | None = None) -> tuple[float, float]:
    """(||rho - ref_rho||_p, ||m - ref_m||_{p_m}) over the torus; |.| on momentum is Euclidean."""
    p_m = p if p_m is None else p_m
    ref_m = np.asarray(ref_m, dtype=float).reshape(state.m.shape)
    e_rho = np.abs(state.rho - ref_rho)
    dm = state.m - ref_m
    e_m = np.sqrt(np.sum(dm * dm, axis=0))
    return (
        float(mesh.integrate(e_rho**p)) ** (1.0 / p),
        float(mesh.integrate(e_m**p_m)) ** (1.0 / p_m),
    )


def lp_error(state: State, exact_rho, exact_m, mesh: Mesh, p: float = 1.0, p_m: float | None = None) -> tuple[float, float]:
    """L^p distance between the cell values and the cell averages of exact functions.

    ``exact_rho(x)`` returns a scalar field and ``exact_m(x)`` a ``(d, ...)``
    field. The natural norms are p = gamma for density and
    p_m = 2 gamma / (gamma + 1) for momentum.
    """
    ref_rho = project(exact_rho, mesh)
    ref_m = project(exact_m, mesh).reshape(state.m.shape)
    return lp_error_fields(state, ref_rho, ref_m, mesh, p, p_m)


def observed_rates(h, errors) -> np.ndarray:
    """log(e_k / e_{k+1}) / log(h_k / h_{k+1}) between consecutive levels."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape:
        raise DimensionMismatch("h and errors must have the same length")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def loglog_fit(h, errors) -> tuple[float, float]:
    """Least-squares slope of log e against log h and its coefficient of determination."""
    lx = np.log(np.asarray(h, dtype=float))
    ly = np.log(np.abs(np.asarray(errors, dtype=float)))
    slope, icpt = np.polyfit(lx, ly, 1)
    fit = slope * lx + icpt
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
