"""Lax-Friedrichs finite volume scheme with Euler-Maruyama time stepping.

Semi-discretely, every cell evolves by

    dU_K + sum_p (F_{K+e_p/2} - F_{K-e_p/2}) / h dt = [0, Psi(U_K) dW],
    F_{K|L} = (f(U_K) + f(U_L)) / 2 - lambda (U_L - U_K),

which for a spatially constant lambda is the same as

    drho + div_h m - lambda h Lap_h rho = 0,
    dm + div_h(m (x) m / rho + p I) - lambda h Lap_h m = Psi dW.

Time integration is explicit Euler-Maruyama with the noise coefficient taken
at the left end point.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IncompatibleTimeGrids, NonFinite, NonPositiveInitialDensity, PositivityLost, ValidationError
from .ledger import EnergyLedger
from .mesh import Mesh, discrete_divergence, discrete_laplacian, project, shift
from .noise import NoiseModel, psi_field, sample_increments
from .physics import EosParams, State, entropy, entropy_variables, global_lambda, max_wave_speed, phys_flux, pressure

log = logging.getLogger(__name__)

LAMBDA_MODES = ("global", "local")
POSITIVITY_POLICIES = ("abort", "floor")


@dataclass(frozen=True)
class SchemeConfig:
    lambda_mode: str = "global"
    lambda_multiplier: float = 1.0
    cfl: float = 0.4
    noise_dt_cap: float = 1e-2
    t_end: float = 1.0
    positivity_policy: str = "abort"
    rho_floor: float = 1e-12

    def __post_init__(self):
        if self.lambda_mode not in LAMBDA_MODES:
            raise ValidationError("scheme.lambda_mode", f"must be one of {LAMBDA_MODES}")
        if not self.lambda_multiplier >= 1:
            raise ValidationError("scheme.lambda_multiplier", "must be at least 1")
        if not 0 < self.cfl < 1:
            raise ValidationError("scheme.cfl", "must lie in (0, 1)")
        if not self.noise_dt_cap > 0:
            raise ValidationError("scheme.noise_dt_cap", "must be positive")
        if not self.t_end >= 0:
            raise ValidationError("scheme.t_end", "must be non-negative")
        if self.positivity_policy not in POSITIVITY_POLICIES:
            raise ValidationError("scheme.positivity_policy", f"must be one of {POSITIVITY_POLICIES}")
        if not self.rho_floor > 0:
            raise ValidationError("scheme.rho_floor", "must be positive")
        if self.cfl > 0.5:
            # the explicit update loses monotonicity of the diagonal coefficient above 1/2
            log.warning("cfl=%g exceeds 0.5; the explicit LF update may be unstable", self.cfl)


@dataclass
class Trajectory:
    mesh: Mesh
    eos: EosParams
    times: list
    states: list
    ledger: EnergyLedger
    status: str = "completed"
    abort_reason: str = ""
    abort_time: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def final(self) -> State:
        return self.states[-1]

    def total_mass(self) -> np.ndarray:
        return np.array([self.mesh.integrate(s.rho) for s in self.states])


# ---------------------------------------------------------------- fluxes


def lf_flux(UK, UL, lambda_face, p: int, eos: EosParams = EosParams()) -> np.ndarray:
    """Face flux {f(U)} - lambda [[U]] between U_K and its +e_p neighbour U_L.

    States are stacked ``[rho, m_1, ..., m_d]`` along the first axis.
    """
    UK = np.asarray(UK, dtype=float)
    UL = np.asarray(UL, dtype=float)
    fK = phys_flux(UK[0], UK[1:], p, eos)
    fL = phys_flux(UL[0], UL[1:], p, eos)
    return 0.5 * (fK + fL) - lambda_face * (UL - UK)


def face_lambdas(state: State, mesh: Mesh, eos: EosParams, config: SchemeConfig) -> list:
    """Diffusion coefficient per axis: a scalar (global) or one value per face (local)."""
    if config.lambda_mode == "global":
        lam = config.lambda_multiplier * global_lambda(state.rho, state.m, eos)
        return [lam] * mesh.dim
    out = []
    for p in range(mesh.dim):
        s = max_wave_speed(state.rho, state.m, p, eos)
        out.append(config.lambda_multiplier * np.maximum(s, shift(s, mesh, p, 1)))
    return out


def face_fluxes(state: State, mesh: Mesh, eos: EosParams, lambdas) -> list:
    """F on the +e_p face of every cell, one ``(1 + d, *shape)`` array per axis."""
    U = state.stacked()
    out = []
    for p in range(mesh.dim):
        f = phys_flux(state.rho, state.m, p, eos)
        out.append(0.5 * (f + shift(f, mesh, p, 1)) - lambdas[p] * (shift(U, mesh, p, 1) - U))
    return out


def drift_flux_form(state: State, mesh: Mesh, eos: EosParams, config: SchemeConfig, lambdas=None):
    """Cell rates from face fluxes; each face value is shared by its two cells."""
    if lambdas is None:
        lambdas = face_lambdas(state, mesh, eos, config)
    rate = np.zeros((mesh.dim + 1,) + mesh.shape)
    for p, F in enumerate(face_fluxes(state, mesh, eos, lambdas)):
        rate -= (F - shift(F, mesh, p, -1)) / mesh.h
    return rate[0], rate[1:]


def drift_explicit_form(state: State, mesh: Mesh, eos: EosParams, lam: float):
    """Rates in operator form with a constant coefficient ``lam``."""
    rho, m = state.rho, state.m
    d = mesh.dim
    tensor = m[:, None] * m[None, :] / rho
    tensor[np.arange(d), np.arange(d)] += pressure(rho, eos)
    rho_rate = -discrete_divergence(m, mesh) + lam * mesh.h * discrete_laplacian(rho, mesh)
    m_rate = -discrete_divergence(tensor, mesh) + lam * mesh.h * discrete_laplacian(m, mesh)
    return rho_rate, m_rate


def drift(state: State, mesh: Mesh, eos: EosParams, config: SchemeConfig):
    """Deterministic right-hand side (rho_rate, m_rate)."""
    return drift_flux_form(state, mesh, eos, config)


def entropy_production(state: State, mesh: Mesh, eos: EosParams, config: SchemeConfig):
    """(sum_K eta'(U_K) . drift_K, sum_K |eta'(U_K)| . |drift_K|), both times h^d."""
    rho_rate, m_rate = drift(state, mesh, eos, config)
    v = entropy_variables(state.rho, state.m, eos)
    r = np.concatenate([rho_rate[None], m_rate], axis=0)
    return float(mesh.integrate(np.sum(v * r, axis=0))), float(mesh.integrate(np.sum(np.abs(v * r), axis=0)))


# ---------------------------------------------------------------- time stepping


def cfl_dt(state: State, mesh: Mesh, eos: EosParams, config: SchemeConfig, remaining: float = np.inf) -> float:
    """min(cfl h / (d lambda), noise_dt_cap, remaining)."""
    lam = config.lambda_multiplier * global_lambda(state.rho, state.m, eos)
    return float(min(config.cfl * mesh.h / (mesh.dim * lam), config.noise_dt_cap, remaining))


def euler_maruyama_step(
    state: State,
    dt: float,
    increments,
    model: NoiseModel,
    mesh: Mesh,
    eos: EosParams,
    config: SchemeConfig,
    ledger: EnergyLedger | None = None,
    t: float = 0.0,
    source: Callable | None = None,
) -> State:
    """Advance one step of size ``dt`` with Wiener increments ``increments``.

    ``source(t, mesh) -> (rho_src, m_src)`` adds a deterministic forcing,
    used for manufactured solutions. When ``ledger`` is given, one row is
    appended.
    """
    dw = getattr(increments, "dw", increments)
    dw = np.asarray(dw, dtype=float)
    lambdas = face_lambdas(state, mesh, eos, config)
    rho_rate, m_rate = drift_flux_form(state, mesh, eos, config, lambdas)

    rho_new = state.rho + dt * rho_rate
    m_new = state.m + dt * m_rate
    if source is not None:
        rho_src, m_src = source(t, mesh)
        rho_new = rho_new + dt * rho_src
        m_new = m_new + dt * m_src

    u = state.m / state.rho
    dN = corr = 0.0
    if model.k_modes:
        psi = psi_field(model, mesh.centers, state)
        m_new = m_new + np.tensordot(dw, psi, axes=(0, 0))
        vol = mesh.cell_volume
        dN = float(np.dot(vol * np.sum(psi * u, axis=tuple(range(1, psi.ndim))), dw))
        corr = float(dt * vol * np.sum(0.5 * np.sum(psi * psi, axis=(0, 1)) / state.rho))

    t_new = t + dt
    if not (np.all(np.isfinite(rho_new)) and np.all(np.isfinite(m_new))):
        raise NonFinite(t_new)
    min_rho = float(rho_new.min())
    if min_rho <= config.rho_floor:
        if config.positivity_policy == "abort":
            raise PositivityLost(t_new, min_rho)
        bad = rho_new <= config.rho_floor
        warnings.warn(f"density floored in {int(bad.sum())} cells at t={t_new:.6g}; mass is no longer conserved", RuntimeWarning, stacklevel=2)
        rho_new = np.where(bad, config.rho_floor, rho_new)
        m_new = np.where(bad, 0.0, m_new)
        min_rho = float(rho_new.min())

    new = State(rho_new, m_new)
    if ledger is not None:
        v = entropy_variables(state.rho, state.m, eos)
        ent_rate = dt * mesh.cell_volume * float(np.sum(v[0] * rho_rate) + np.sum(v[1:] * m_rate))
        lam = max(float(np.max(x)) for x in lambdas)
        ledger.append(
            t=t_new,
            dt=dt,
            energy=float(mesh.integrate(entropy(rho_new, m_new, eos))),
            ito_increment=dN,
            ito_correction=corr,
            entropy_rate=ent_rate,
            sup_u=float(np.sqrt(np.max(np.sum(u * u, axis=0)))),
            min_rho=min_rho,
            lam=lam,
        )
    return new


def _output_grid(output_times, t_end):
    requested = [] if output_times is None else [float(t) for t in np.ravel(output_times)]
    ts = sorted({0.0, float(t_end), *(t for t in requested if 0.0 <= t <= t_end)})
    tol = 1e-12 * max(float(t_end), 1.0)
    out = [ts[0]]
    for t in ts[1:]:
        if t - out[-1] > tol:
            out.append(t)
        else:
            out[-1] = max(out[-1], t)
    return out


def run(
    init: State,
    model: NoiseModel,
    mesh: Mesh,
    eos: EosParams,
    config: SchemeConfig,
    output_times=None,
    lineage=(0, 0),
    *,
    fixed_dt: float | None = None,
    increment_source: Callable | None = None,
    source: Callable | None = None,
) -> Trajectory:
    """Integrate from ``init`` to ``config.t_end``.

    ``lineage = (master_seed, path)``; step j of the path draws its increments
    from ``(master_seed, path, j)``. With ``fixed_dt`` every step has that
    size and every output time must be a multiple of it; otherwise dt follows
    :func:`cfl_dt`, clipped so the output times are hit exactly.
    ``increment_source(step, dt)`` overrides the sampler (used for coupled
    refinement runs). Positivity loss or non-finite values end the run early
    with ``status == "aborted"``.
    """
    if np.any(init.rho <= config.rho_floor):
        raise NonPositiveInitialDensity("initial density must exceed rho_floor")
    seed, path = (int(v) for v in lineage)
    K = model.k_modes
    if increment_source is None:

        def increment_source(step, dt):
            return sample_increments((seed, path, step), dt, K).dw if K else np.zeros(0)

    stops = _output_grid(output_times, config.t_end)
    state = init.copy()
    ledger = EnergyLedger(float(mesh.integrate(entropy(state.rho, state.m, eos))))
    traj = Trajectory(mesh, eos, [0.0], [state.copy()], ledger)

    if fixed_dt is not None:
        n_steps = int(round(config.t_end / fixed_dt))
        if abs(n_steps * fixed_dt - config.t_end) > 1e-9 * max(config.t_end, 1.0):
            raise IncompatibleTimeGrids(f"t_end={config.t_end} is not a multiple of dt={fixed_dt}")
        stop_steps = {}
        for ts in stops[1:]:
            j = int(round(ts / fixed_dt))
            if abs(j * fixed_dt - ts) > 1e-9 * max(config.t_end, 1.0):
                raise IncompatibleTimeGrids(f"output time {ts} is not a multiple of dt={fixed_dt}")
            stop_steps[j] = ts
    max_cfl = 0.0
    t = 0.0
    step = 0
    next_stop = 1
    try:
        while next_stop < len(stops):
            if fixed_dt is not None:
                dt = fixed_dt
            else:
                remaining = stops[next_stop] - t
                dt = cfl_dt(state, mesh, eos, config, remaining)
                if remaining - dt < 1e-9 * dt:
                    dt = remaining
            dw = increment_source(step, dt)
            state = euler_maruyama_step(state, dt, dw, model, mesh, eos, config, ledger, t, source)
            max_cfl = max(max_cfl, ledger.rows[-1][-1] * dt * mesh.dim / mesh.h)
            step += 1
            if fixed_dt is not None:
                t = step * fixed_dt
                hit = step in stop_steps
                if hit:
                    t = stop_steps[step]
            else:
                hit = dt >= stops[next_stop] - t
                t = stops[next_stop] if hit else t + dt
            if hit:
                traj.times.append(t)
                traj.states.append(state.copy())
                next_stop += 1
    except (PositivityLost, NonFinite) as exc:
        traj.status = "aborted"
        traj.abort_reason = type(exc).__name__
        traj.abort_time = exc.t
        log.info("run aborted: %s", exc)
    traj.info.update(n_steps=step, max_cfl=max_cfl)
    if len(ledger):
        traj.info.update(min_rho=float(ledger.column("min_rho").min()), max_sup_u=float(ledger.column("sup_u").max()))
    else:
        traj.info.update(min_rho=float(init.rho.min()), max_sup_u=float(np.sqrt(np.max(np.sum((init.m / init.rho) ** 2, axis=0)))))
    return traj


def init_from_functions(rho0, u0, mesh: Mesh, eos: EosParams | None = None) -> State:
    """Cell averages of rho0 and rho0 u0.

    rho0 must be positive at the quadrature points, cell centres and cell
    vertices. ``rho0(x)`` and ``u0(x)`` take coordinates ``(d, *shape)``; ``u0`` may
    also be a constant scalar (1D) or length-d sequence.
    """
    seen_min = [np.inf]

    def rho_checked(x):
        r = np.broadcast_to(np.asarray(rho0(x), dtype=float), x.shape[1:])
        seen_min[0] = min(seen_min[0], float(r.min()))
        return r

    def velocity_at(x):
        u = u0(x) if callable(u0) else np.asarray(u0, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float)
        if u.ndim == 1 and u.shape[0] == mesh.dim:
            u = u.reshape((mesh.dim,) + (1,) * mesh.dim)
        return np.broadcast_to(u, x.shape)

    rho = project(rho_checked, mesh)
    # vertices and centres too, so zeros sitting on cell faces are caught
    for offset in (0.0, 0.5):
        rho_checked(mesh.centers - (0.5 - offset) * mesh.h)
    if seen_min[0] <= 0 or np.any(rho <= 0):
        raise NonPositiveInitialDensity(f"initial density must be positive (min {seen_min[0]:.3e})")
    m = project(lambda x: rho_checked(x) * velocity_at(x), mesh)
    return State(rho, m.reshape((mesh.dim,) + mesh.shape))
