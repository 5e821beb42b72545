"""Barotropic gas: pressure law p = a rho^gamma, fluxes, entropy pair and wave speeds.

All functions are vectorised. Density ``rho`` is a scalar or an array of any
grid shape; momentum ``m`` has a leading component axis of length d, so a
single state is ``(rho, m)`` with ``m.shape == (d,)`` and a grid state is
``(rho[*shape], m[d, *shape])``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeDensity, VacuumMomentum, VacuumState

RHO_FLOOR = 1e-12
M_FLOOR = 1e-12


@dataclass(frozen=True)
class EosParams:
    gamma: float = 1.4
    a: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")


@dataclass
class State:
    """Conservative variables on a whole grid at one instant."""

    rho: np.ndarray
    m: np.ndarray

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    def copy(self) -> "State":
        return State(self.rho.copy(), self.m.copy())

    def stacked(self) -> np.ndarray:
        """(1 + d, *shape) array [rho, m_1, ..., m_d]."""
        return np.concatenate([self.rho[None], self.m], axis=0)

    @classmethod
    def from_stacked(cls, u: np.ndarray) -> "State":
        return cls(np.ascontiguousarray(u[0]), np.ascontiguousarray(u[1:]))


def _nonnegative(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise NegativeDensity(f"negative density (min {rho.min():.3e})")
    return rho


def _positive(rho, rho_floor=RHO_FLOOR):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= rho_floor):
        raise VacuumState(f"density at or below floor {rho_floor:g} (min {rho.min():.3e})")
    return rho


def pressure(rho, eos: EosParams = EosParams()):
    rho = _nonnegative(rho)
    return eos.a * rho**eos.gamma


def pressure_potential(rho, eos: EosParams = EosParams()):
    """P(rho) = a rho^gamma / (gamma - 1), so that rho P' - P = p."""
    rho = _nonnegative(rho)
    return eos.a * rho**eos.gamma / (eos.gamma - 1.0)


def pressure_potential_derivative(rho, eos: EosParams = EosParams()):
    rho = _nonnegative(rho)
    return eos.a * eos.gamma / (eos.gamma - 1.0) * rho ** (eos.gamma - 1.0)


def sound_speed(rho, eos: EosParams = EosParams()):
    rho = _nonnegative(rho)
    return np.sqrt(eos.gamma * eos.a * rho ** (eos.gamma - 1.0))


def phys_flux(rho, m, p: int, eos: EosParams = EosParams()) -> np.ndarray:
    """Physical flux in direction ``p``: [m_p, m m_p / rho + p(rho) e_p]."""
    rho = _positive(rho)
    m = np.asarray(m, dtype=float)
    up = m[p] / rho
    out = np.empty((m.shape[0] + 1,) + np.broadcast(rho, m[0]).shape)
    out[0] = m[p]
    out[1:] = m * up
    out[1 + p] += eos.a * rho**eos.gamma
    return out


def entropy(rho, m, eos: EosParams = EosParams()):
    """eta = |m|^2 / (2 rho) + P(rho)."""
    rho = _positive(rho)
    m = np.asarray(m, dtype=float)
    return 0.5 * np.sum(m * m, axis=0) / rho + pressure_potential(rho, eos)


def entropy_variables(rho, m, eos: EosParams = EosParams()) -> np.ndarray:
    """Gradient of eta in (rho, m): [P'(rho) - |u|^2 / 2, u]."""
    rho = _positive(rho)
    m = np.asarray(m, dtype=float)
    u = m / rho
    v0 = pressure_potential_derivative(rho, eos) - 0.5 * np.sum(u * u, axis=0)
    return np.concatenate([np.asarray(v0)[None], u], axis=0)


def max_wave_speed(rho, m, p: int, eos: EosParams = EosParams()):
    """Spectral radius of the flux Jacobian in direction p: |u_p| + c."""
    rho = _positive(rho)
    m = np.asarray(m, dtype=float)
    return np.abs(m[p] / rho) + sound_speed(rho, eos)


def global_lambda(rho, m, eos: EosParams = EosParams()) -> float:
    """Maximum wave speed over every cell and every direction."""
    rho = _positive(rho)
    m = np.asarray(m, dtype=float)
    c = sound_speed(rho, eos)
    umax = np.max(np.abs(m), axis=0) / rho
    return float(np.max(umax + c))


def velocity(rho, m, rho_floor: float = RHO_FLOOR, m_floor: float = M_FLOOR) -> np.ndarray:
    """u = m / rho, with u = 0 in vacuum cells whose momentum is also negligible."""
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    vac = rho <= rho_floor
    if not np.any(vac):
        return m / rho
    mnorm = np.sqrt(np.sum(m * m, axis=0))
    if np.any(vac & (mnorm > m_floor)):
        raise VacuumMomentum("momentum above floor in a vacuum cell")
    safe = np.where(vac, 1.0, rho)
    return np.where(vac, 0.0, m / safe)
