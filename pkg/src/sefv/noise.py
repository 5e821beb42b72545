"""Truncated multiplicative noise and reproducible Wiener increments.

Mode k of the noise acts on momentum only:

    Psi_k(x, rho, m) = beta_k chi_k(x) (A_k rho e_k + B_k m),

with beta_k = beta0 k^-q, |A_k| <= 1, ||B_k||_2 <= 1, |chi_k| <= 1 and e_k
cycling through the coordinate directions. Psi_k(x, 0, 0) = 0 and
|Psi_k(rho1, m1) - Psi_k(rho2, m2)| <= beta_k (|rho1 - rho2| + |m1 - m2|).

Increments come from a Philox counter-based generator keyed by
(master seed, path) with the step index in the counter, so any step of any
path can be regenerated independently of the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadDecay, DimensionMismatch, ModeOutOfRange, NegativeAmplitude, VacuumState
from .physics import RHO_FLOOR, EosParams, State

SPATIAL_MODULATIONS = ("cos", "none")


@dataclass(eq=False)
class NoiseModel:
    dim: int
    beta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    spatial: str = "cos"
    edge_length: float = 1.0
    _chi_cache: dict = field(default_factory=dict, repr=False)

    @property
    def k_modes(self) -> int:
        return len(self.beta)

    def direction(self, k: int) -> int:
        """Coordinate axis (0-based) carrying the density term of mode k (1-based)."""
        return (k - 1) % self.dim

    def chi(self, k: int, x: np.ndarray) -> np.ndarray:
        if self.spatial == "none":
            return np.ones(np.shape(x)[1:])
        return np.cos(2.0 * np.pi * k * x[0] / self.edge_length)

    def chi_all(self, x: np.ndarray) -> np.ndarray:
        """chi_k(x) for every mode, shape ``(K, *x.shape[1:])``; memoised on the last ``x``."""
        hit = self._chi_cache.get("last")
        if hit is not None and hit[0] is x:
            return hit[1]
        if self.k_modes:
            out = np.stack([self.chi(k, x) for k in range(1, self.k_modes + 1)])
        else:
            out = np.zeros((0,) + x.shape[1:])
        self._chi_cache["last"] = (x, out)
        return out


def build_noise(
    k_modes: int = 8,
    beta0: float = 0.1,
    q: float = 2.0,
    coeff_spec="default",
    dim: int = 1,
    spatial: str = "cos",
    edge_length: float = 1.0,
) -> NoiseModel:
    """Noise with beta_k = beta0 k^-q.

    ``coeff_spec`` is ``"default"`` (A_k = 1/2, B_k = I/2, so that
    |d_rho Psi_k| + |grad_m Psi_k| <= beta_k holds literally) or a mapping
    with ``"A"`` (length K) and ``"B"`` (K x d x d, or K scalars multiplying
    the identity).
    """
    if k_modes < 0:
        raise ValueError("k_modes must be non-negative")
    if beta0 < 0:
        raise NegativeAmplitude(f"beta0 must be non-negative, got {beta0}")
    if not q > 1:
        raise BadDecay(f"decay exponent q must exceed 1 for a summable beta_k, got {q}")
    if spatial not in SPATIAL_MODULATIONS:
        raise ValueError(f"spatial must be one of {SPATIAL_MODULATIONS}")
    k = np.arange(1, k_modes + 1, dtype=float)
    beta = beta0 * k**-q
    if coeff_spec == "default" or coeff_spec is None:
        A = np.full(k_modes, 0.5)
        B = np.broadcast_to(0.5 * np.eye(dim), (k_modes, dim, dim)).copy()
    else:
        A = np.asarray(coeff_spec["A"], dtype=float).reshape(k_modes)
        B = np.asarray(coeff_spec["B"], dtype=float)
        if B.shape == (k_modes,):
            B = B[:, None, None] * np.eye(dim)
        if B.shape != (k_modes, dim, dim):
            raise DimensionMismatch(f"B must be {k_modes} x {dim} x {dim}, got {B.shape}")
        if np.any(np.abs(A) > 1 + 1e-14):
            raise ValueError("|A_k| must not exceed 1")
        if k_modes and np.max(np.linalg.norm(B, ord=2, axis=(1, 2))) > 1 + 1e-14:
            raise ValueError("operator norm of B_k must not exceed 1")
    return NoiseModel(dim, beta, A, B, spatial, float(edge_length))


def psi_k(model: NoiseModel, k: int, x, rho, m) -> np.ndarray:
    """Psi_k evaluated pointwise; ``x`` is ``(d, ...)``, ``m`` is ``(d, ...)``."""
    if not 1 <= k <= model.k_modes:
        raise ModeOutOfRange(f"mode {k} outside 1..{model.k_modes}")
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    i = k - 1
    out = np.einsum("ij,j...->i...", model.B[i], m)
    out[model.direction(k)] = out[model.direction(k)] + model.A[i] * rho
    return model.beta[i] * model.chi(k, x) * out


def psi_field(model: NoiseModel, x: np.ndarray, state: State) -> np.ndarray:
    """All modes at once, shape ``(K, d, *shape)``."""
    K, d = model.k_modes, model.dim
    if state.dim != d:
        raise DimensionMismatch(f"noise built for d={d}, state has d={state.dim}")
    out = np.einsum("kij,j...->ki...", model.B, state.m)
    for i in range(K):
        out[i, i % d] += model.A[i] * state.rho
    scale = model.beta.reshape((K,) + (1,) * (out.ndim - 1)) * model.chi_all(x)[:, None]
    return out * scale


@dataclass(frozen=True)
class WienerIncrements:
    dt: float
    dw: np.ndarray
    lineage: tuple


def _generator(master_seed: int, path: int, step: int) -> np.random.Generator:
    key = (int(master_seed) & (2**64 - 1)) | ((int(path) & (2**64 - 1)) << 64)
    counter = (int(step) & (2**64 - 1)) << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def standard_normals(lineage, K: int) -> np.ndarray:
    """K independent N(0, 1) draws determined by ``lineage = (seed, path, step)``."""
    if K == 0:
        return np.zeros(0)
    return _generator(*lineage).standard_normal(K)


def sample_increments(lineage, dt: float, K: int) -> WienerIncrements:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lineage = tuple(int(v) for v in lineage)
    return WienerIncrements(float(dt), np.sqrt(dt) * standard_normals(lineage, K), lineage)


def noise_momentum_increment(model: NoiseModel, x, state: State, increments) -> np.ndarray:
    """Sum_k Psi_k(x_K, rho_K, m_K) dW_k per cell, shape ``(d, *shape)``."""
    dw = increments.dw if isinstance(increments, WienerIncrements) else np.asarray(increments)
    if dw.shape != (model.k_modes,):
        raise DimensionMismatch(f"expected {model.k_modes} increments, got {dw.shape}")
    if model.k_modes == 0:
        return np.zeros_like(state.m)
    return np.tensordot(dw, psi_field(model, x, state), axes=(0, 0))


def ito_correction_density(model: NoiseModel, x, state: State, rho_floor: float = RHO_FLOOR) -> np.ndarray:
    """1/2 sum_k |Psi_k|^2 / rho per cell."""
    if np.any(state.rho <= rho_floor):
        raise VacuumState("Ito correction needs density above the floor")
    if model.k_modes == 0:
        return np.zeros_like(state.rho)
    psi = psi_field(model, x, state)
    return 0.5 * np.sum(psi * psi, axis=(0, 1)) / state.rho


def energy_dominance_constants(model: NoiseModel, eos: EosParams) -> tuple[float, float]:
    """(c, c0) with 1/2 sum_k |Psi_k|^2 / rho <= c eta(rho, m) + c0 for every state."""
    s = float(np.sum(model.beta**2))
    return s * max(2.0, (eos.gamma - 1.0) / eos.a), s
