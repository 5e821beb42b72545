"""Smooth test problems with known references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .physics import EosParams, pressure


@dataclass(frozen=True)
class SineWave:
    """rho = mean + amplitude sin(2 pi k (x_1 - u_1 t) / l), constant velocity u.

    Carried unchanged by the flow when the momentum equation is forced by
    grad p(rho), which makes it an exact (manufactured) solution of the
    forced system: the continuity equation holds as is and the convective
    terms cancel, leaving d_t m + div(m u) + grad p = grad p.
    """

    dim: int = 1
    rho_mean: float = 1.0
    amplitude: float = 0.1
    wavenumber: int = 1
    velocity: tuple = (0.5,)
    edge_length: float = 1.0

    def __post_init__(self):
        if len(self.velocity) != self.dim:
            raise ValueError(f"velocity needs {self.dim} components, got {len(self.velocity)}")
        if not self.rho_mean > abs(self.amplitude):
            raise ValueError("rho_mean must exceed |amplitude| for a positive density")

    @property
    def _w(self) -> float:
        return 2.0 * np.pi * self.wavenumber / self.edge_length

    def _u(self, ndim):
        return np.asarray(self.velocity, dtype=float).reshape((self.dim,) + (1,) * ndim)

    def rho0(self, x):
        return self.rho_mean + self.amplitude * np.sin(self._w * x[0])

    def u0(self, x):
        return np.broadcast_to(self._u(x.ndim - 1), x.shape)

    def exact_rho(self, t: float):
        def f(x):
            return self.rho_mean + self.amplitude * np.sin(self._w * (x[0] - self.velocity[0] * t))

        return f

    def exact_m(self, t: float):
        rho = self.exact_rho(t)
        return lambda x: rho(x) * self._u(x.ndim - 1)

    def momentum_source(self, eos: EosParams):
        """Cell averages of grad p(rho_exact(t)); ``source(t, mesh) -> (0, m_src)``.

        The average of d_1 p over a cell is the difference of its face values
        divided by h, so no quadrature is involved.
        """

        def source(t: float, mesh: Mesh):
            x = mesh.centers
            h = mesh.h
            rho = self.exact_rho(t)
            xr = x.copy()
            xl = x.copy()
            xr[0] += 0.5 * h
            xl[0] -= 0.5 * h
            dp = (pressure(rho(xr), eos) - pressure(rho(xl), eos)) / h
            m_src = np.zeros((mesh.dim,) + mesh.shape)
            m_src[0] = dp
            return np.zeros(mesh.shape), m_src

        return source
