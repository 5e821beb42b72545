"""Uniform periodic meshes on [0, l]^d and the discrete operators living on them.

Cell fields are plain numpy arrays. A scalar field has shape ``mesh.shape``
(one entry per cell, axes ordered x1..xd); a vector field carries its
components on a leading axis, shape ``(d, *mesh.shape)``. Every operator
acts on the trailing ``mesh.dim`` axes, so stacked fields of any leading
shape are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .errors import DimensionMismatch, InvalidDim, TooFewCells

GAUSS_POINTS = 3


@dataclass(frozen=True)
class Mesh:
    dim: int
    cells_per_axis: int
    edge_length: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidDim(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.cells_per_axis < 2:
            raise TooFewCells(f"need at least 2 cells per axis, got {self.cells_per_axis}")
        if not self.edge_length > 0:
            raise ValueError(f"edge_length must be positive, got {self.edge_length}")

    @property
    def h(self) -> float:
        return self.edge_length / self.cells_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def cell_surface(self) -> float:
        return 2 * self.dim * self.h ** (self.dim - 1)

    @property
    def regularity_alpha(self) -> float:
        # alpha h^d <= |K| and |dK| <= h^(d-1) / alpha
        return min(1.0, 1.0 / (2 * self.dim))

    def grid_axis(self, p: int) -> int:
        """Array axis of spatial direction ``p`` (0-based) for trailing-grid layout."""
        if not 0 <= p < self.dim:
            raise DimensionMismatch(f"axis {p} out of range for dim {self.dim}")
        return p - self.dim

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centres, shape ``(d, *shape)``."""
        x = (np.arange(self.cells_per_axis) + 0.5) * self.h
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def unravel(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def ravel(self, multi_index) -> int:
        wrapped = [int(i) % self.cells_per_axis for i in multi_index]
        return int(np.ravel_multi_index(wrapped, self.shape))

    def neighbor(self, index: int, p: int, step: int = 1) -> int:
        """Row-major index of the cell ``step`` cells away along axis ``p`` (periodic)."""
        multi = list(self.unravel(index))
        multi[p] += step
        return self.ravel(multi)

    def integrate(self, w: np.ndarray) -> np.ndarray:
        """h^d times the sum over cells; exact integral of a piecewise-constant field."""
        return self.cell_volume * w.sum(axis=tuple(range(-self.dim, 0)))


def build_mesh(dim: int, cells_per_axis: int, edge_length: float = 1.0) -> Mesh:
    return Mesh(int(dim), int(cells_per_axis), float(edge_length))


def _check_field(w, mesh):
    w = np.asarray(w, dtype=float)
    if w.shape[w.ndim - mesh.dim :] != mesh.shape or w.ndim < mesh.dim:
        raise DimensionMismatch(f"field shape {w.shape} does not end with mesh shape {mesh.shape}")
    return w


def shift(w: np.ndarray, mesh: Mesh, p: int, step: int) -> np.ndarray:
    """Value of the neighbour ``step`` cells along axis ``p``: out[K] = w[K + step e_p]."""
    return np.roll(w, -step, axis=mesh.grid_axis(p))


def central_diff(w, mesh: Mesh, p: int) -> np.ndarray:
    """(w_{K+e_p} - w_{K-e_p}) / 2h."""
    w = _check_field(w, mesh)
    return (shift(w, mesh, p, 1) - shift(w, mesh, p, -1)) / (2.0 * mesh.h)


def forward_diff(w, mesh: Mesh, p: int) -> np.ndarray:
    w = _check_field(w, mesh)
    return (shift(w, mesh, p, 1) - w) / mesh.h


def backward_diff(w, mesh: Mesh, p: int) -> np.ndarray:
    w = _check_field(w, mesh)
    return (w - shift(w, mesh, p, -1)) / mesh.h


def discrete_laplacian(w, mesh: Mesh) -> np.ndarray:
    """Sum over axes of (w_{K+e_p} - 2 w_K + w_{K-e_p}) / h^2."""
    w = _check_field(w, mesh)
    out = np.zeros_like(w)
    for p in range(mesh.dim):
        out += shift(w, mesh, p, 1) - 2.0 * w + shift(w, mesh, p, -1)
    return out / mesh.h**2


def discrete_divergence(m, mesh: Mesh) -> np.ndarray:
    """Sum of central differences of the components of a vector field ``(d, *shape)``.

    Extra leading axes are allowed before the component axis, e.g. a tensor
    field ``(d, d, *shape)`` returns its row-wise divergence ``(d, *shape)``.
    """
    m = _check_field(m, mesh)
    if m.ndim < mesh.dim + 1 or m.shape[-mesh.dim - 1] != mesh.dim:
        raise DimensionMismatch(f"vector field needs {mesh.dim} components, got shape {m.shape}")
    comp_axis = -mesh.dim - 1
    out = central_diff(np.take(m, 0, axis=comp_axis), mesh, 0)
    for p in range(1, mesh.dim):
        out = out + central_diff(np.take(m, p, axis=comp_axis), mesh, p)
    return out


def jump(w, mesh: Mesh, p: int) -> np.ndarray:
    """Jump across every face K|L, L = K + e_p, oriented from K to L: w_L - w_K.

    Entry K of the result belongs to the face on the +e_p side of cell K.
    Seen from L the jump is the negative of this value.
    """
    w = _check_field(w, mesh)
    return shift(w, mesh, p, 1) - w


def mean(w, mesh: Mesh, p: int) -> np.ndarray:
    """Face average (w_K + w_L) / 2 on the +e_p face of every cell."""
    w = _check_field(w, mesh)
    return 0.5 * (w + shift(w, mesh, p, 1))


def face_jump(w, mesh: Mesh, cell, p: int, seen_from: str = "K") -> float:
    """Jump on the single face between ``cell`` and ``cell + e_p``.

    ``seen_from="L"`` gives the jump with the orientation of the neighbour,
    which is the negative.
    """
    w = np.asarray(w)
    k = tuple(np.atleast_1d(cell))
    l = list(k)
    l[p] = (l[p] + 1) % mesh.cells_per_axis
    value = w[tuple(l)] - w[k]
    return value if seen_from == "K" else -value


def face_mean(w, mesh: Mesh, cell, p: int) -> float:
    w = np.asarray(w)
    k = tuple(np.atleast_1d(cell))
    l = list(k)
    l[p] = (l[p] + 1) % mesh.cells_per_axis
    return 0.5 * (w[k] + w[tuple(l)])


def project(f, mesh: Mesh, points: int = GAUSS_POINTS) -> np.ndarray:
    """Cell averages of ``f`` by tensor-product Gauss-Legendre quadrature.

    ``f`` receives coordinates of shape ``(d, *mesh.shape)`` and returns
    either a scalar array of ``mesh.shape`` or a stacked array
    ``(c, *mesh.shape)``. Three points per axis integrate polynomials of
    degree 5 exactly.
    """
    nodes, weights = np.polynomial.legendre.leggauss(points)
    offsets = 0.5 * (nodes + 1.0) * mesh.h
    weights = 0.5 * weights
    corner = np.arange(mesh.cells_per_axis) * mesh.h
    out = None
    for combo in product(range(points), repeat=mesh.dim):
        axes = [corner + offsets[j] for j in combo]
        x = np.stack(np.meshgrid(*axes, indexing="ij"))
        wgt = np.prod([weights[j] for j in combo])
        val = wgt * np.asarray(f(x), dtype=float)
        out = val if out is None else out + val
    if out.shape == ():
        out = np.full(mesh.shape, float(out))
    elif out.shape[out.ndim - mesh.dim :] != mesh.shape:
        out = np.broadcast_to(out, mesh.shape).copy()
    return out
