"""
Grid geometry, mesh functions and finite-difference stencils

Fields are stored as (n1, n2) arrays indexed [j1, j2]; flattening with
ravel() gives the row-major (j1 outer, j2 inner) ordering used by the
matrix formulation in `scheme`.

Half-point (face) fields live on the interior faces j + e_k/2 of one axis:
shape (n1-1, n2) for axis 1 and (n1, n2-1) for axis 2.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import GridError

AXES = (1, 2)


@dataclass(frozen=True)
class Grid:
    """Uniform node grid with n1 x n2 nodes and spacings h1, h2"""
    n1: int
    n2: int
    h1: float = 1.0
    h2: float = 1.0

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise GridError(f"grid needs at least 2x2 nodes, got {self.n1}x{self.n2}")
        if not (self.h1 > 0 and self.h2 > 0):
            raise GridError(f"grid spacings must be positive, got h1={self.h1}, h2={self.h2}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def spacing(self, axis: int) -> float:
        _check_axis(axis)
        return self.h1 if axis == 1 else self.h2

    def face_shape(self, axis: int) -> Tuple[int, int]:
        _check_axis(axis)
        return (self.n1 - 1, self.n2) if axis == 1 else (self.n1, self.n2 - 1)

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def area(self) -> float:
        return (self.n1 - 1) * self.h1 * (self.n2 - 1) * self.h2


@dataclass(frozen=True)
class ScalarField:
    """Mesh function on a grid (read-only values)"""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if np.size(self.values) != self.grid.size:
            raise GridError(
                f"field has {np.size(self.values)} values, grid {self.grid.n1}x{self.grid.n2} needs {self.grid.size}"
            )
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))


@dataclass(frozen=True)
class HalfPointField:
    """Values at the interior faces j + e_k/2 of one axis"""
    grid: Grid
    axis: int
    values: np.ndarray

    def __post_init__(self):
        expected = self.grid.face_shape(self.axis)
        values = np.asarray(self.values, dtype=float)
        if values.shape != expected:
            raise GridError(f"axis-{self.axis} face field needs shape {expected}, got {values.shape}")
        object.__setattr__(self, "values", values)

    def __mul__(self, other: "HalfPointField") -> "HalfPointField":
        if not isinstance(other, HalfPointField):
            return HalfPointField(self.grid, self.axis, self.values * other)
        if other.grid != self.grid or other.axis != self.axis:
            raise GridError("face fields live on different faces")
        return HalfPointField(self.grid, self.axis, self.values * other.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """Two-component state W = (U, V) on one grid"""
    u: ScalarField
    v: ScalarField

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise GridError("U and V live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def flat(self) -> np.ndarray:
        """Concatenated vector w = (u, v) of length 2*n1*n2"""
        return np.concatenate([self.u.flat, self.v.flat])

    @classmethod
    def from_flat(cls, grid: Grid, w: np.ndarray) -> "VectorField":
        n = grid.size
        if np.size(w) != 2 * n:
            raise GridError(f"state vector needs {2 * n} entries, got {np.size(w)}")
        return cls(ScalarField(grid, w[:n]), ScalarField(grid, w[n:]))


def _check_axis(axis: int):
    if axis not in AXES:
        raise GridError(f"axis must be 1 or 2, got {axis}")


# Array-level stencils (used directly by the steppers)

def diff_faces(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(a[j + e_k] - a[j]) / h on interior faces"""
    return np.diff(a, axis=axis - 1) / h


def div_nodes(flux: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(F[j + 1/2] - F[j - 1/2]) / h at every node with ghost reflection.

    The ghost node outside the boundary mirrors the interior neighbour, so the
    flux through the ghost face is the negated flux through the first
    interior face.
    """
    ax = axis - 1
    first = -np.take(flux, [0], axis=ax)
    last = -np.take(flux, [-1], axis=ax)
    padded = np.concatenate([first, flux, last], axis=ax)
    return np.diff(padded, axis=ax) / h


def average_faces(a: np.ndarray, axis: int) -> np.ndarray:
    """Arithmetic mean of the two nodes adjacent to each face"""
    ax = axis - 1
    n = a.shape[ax]
    return 0.5 * (np.take(a, range(n - 1), axis=ax) + np.take(a, range(1, n), axis=ax))


def node_weights(grid: Grid) -> np.ndarray:
    """Quadrature weights of (.,.)_h: each cell spreads |cell|/4 onto its corners"""
    w1 = np.ones(grid.n1)
    w1[[0, -1]] = 0.5
    w2 = np.ones(grid.n2)
    w2[[0, -1]] = 0.5
    return grid.cell_area * np.outer(w1, w2)


def face_weights(grid: Grid, axis: int) -> np.ndarray:
    """Quadrature weights of (.,.)_{h_k^*}: each cell spreads |cell|/2 onto its two axis-k faces"""
    _check_axis(axis)
    if axis == 1:
        w2 = np.ones(grid.n2)
        w2[[0, -1]] = 0.5
        return grid.cell_area * np.tile(w2, (grid.n1 - 1, 1))
    w1 = np.ones(grid.n1)
    w1[[0, -1]] = 0.5
    return grid.cell_area * np.tile(w1[:, None], (1, grid.n2 - 1))


# Field-level operations

def forward_diff(f: ScalarField, axis: int) -> HalfPointField:
    """Forward difference quotient onto the interior faces of `axis`"""
    _check_axis(axis)
    grid = f.grid
    return HalfPointField(grid, axis, diff_faces(f.values, axis, grid.spacing(axis)))


def backward_div(flux: HalfPointField, axis: int) -> ScalarField:
    """Node-centred difference of a face flux, Neumann ghost reflection at the boundary"""
    _check_axis(axis)
    if flux.axis != axis:
        raise GridError(f"flux lives on axis-{flux.axis} faces, not axis {axis}")
    grid = flux.grid
    return ScalarField(grid, div_nodes(flux.values, axis, grid.spacing(axis)))


def inner_h(f: ScalarField, g: ScalarField) -> float:
    if f.grid != g.grid:
        raise GridError("fields live on different grids")
    return float(np.sum(node_weights(f.grid) * f.values * g.values))


def inner_h_star(f: HalfPointField, g: HalfPointField, axis: int) -> float:
    if f.axis != axis or g.axis != axis:
        raise GridError(f"face fields must live on axis-{axis} faces")
    if f.grid != g.grid:
        raise GridError("face fields live on different grids")
    return float(np.sum(face_weights(f.grid, axis) * f.values * g.values))


def norm_h(w: VectorField) -> float:
    """Discrete L2 norm with ||W||_h^2 = ||U||_h^2 + ||V||_h^2"""
    return float(np.sqrt(inner_h(w.u, w.u) + inner_h(w.v, w.v)))


def norm_h_star(f: HalfPointField, axis: int) -> float:
    return float(np.sqrt(inner_h_star(f, f, axis)))
