"""Domains, uniform tensor grids, and nodal fields.

The geometry layer is deliberately small: an interval or an axis-aligned
rectangle, discretized by a uniform grid with at least 3 nodes per axis.
Boundary nodes carry outward unit normals; rectangle corners get the
averaged diagonal normal so every boundary node has exactly one normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, InvalidFieldError, InvalidResolutionError

__all__ = ["Domain", "Grid", "Field", "build_grid", "normal_derivative"]


@dataclass(frozen=True)
class Domain:
    """Interval (dim 1) or axis-aligned rectangle (dim 2).

    bounds holds one (a, b) pair per axis with b > a.
    """

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.bounds) not in (1, 2):
            raise DomainError(f"only 1D/2D domains supported, got {len(self.bounds)} axes")
        for a, b in self.bounds:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DomainError("domain bounds must be finite")
            if not b > a:
                raise DomainError(f"degenerate axis: need b > a, got ({a}, {b})")

    @staticmethod
    def interval(a: float, b: float) -> "Domain":
        return Domain(((float(a), float(b)),))

    @staticmethod
    def rectangle(a1: float, b1: float, a2: float, b2: float) -> "Domain":
        return Domain(((float(a1), float(b1)), (float(a2), float(b2))))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def kind(self) -> str:
        return "interval" if self.dim == 1 else "rectangle"

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.bounds)

    @property
    def measure(self) -> float:
        out = 1.0
        for length in self.lengths:
            out *= length
        return out

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (a + b) for a, b in self.bounds)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid over a domain.

    Node coordinates along axis k are a_k + i * h_k, reproducible bit-exactly
    from (a, h, index). Fields are stored flat in C order; 2D grids use shape
    (n1, n2) with axis 0 varying slowest.
    """

    domain: Domain
    shape: tuple[int, ...]

    def __post_init__(self):
        for n in self.shape:
            if n < 3:
                raise InvalidResolutionError(f"need at least 3 nodes per axis, got {n}")
        if len(self.shape) != self.domain.dim:
            raise DomainError("grid shape rank must match domain dimension")
        h = tuple((b - a) / (n - 1) for (a, b), n in zip(self.domain.bounds, self.shape))
        axes = tuple(a + np.arange(n) * hk for (a, _), n, hk in zip(self.domain.bounds, self.shape, h))
        for arr in axes:
            arr.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "axes", axes)
        bidx, bnormals = self._build_boundary()
        object.__setattr__(self, "boundary_indices", bidx)
        object.__setattr__(self, "boundary_normals", bnormals)
        object.__setattr__(self, "_trap", None)

    def _build_boundary(self):
        if self.dim == 1:
            n = self.shape[0]
            idx = np.array([0, n - 1], dtype=np.int64)
            normals = np.array([[-1.0], [1.0]])
        else:
            n1, n2 = self.shape
            rows = []
            for i in range(n1):
                for j in range(n2):
                    if i in (0, n1 - 1) or j in (0, n2 - 1):
                        nx = -1.0 if i == 0 else (1.0 if i == n1 - 1 else 0.0)
                        ny = -1.0 if j == 0 else (1.0 if j == n2 - 1 else 0.0)
                        norm = math.hypot(nx, ny)
                        rows.append((i * n2 + j, nx / norm, ny / norm))
            idx = np.array([r[0] for r in rows], dtype=np.int64)
            normals = np.array([[r[1], r[2]] for r in rows])
        idx.setflags(write=False)
        normals.setflags(write=False)
        return idx, normals

    # -- identity ---------------------------------------------------------
    @property
    def key(self):
        return (self.domain.bounds, self.shape)

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    # -- basic queries ----------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        out = 1
        for n in self.shape:
            out *= n
        return out

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_indices)

    def flat_index(self, *ij: int) -> int:
        if len(ij) != self.dim:
            raise DomainError("index rank must match grid dimension")
        for k, n in zip(ij, self.shape):
            if not 0 <= k < n:
                raise DomainError(f"index {ij} outside grid shape {self.shape}")
        if self.dim == 1:
            return ij[0]
        return ij[0] * self.shape[1] + ij[1]

    def multi_index(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.n_nodes:
            raise DomainError(f"flat index {flat} out of range")
        if self.dim == 1:
            return (flat,)
        return divmod(flat, self.shape[1])

    def node_coord(self, flat: int) -> tuple[float, ...]:
        ij = self.multi_index(flat)
        return tuple(self.domain.bounds[k][0] + ij[k] * self.h[k] for k in range(self.dim))

    def coords(self) -> tuple[NDArray[np.float64], ...]:
        """Coordinate arrays per axis, broadcast to the full flat node set."""
        if self.dim == 1:
            return (self.axes[0],)
        x, y = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return (x.ravel(), y.ravel())

    def is_boundary(self, flat: int) -> bool:
        ij = self.multi_index(flat)
        return any(k == 0 or k == n - 1 for k, n in zip(ij, self.shape))

    def trapezoid_weights(self) -> NDArray[np.float64]:
        """Quadrature weights (half-weight boundary cells), flat C order."""
        if self._trap is None:
            ws = []
            for n, hk in zip(self.shape, self.h):
                w = np.full(n, hk)
                w[0] = 0.5 * hk
                w[-1] = 0.5 * hk
                ws.append(w)
            out = ws[0] if self.dim == 1 else np.outer(ws[0], ws[1]).ravel()
            out.setflags(write=False)
            object.__setattr__(self, "_trap", out)
        return self._trap

    def refine(self) -> "Grid":
        """Halve h on every axis; coarse nodes are a subset of fine nodes."""
        return Grid(self.domain, tuple(2 * n - 1 for n in self.shape))


def build_grid(domain: Domain, n_per_axis) -> Grid:
    """Build a uniform grid with n_per_axis nodes per axis (int or sequence)."""
    if isinstance(n_per_axis, int):
        shape = (n_per_axis,) * domain.dim
    else:
        shape = tuple(int(n) for n in n_per_axis)
    return Grid(domain, shape)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal scalar field on a grid. Values are flat, float64, read-only."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            v = v.ravel()
        if v.shape[0] != self.grid.n_nodes:
            raise InvalidFieldError(
                f"field has {v.shape[0]} values for a grid of {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def min(self) -> float:
        return float(self.values.min())

    def as_nd(self) -> NDArray[np.float64]:
        """Values reshaped to the grid shape (no copy)."""
        return self.values.reshape(self.grid.shape)

    @staticmethod
    def constant(grid: Grid, value: float) -> "Field":
        return Field(grid, np.full(grid.n_nodes, float(value)))


def _one_sided(values, h: float, forward: bool) -> float:
    """Second-order one-sided first derivative from 3 nodes.

    forward=True uses nodes (0, +1, +2); otherwise (0, -1, -2).
    Exact for affine and quadratic data.
    """
    u0, u1, u2 = values
    d = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h)
    return d if forward else -d


def normal_derivative(field: Field, node: int) -> float:
    """Outward normal derivative at a boundary node (one-sided 3-point stencil).

    For corner nodes the derivative is taken along the averaged diagonal
    normal, combining the one-sided estimates of both axes.
    """
    grid = field.grid
    pos = np.nonzero(grid.boundary_indices == node)[0]
    if len(pos) == 0:
        raise DomainError(f"node {node} is not a boundary node")
    normal = grid.boundary_normals[pos[0]]
    ij = grid.multi_index(node)
    u = field.as_nd()
    out = 0.0
    for axis in range(grid.dim):
        nu = normal[axis]
        if nu == 0.0:
            continue
        k = ij[axis]
        n = grid.shape[axis]
        if k == 0:
            sl = [0, 1, 2]
            forward = True
        elif k == n - 1:
            sl = [n - 1, n - 2, n - 3]
            forward = False
        else:  # normal component should be zero off the faces
            continue
        if grid.dim == 1:
            vals = u[sl]
        elif axis == 0:
            vals = u[sl, ij[1]]
        else:
            vals = u[ij[0], sl]
        # derivative along +axis; the outward direction enters through nu
        out += nu * _one_sided(vals, grid.h[axis], forward)
    return out
