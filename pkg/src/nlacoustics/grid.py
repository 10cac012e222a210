"""Uniform tensor grids with homogeneous Dirichlet boundary.

Only interior nodes are stored.  A 2D field of size ``n * n`` is ordered
lexicographically with the x index running fastest, i.e. ``values[j * n + i]``
sits at ``(x_i, y_j)``; as a numpy array of shape ``(n, n)`` it is indexed
``[j, i]``.

Two discrete gradients are provided.  The central gradient lives on the
nodes and is used inside the nonlinearity and for reporting.  The forward
gradient lives on cell edges (``n + 1`` per axis, boundary edges included)
and is the exact adjoint of the Laplacian: ``inner(lap f, f) ==
-inner_grad(grad_fwd f, grad_fwd f)`` up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import DomainError

__all__ = [
    "Grid",
    "Field",
    "GradField",
    "laplacian",
    "bilaplacian",
    "gradient",
    "gradient_forward",
    "inner",
    "norm_l2",
    "inner_grad",
]


def _second_difference(n, h):
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def _central_difference(n, h):
    off = np.full(n - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], format="csr")


def _forward_difference(n, h):
    # rows are the n + 1 edges; edge e joins nodes e - 1 and e (ghosts are zero)
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([np.full(n, 1.0 / h), np.full(n, -1.0 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _edge_average(n):
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    return sp.csr_matrix((np.full(2 * n, 0.5), (rows, cols)), shape=(n + 1, n))


@dataclass(frozen=True)
class Grid:
    """Interior nodes of ``[0, length]^dim`` with spacing ``length / (n + 1)``."""

    dim: int
    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("dim", self.dim, "in {1, 2}")
        if int(self.n) != self.n or self.n < 3:
            raise DomainError("n", self.n, "integer >= 3")
        if not self.length > 0:
            raise DomainError("length", self.length, "> 0")

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @cached_property
    def nodes_1d(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Flattened coordinate arrays ``(x,)`` or ``(x, y)``."""
        x = self.nodes_1d
        if self.dim == 1:
            return (x.copy(),)
        yy, xx = np.meshgrid(x, x, indexing="ij")
        return (xx.ravel(), yy.ravel())

    def _lift(self, op1d):
        """Per-axis copies of a 1D operator, x axis first."""
        if self.dim == 1:
            return [op1d.tocsr()]
        eye = sp.identity(self.n, format="csr")
        return [sp.kron(eye, op1d, format="csr"), sp.kron(op1d, eye, format="csr")]

    @cached_property
    def lap_matrix(self) -> sp.csr_matrix:
        d2 = _second_difference(self.n, self.h)
        parts = self._lift(d2)
        out = parts[0]
        for part in parts[1:]:
            out = out + part
        return out.tocsr()

    @cached_property
    def bilap_matrix(self) -> sp.csr_matrix:
        return (self.lap_matrix @ self.lap_matrix).tocsr()

    @cached_property
    def grad_matrices(self) -> list[sp.csr_matrix]:
        return self._lift(_central_difference(self.n, self.h))

    @cached_property
    def grad_fwd_matrices(self) -> list[sp.csr_matrix]:
        return self._lift(_forward_difference(self.n, self.h))

    @cached_property
    def _edge_avg_matrices(self):
        avg = _edge_average(self.n)
        return self._lift(avg)

    @cached_property
    def _edge_ghost_weights(self):
        # 0.5 on boundary edges (one ghost neighbour), 0 elsewhere
        ones = np.ones(self.size)
        return [1.0 - m @ ones for m in self._edge_avg_matrices]

    # array-level operators ------------------------------------------------
    def lap(self, u: np.ndarray) -> np.ndarray:
        return self.lap_matrix @ u

    def bilap(self, u: np.ndarray) -> np.ndarray:
        return self.lap(self.lap(u))

    def grad(self, u: np.ndarray) -> list[np.ndarray]:
        return [m @ u for m in self.grad_matrices]

    def grad_fwd(self, u: np.ndarray) -> list[np.ndarray]:
        return [m @ u for m in self.grad_fwd_matrices]

    def to_edges(self, u: np.ndarray, ghost: float = 0.0) -> list[np.ndarray]:
        """Average a nodal field onto the forward-gradient edges.

        ``ghost`` is the value assumed on boundary nodes.
        """
        return [m @ u + ghost * w for m, w in zip(self._edge_avg_matrices, self._edge_ghost_weights)]

    def dot(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.cell_volume * np.sum(u * v))

    def dot_grad(self, us, vs) -> float:
        return float(sum(self.dot(u, v) for u, v in zip(us, vs)))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.dot(u, u)))

    def norm_grad(self, us) -> float:
        return float(np.sqrt(self.dot_grad(us, us)))

    def norm_lp(self, u: np.ndarray, p: float) -> float:
        if np.isinf(p):
            return float(np.max(np.abs(u))) if u.size else 0.0
        return float((self.cell_volume * np.sum(np.abs(u) ** p)) ** (1.0 / p))

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(*coords)`` on the interior nodes."""
        return np.asarray(func(*self.coords), dtype=float) * np.ones(self.size)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a grid; boundary values are implicitly zero."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.size:
            raise DomainError("values", values.size, f"length {self.grid.size}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class GradField:
    """Gradient components, one array per axis (nodes or edges)."""

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise DomainError("components", len(self.components), f"count {self.grid.dim}")


def laplacian(f: Field) -> Field:
    return Field(f.grid, f.grid.lap(f.values))


def bilaplacian(f: Field) -> Field:
    return laplacian(laplacian(f))


def gradient(f: Field) -> GradField:
    return GradField(f.grid, tuple(f.grid.grad(f.values)))


def gradient_forward(f: Field) -> GradField:
    return GradField(f.grid, tuple(f.grid.grad_fwd(f.values)))


def inner(f: Field, g: Field) -> float:
    return f.grid.dot(f.values, g.values)


def norm_l2(f: Field) -> float:
    return f.grid.norm(f.values)


def inner_grad(F: GradField, G: GradField) -> float:
    return F.grid.dot_grad(F.components, G.components)
