"""Uniform finite-difference grids on a truncated domain.

Two layouts are supported:

* ``dimension == 1``: nodes on an interval ``[lo, hi]`` (default ``[-R, R]``)
  with homogeneous Dirichlet conditions at both ends.
* ``dimension in (2, 3)``: radial nodes on ``[0, R]``; Neumann symmetry at
  ``r = 0`` and Dirichlet at ``r = R``.

The Laplacian is assembled in conservative (finite-volume) form,
``-Lap u ~ W^{-1} K u`` with ``K`` symmetric positive semi-definite and ``W``
the diagonal of quadrature weights, so it is self-adjoint in the weighted
inner product by construction.  Fields are full-length nodal arrays; the
Dirichlet entries are kept at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class GridError(ValueError):
    """Invalid grid configuration or mismatched fields."""


def sphere_area(dimension: int) -> float:
    """Surface measure of the unit sphere in R^N (1 for the interval layout)."""
    if dimension == 1:
        return 1.0
    return 2.0 * math.pi ** (dimension / 2) / math.gamma(dimension / 2)


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    R: float
    n: int
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.n < 3:
            raise GridError("grid needs at least 3 points")
        if not self.R > 0:
            raise GridError("truncation radius must be positive")
        if self.dimension == 1:
            lo = -self.R if self.lo is None else self.lo
            hi = self.R if self.hi is None else self.hi
            if not hi > lo:
                raise GridError("empty interval")
            object.__setattr__(self, "lo", float(lo))
            object.__setattr__(self, "hi", float(hi))
        elif self.lo is not None or self.hi is not None:
            raise GridError("lo/hi only apply to the interval layout")

    # -- geometry ------------------------------------------------------------
    @property
    def radial(self) -> bool:
        return self.dimension > 1

    @cached_property
    def x(self) -> np.ndarray:
        if self.radial:
            return np.linspace(0.0, self.R, self.n)
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @cached_property
    def free(self) -> np.ndarray:
        """Indices of non-Dirichlet nodes."""
        if self.radial:
            return np.arange(0, self.n - 1)
        return np.arange(1, self.n - 1)

    @property
    def n_free(self) -> int:
        return self.free.size

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights (cell measures) at every node."""
        h = self.h
        if not self.radial:
            w = np.full(self.n, h)
            w[0] = w[-1] = 0.5 * h
            return w
        N = self.dimension
        c = sphere_area(N) / N
        left = np.maximum(self.x - 0.5 * h, 0.0)
        right = np.minimum(self.x + 0.5 * h, self.R)
        return c * (right**N - left**N)

    @cached_property
    def edge_coefficients(self) -> np.ndarray:
        """Flux coefficient ``a_e / h`` for each edge between nodes i, i+1."""
        if not self.radial:
            return np.full(self.n - 1, 1.0 / self.h)
        mid = 0.5 * (self.x[1:] + self.x[:-1])
        return sphere_area(self.dimension) * mid ** (self.dimension - 1) / self.h

    @cached_property
    def difference(self) -> sp.csr_matrix:
        """(n-1) x n forward difference (no 1/h) on all nodes."""
        m = self.n - 1
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([np.arange(m), np.arange(1, m + 1)]).ravel()
        vals = np.tile([-1.0, 1.0], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    @cached_property
    def stiffness_full(self) -> sp.csr_matrix:
        D = self.difference
        return (D.T @ sp.diags(self.edge_coefficients) @ D).tocsr()

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Stiffness matrix on the free nodes (Dirichlet values eliminated)."""
        f = self.free
        return self.stiffness_full[f][:, f].tocsr()

    @cached_property
    def mass(self) -> np.ndarray:
        """Diagonal of the lumped mass matrix on the free nodes."""
        return self.weights[self.free]

    # -- fields ----------------------------------------------------------------
    def zeros(self) -> np.ndarray:
        return np.zeros(self.n)

    def field(self, values) -> np.ndarray:
        """Full nodal field from free-node values or a callable of x."""
        if callable(values):
            out = np.asarray(values(self.x), dtype=float).copy()
            out[self.dirichlet] = 0.0
            return out
        values = np.asarray(values, dtype=float)
        if values.shape == (self.n,):
            out = values.copy()
            out[self.dirichlet] = 0.0
            return out
        if values.shape == (self.n_free,):
            out = np.zeros(self.n)
            out[self.free] = values
            return out
        raise GridError(f"field of shape {values.shape} does not fit grid with n={self.n}")

    @cached_property
    def dirichlet(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.free] = False
        return np.flatnonzero(mask)

    def check(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != (self.n,):
            raise GridError(f"field of shape {field.shape} does not match grid n={self.n}")
        return field

    def coarsen(self) -> "Grid":
        """Grid with every other node (spacing 2h); requires odd n."""
        if self.n % 2 == 0 or self.n < 5:
            raise GridError("coarsening needs an odd node count >= 5")
        return Grid(self.dimension, self.R, (self.n + 1) // 2, self.lo, self.hi)

    def refine(self) -> "Grid":
        return Grid(self.dimension, self.R, 2 * self.n - 1, self.lo, self.hi)

    @property
    def volume(self) -> float:
        if self.radial:
            return sphere_area(self.dimension) * self.R**self.dimension / self.dimension
        return self.hi - self.lo

    def metadata(self) -> dict:
        return {
            "dimension": self.dimension,
            "R": self.R,
            "n": self.n,
            "h": self.h,
            "layout": "radial" if self.radial else "interval",
            "lo": self.lo,
            "hi": self.hi,
        }


# -- operations ---------------------------------------------------------------


def laplacian(grid: Grid) -> sp.csr_matrix:
    """Matrix of ``-Lap`` on the free nodes, ``W^{-1} K``.

    Self-adjoint for the weighted product ``(a, b)_W = sum w a b``; the
    symmetric form is ``W^{-1/2} K W^{-1/2}`` (see :func:`symmetric_laplacian`).
    """
    return (sp.diags(1.0 / grid.mass) @ grid.stiffness).tocsr()


def symmetric_laplacian(grid: Grid) -> sp.csr_matrix:
    s = sp.diags(1.0 / np.sqrt(grid.mass))
    return (s @ grid.stiffness @ s).tocsr()


def apply_neg_laplacian(grid: Grid, field: np.ndarray) -> np.ndarray:
    """Apply the ``-Lap`` stencil to a full field, including its boundary values.

    Entries at Dirichlet nodes are returned as zero.
    """
    field = grid.check(field)
    out = np.zeros(grid.n)
    f = grid.free
    out[f] = (grid.stiffness_full @ field)[f] / grid.weights[f]
    return out


def integrate(grid: Grid, field) -> float:
    field = grid.check(field)
    return float(np.dot(grid.weights, field))


def lq_norm(grid: Grid, field, q: float = 2.0) -> float:
    if q < 1:
        raise ValueError("q must be >= 1")
    field = grid.check(field)
    if math.isinf(q):
        return float(np.max(np.abs(field)))
    return float(np.dot(grid.weights, np.abs(field) ** q) ** (1.0 / q))


def l2_inner(grid: Grid, a, b) -> float:
    return float(np.dot(grid.weights, grid.check(a) * grid.check(b)))


def dirichlet_form(grid: Grid, a, b=None) -> float:
    """Discrete ``int grad a . grad b`` over all edges."""
    a = grid.check(a)
    b = a if b is None else grid.check(b)
    D = grid.difference
    return float(np.dot(grid.edge_coefficients * (D @ a), D @ b))


def x_inner(problem, grid: Grid, a, b) -> float:
    """X inner product ``int grad a . grad b + Vt a b`` with the shifted potential."""
    vt = problem.shifted_potential_values(grid)
    return dirichlet_form(grid, a, b) + float(np.dot(grid.weights * vt, grid.check(a) * grid.check(b)))


def x_norm(problem, grid: Grid, a) -> float:
    return math.sqrt(max(x_inner(problem, grid, a, a), 0.0))


def write_field_csv(path, grid: Grid, columns: dict[str, np.ndarray]) -> None:
    """Write ``node, x, <columns...>`` rows."""
    import csv

    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", *names])
        for i in range(grid.n):
            w.writerow([i, repr(float(grid.x[i]))] + [repr(float(columns[k][i])) for k in names])
