"""Discrete dual functional Phi(v), its derivatives, and the original energy J.

Assembly uses the shifted data (Vt = V + m, gt = g + m t, Gt = G + m t^2/2):

    Phi(v) = 1/2 int |grad v|^2 + 1/2 int Vt f(v)^2 - int Gt(f(v)).

Gradients are returned as nodal fields: ``grad`` is the Riesz representative
for the weighted L2 pairing (the strong residual of the Euler-Lagrange
equation in v), ``sobolev_gradient`` the representative for the X inner
product.  ``dual`` gives the raw vector of partial derivatives on free nodes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import transform
from .grid import Grid, apply_neg_laplacian

F_INV = transform.DEFAULT.f_inverse


class EnergyError(ArithmeticError):
    """Non-finite energy density (overflow in Gt(f(v)) for extreme fields)."""


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    potential: float
    nonlinear: float
    total: float
    rho: float

    def to_dict(self) -> dict:
        return asdict(self)


class Functional:
    """Phi and friends for a fixed (problem, grid) pair.

    The problem's shift is resolved on the grid at construction.
    """

    def __init__(self, problem, grid: Grid, table: transform.TransformTable = transform.DEFAULT):
        self.problem = problem.with_grid(grid)
        self.grid = grid
        self.table = table
        self.V = self.problem.potential(grid.x)
        self.Vt = self.V + self.problem.m
        self.w = grid.weights
        self.K = grid.stiffness
        self.f_idx = grid.free

    # -- helpers ---------------------------------------------------------------
    def _transform(self, v):
        fv, fp, fpp = self.table.evaluate(v)
        return fv, fp, fpp

    @cached_property
    def gram(self) -> sp.csc_matrix:
        """Matrix of the X inner product on free nodes."""
        return (self.K + sp.diags(self.w[self.f_idx] * self.Vt[self.f_idx])).tocsc()

    @cached_property
    def gram_lu(self):
        return spla.splu(self.gram)

    @cached_property
    def q_hessian(self) -> sp.csc_matrix:
        """Matrix of <Q''(0) a, b> = int grad a . grad b + V a b on free nodes."""
        return (self.K + sp.diags(self.w[self.f_idx] * self.V[self.f_idx])).tocsc()

    # -- energy ----------------------------------------------------------------
    def breakdown(self, v) -> EnergyBreakdown:
        v = self.grid.check(v)
        vf = v[self.f_idx]
        with np.errstate(over="ignore", invalid="ignore"):
            dirichlet = 0.5 * float(vf @ (self.K @ vf))
            u = self.table.f(v)
            pot = 0.5 * float(np.dot(self.w * self.Vt, u * u))
            dens = self.problem.G_shift(u)
        if not np.all(np.isfinite(dens)):
            bad = int(np.flatnonzero(~np.isfinite(dens))[0])
            raise EnergyError(f"non-finite Gt(f(v)) at node {bad} (v={v[bad]:g})")
        nonlinear = float(np.dot(self.w, dens))
        total = dirichlet + pot - nonlinear
        return EnergyBreakdown(dirichlet, pot, nonlinear, total,
                               math.sqrt(max(2.0 * dirichlet + 2.0 * pot, 0.0)))

    def __call__(self, v) -> float:
        return self.breakdown(v).total

    def value_unshifted(self, v) -> float:
        """Phi assembled from V, G directly (reporting form)."""
        v = self.grid.check(v)
        vf = v[self.f_idx]
        u = self.table.f(v)
        return (0.5 * float(vf @ (self.K @ vf)) + 0.5 * float(np.dot(self.w * self.V, u * u))
                - float(np.dot(self.w, self.problem.nonlinearity.G(u))))

    # -- first derivative ----------------------------------------------------------
    def dual(self, v) -> np.ndarray:
        """Partial derivatives of Phi w.r.t. the free nodal values."""
        v = self.grid.check(v)
        f = self.f_idx
        u, fp, _ = self._transform(v[f])
        local = (self.Vt[f] * u - self.problem.g_shift(u)) * fp
        d = self.K @ v[f] + self.w[f] * local
        if not np.all(np.isfinite(d)):
            raise EnergyError("non-finite gradient")
        return d

    def grad(self, v) -> np.ndarray:
        out = np.zeros(self.grid.n)
        out[self.f_idx] = self.dual(v) / self.w[self.f_idx]
        return out

    def sobolev_gradient(self, v, dual=None) -> np.ndarray:
        d = self.dual(v) if dual is None else dual
        out = np.zeros(self.grid.n)
        out[self.f_idx] = self.gram_lu.solve(d)
        return out

    def grad_norm(self, v, dual=None) -> float:
        """Weighted L2 norm of the L2-Riesz gradient."""
        d = self.dual(v) if dual is None else dual
        return float(np.sqrt(np.dot(d * d, 1.0 / self.w[self.f_idx])))

    def dual_norm(self, v, dual=None) -> float:
        """Norm of Phi'(v) in the dual of X."""
        d = self.dual(v) if dual is None else dual
        return float(np.sqrt(max(np.dot(d, self.gram_lu.solve(d)), 0.0)))

    def pairing(self, v, phi) -> float:
        """<Phi'(v), phi>."""
        return float(np.dot(self.dual(v), self.grid.check(phi)[self.f_idx]))

    # -- second derivative -----------------------------------------------------------
    def hessian(self, v) -> sp.csc_matrix:
        """Exact discrete Hessian on free nodes (requires g')."""
        v = self.grid.check(v)
        f = self.f_idx
        u, fp, fpp = self._transform(v[f])
        gt = self.problem.g_shift(u)
        dgt = self.problem.dg_shift(u)
        c = self.Vt[f] * (fp * fp + u * fpp) - (dgt * fp * fp + gt * fpp)
        return (self.K + sp.diags(self.w[f] * c)).tocsc()

    def hessian_vec(self, v, direction, h: float | None = None) -> np.ndarray:
        """Central difference of Phi' along ``direction`` as a dual vector."""
        v = self.grid.check(v)
        direction = self.grid.check(direction)
        dn = math.sqrt(max(np.dot(self.w, direction**2), 1e-300))
        if h is None:
            h = 1e-5 * max(1.0, math.sqrt(np.dot(self.w, v * v)))
        step = h / dn
        return (self.dual(v + step * direction) - self.dual(v - step * direction)) / (2.0 * step)

    # -- original variables -----------------------------------------------------------
    def energy_J(self, u, form: str = "exact") -> float:
        """J(u) = 1/2 int (1+2u^2)|grad u|^2 + 1/2 int V u^2 - int G(u).

        ``form="exact"`` discretises the quasilinear Dirichlet term edge-wise as
        ``(F(u_j) - F(u_i))^2 / h^2`` with ``F = f^{-1}``, using
        ``(1+2u^2)|grad u|^2 = |grad F(u)|^2``; ``form="direct"`` uses the
        midpoint value of ``1+2u^2`` times the squared difference quotient.
        """
        u = self.grid.check(u)
        D = self.grid.difference
        a = self.grid.edge_coefficients
        if form == "exact":
            du = D @ F_INV(u)
            grad_term = float(np.dot(a, du * du))
        elif form == "direct":
            mid = 0.5 * (u[1:] + u[:-1])
            du = D @ u
            grad_term = float(np.dot(a * (1.0 + 2.0 * mid * mid), du * du))
        else:
            raise ValueError("form must be 'exact' or 'direct'")
        return (0.5 * grad_term + 0.5 * float(np.dot(self.w * self.V, u * u))
                - float(np.dot(self.w, self.problem.nonlinearity.G(u))))

    def pde_residual(self, u, forcing=None) -> "Residual":
        """Relative interior residual of -Lap u + V u - u Lap(u^2) - g(u) = forcing.

        Weighted L2 norm over the free nodes divided by the weighted L2 norm of u.
        """
        u = self.grid.check(u)
        norm = math.sqrt(float(np.dot(self.w, u * u)))
        if norm == 0.0:
            return Residual(0.0, True)
        lap_u = apply_neg_laplacian(self.grid, u)  # -Lap u
        lap_u2 = apply_neg_laplacian(self.grid, u * u)  # -Lap u^2
        r = lap_u + self.V * u + u * lap_u2 - self.problem.nonlinearity.g(u)
        if forcing is not None:
            r = r - self.grid.check(forcing)
        f = self.f_idx
        val = math.sqrt(float(np.dot(self.w[f], r[f] ** 2))) / norm
        return Residual(val, False)

    def rho(self, v) -> float:
        return self.breakdown(v).rho


@dataclass(frozen=True)
class Residual:
    value: float
    trivial: bool

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class ProbeVerdict:
    status: str  # "pass" | "fail" | "not-applicable"
    value: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


# -- functional API -------------------------------------------------------------------


def phi(problem, grid, v) -> EnergyBreakdown:
    return Functional(problem, grid).breakdown(v)


def phi_grad(problem, grid, v) -> np.ndarray:
    return Functional(problem, grid).grad(v)


def q_hessian_origin(problem, grid) -> sp.csc_matrix:
    return Functional(problem, grid).q_hessian


def hessian_vec(problem, grid, v, w, h: float | None = None) -> np.ndarray:
    """Finite-difference Hessian action, returned as a nodal field (L2 Riesz)."""
    fn = Functional(problem, grid)
    out = np.zeros(grid.n)
    out[grid.free] = fn.hessian_vec(v, w, h) / grid.mass
    return out


def energy_J(problem, grid, u, form: str = "exact") -> float:
    return Functional(problem, grid).energy_J(u, form)


def pde_residual(problem, grid, u, forcing=None) -> Residual:
    return Functional(problem, grid).pde_residual(u, forcing)


def pairing_sign_probe(problem, grid, v, A: float, fn: Functional | None = None) -> ProbeVerdict:
    """Sign of d/dt Phi(tv) at t=1 for a field with Phi(v) <= -A."""
    fn = Functional(problem, grid) if fn is None else fn
    val = fn(v)
    if val > -A:
        return ProbeVerdict("not-applicable", val, f"Phi(v)={val:.6g} > -A={-A:.6g}")
    d = fn.pairing(v, v)
    return ProbeVerdict("pass" if d < 0 else "fail", d, f"Phi(v)={val:.6g}")
