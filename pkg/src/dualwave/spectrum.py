"""Eigenpairs of -Lap + V, the splitting X = X- (+) X+, and derived constants.

The discrete problem is the symmetric pencil ``(K + W V) phi = lam W phi`` on
the free nodes, ``W`` the quadrature weights.  Eigenfields are normalised to
unit weighted L2 norm.  On grids with an odd node count the eigenvalues are
also Richardson-extrapolated from the grid with spacing ``2h``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridError

log = logging.getLogger(__name__)

DENSE_LIMIT = 512


class SpectrumError(ArithmeticError):
    """Eigen-iteration failed or the spectrum is unusable for the request."""


@dataclass(eq=False)
class SpectralSplit:
    eigenvalues: np.ndarray
    eigenfields: np.ndarray  # shape (K, n), full nodal fields
    grid: Grid
    m: float
    ell: int
    degeneracy_tol: float
    residuals: np.ndarray
    extrapolated: np.ndarray | None = None
    degenerate_indices: list[int] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    @property
    def best_eigenvalues(self) -> np.ndarray:
        """Extrapolated eigenvalues when available, raw otherwise."""
        return self.extrapolated if self.extrapolated is not None else self.eigenvalues

    @property
    def degenerate(self) -> bool:
        return bool(self.degenerate_indices)

    @property
    def gap(self) -> float:
        lam = self.eigenvalues
        above = lam[self.ell] if self.ell < lam.size else math.inf
        below = -lam[self.ell - 1] if self.ell > 0 else math.inf
        return float(min(above, below))

    @property
    def eta(self) -> float:
        return coercivity_eta(self, self.m)

    def beta(self, k: int) -> float:
        return beta(self, self.m, k)

    def phi(self, i: int) -> np.ndarray:
        """Eigenfield i (1-based, as in lambda_1 <= lambda_2 <= ...)."""
        return self.eigenfields[i - 1]

    @property
    def negative_fields(self) -> np.ndarray:
        return self.eigenfields[: self.ell]

    def project(self, v, which: str) -> np.ndarray:
        return project(self, v, which)

    def summary(self) -> dict:
        out = {
            "K": self.K,
            "ell": self.ell,
            "m": self.m,
            "gap": self.gap,
            "degenerate": self.degenerate,
            "degenerate_indices": [i + 1 for i in self.degenerate_indices],
            "degeneracy_tol": self.degeneracy_tol,
            "max_residual": float(self.residuals.max()),
        }
        if not self.degenerate:
            out["eta"] = self.eta
        return out


def _operator(problem, grid: Grid):
    V = problem.potential(grid.x)[grid.free]
    A = (grid.stiffness + sp.diags(grid.mass * V)).tocsc()
    return A, grid.mass, V


def _solve(A, w, K: int, vmin: float, method: str):
    nf = w.size
    if K > nf:
        raise SpectrumError(f"requested {K} eigenpairs from {nf} unknowns")
    if method == "auto":
        method = "dense" if nf <= DENSE_LIMIT else "sparse"
    if method == "dense":
        lam, vec = sla.eigh(A.toarray(), np.diag(w), subset_by_index=[0, K - 1])
    elif method == "sparse":
        sigma = vmin - 1.0
        try:
            # fixed, symmetry-free start keeps runs bit-reproducible
            v0 = np.random.default_rng(0).uniform(0.5, 1.5, nf)
            lam, vec = spla.eigsh(A, k=K, M=sp.diags(w).tocsc(), sigma=sigma, which="LM", tol=0.0,
                                  v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SpectrumError(f"eigen-iteration did not converge: {exc}") from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    # W-normalise and fix signs deterministically
    norms = np.sqrt(np.einsum("i,ij,ij->j", w, vec, vec))
    vec = vec / norms
    pivots = np.argmax(np.abs(vec) > 0.5 * np.abs(vec).max(axis=0), axis=0)
    signs = np.sign(vec[pivots, np.arange(vec.shape[1])])
    vec = vec * np.where(signs == 0, 1.0, signs)
    res = A @ vec - (w[:, None] * vec) * lam
    res_norm = np.sqrt(np.einsum("i,ij->j", 1.0 / w, res**2))
    return lam, vec, res_norm


def eigenpairs(problem, grid: Grid, K: int = 20, *, extrapolate: bool = True,
               method: str = "auto", degeneracy_rel: float = 1e-8) -> SpectralSplit:
    """K smallest eigenpairs of ``-Lap u + V u = lam u`` on ``grid``.

    Raises :class:`SpectrumError` when an eigenpair misses the residual bound
    ``1e-6 max(1, |lam|)``.
    """
    problem = problem.with_grid(grid)
    A, w, V = _operator(problem, grid)
    lam, vec, res = _solve(A, w, K, float(V.min()), method)
    bad = res > 1e-6 * np.maximum(1.0, np.abs(lam))
    if np.any(bad):
        raise SpectrumError(f"eigen residuals too large: {res[bad]}")

    extrap = None
    if extrapolate:
        try:
            coarse = grid.coarsen()
            Ac, wc, Vc = _operator(problem, coarse)
            lam_c, _, _ = _solve(Ac, wc, K, float(Vc.min()), method)
            extrap = (4.0 * lam - lam_c) / 3.0
        except (GridError, SpectrumError) as exc:
            log.info("no Richardson extrapolation: %s", exc)

    best = extrap if extrap is not None else lam
    span = float(best[-1] - best[0])
    tol = degeneracy_rel * max(1.0, span)
    degenerate = [int(i) for i in np.flatnonzero(np.abs(best) < tol)]
    ell = int(np.count_nonzero(lam < 0.0))
    if ell + 1 > K:
        raise SpectrumError(f"all {K} computed eigenvalues are negative; raise K")
    fields = np.zeros((K, grid.n))
    fields[:, grid.free] = vec.T
    return SpectralSplit(lam, fields, grid, problem.m, ell, tol, res, extrap, degenerate)


def coercivity_eta(split: SpectralSplit, m: float | None = None, *,
                   eigenvalues: np.ndarray | None = None) -> float:
    """eta = min(l_{ell+1}/(l_{ell+1}+m), -l_ell/(l_ell+m)).

    This is the sharp constant in ``+-<Q''(0)v, v> >= eta ||v||^2`` on X+-.
    """
    if split.degenerate:
        raise SpectrumError("0 is (numerically) an eigenvalue; eta is undefined")
    m = split.m if m is None else m
    lam = split.eigenvalues if eigenvalues is None else eigenvalues
    ell = split.ell
    eta = lam[ell] / (lam[ell] + m)
    if ell > 0:
        eta = min(eta, -lam[ell - 1] / (lam[ell - 1] + m))
    return float(eta)


def beta(split: SpectralSplit, m: float | None = None, k: int = 1, *,
         eigenvalues: np.ndarray | None = None) -> float:
    """sup of |v|_2 over unit-X-norm v in span{phi_k, phi_{k+1}, ...}."""
    m = split.m if m is None else m
    lam = split.eigenvalues if eigenvalues is None else eigenvalues
    if not 1 <= k <= lam.size:
        raise ValueError(f"k must lie in 1..{lam.size}")
    return float((lam[k - 1] + m) ** -0.5)


def project(split: SpectralSplit, v, which: str = "minus") -> np.ndarray:
    """Weighted-L2 orthogonal projection onto X- (``minus``) or its complement."""
    v = split.grid.check(v)
    w = split.grid.weights
    Y = split.negative_fields
    minus = (Y @ (w * v)) @ Y if Y.shape[0] else np.zeros_like(v)
    if which == "minus":
        return minus
    if which == "plus":
        return v - minus
    raise ValueError("which must be 'plus' or 'minus'")


# -- a-posteriori checks ---------------------------------------------------------


def _pencil(problem, grid: Grid, m: float):
    A, w, _ = _operator(problem, grid)
    B = (A + sp.diags(m * w)).tocsc()
    return A, B, w


def _lobpcg(Aop, B, Y, largest: bool, rng, tol=1e-11):
    n = B.shape[0]
    lu = spla.splu(B)
    prec = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    X = rng.standard_normal((n, 3))
    Yc = Y if (Y is not None and Y.shape[1]) else None
    vals, vecs = spla.lobpcg(Aop, X, B=B, M=prec, Y=Yc, largest=largest, tol=tol,
                             maxiter=2000)
    i = int(np.argmax(vals) if largest else np.argmin(vals))
    return float(vals[i]), vecs[:, i]


@dataclass
class RayleighCheck:
    eta: float
    plus_min_sampled: float
    minus_max_sampled: float
    plus_extremum: float
    minus_extremum: float
    n_samples: int

    @property
    def extremal_eta(self) -> float:
        return min(self.plus_extremum, -self.minus_extremum) if math.isfinite(self.minus_extremum) \
            else self.plus_extremum


def rayleigh_check(split: SpectralSplit, problem, n_samples: int = 1000, seed: int = 0) -> RayleighCheck:
    """Sampled and optimised extrema of ``<Q''(0)v,v>/||v||^2`` over X- and X+."""
    grid = split.grid
    problem = problem.with_grid(grid)
    A, B, w = _pencil(problem, grid, split.m)
    rng = np.random.default_rng(seed)
    f = grid.free
    Y = split.negative_fields[:, f].T  # (nf, ell)

    def rq(V):
        return np.einsum("ij,ij->j", V, A @ V) / np.einsum("ij,ij->j", V, B @ V)

    modes = split.eigenfields[split.ell:, f].T
    smooth = modes @ rng.standard_normal((modes.shape[1], n_samples))
    noise = rng.standard_normal((f.size, n_samples)) * rng.uniform(0, 1, n_samples)
    Vp = smooth + noise
    if Y.shape[1]:
        Vp = Vp - Y @ (Y.T @ (w[:, None] * Vp))
    plus_min = float(rq(Vp).min())

    if split.ell:
        Vm = Y @ rng.standard_normal((split.ell, n_samples))
        minus_max = float(rq(Vm).max())
        Ared = Y.T @ (A @ Y)
        Bred = Y.T @ (B @ Y)
        minus_ext = float(sla.eigh(Ared, Bred, eigvals_only=True).max())
    else:
        minus_max = minus_ext = -math.inf

    plus_ext, _ = _lobpcg(A, B, Y, largest=False, rng=rng)
    return RayleighCheck(coercivity_eta(split), plus_min, minus_max, plus_ext, minus_ext, n_samples)


def beta_by_maximisation(split: SpectralSplit, problem, k: int, seed: int = 0) -> float:
    """Maximise |v|_2 / ||v|| over the discrete tail space orthogonal to phi_1..phi_{k-1}."""
    grid = split.grid
    problem = problem.with_grid(grid)
    _, B, w = _pencil(problem, grid, split.m)
    rng = np.random.default_rng(seed)
    Y = split.eigenfields[: k - 1, grid.free].T
    theta, _ = _lobpcg(sp.diags(w).tocsc(), B, Y, largest=True, rng=rng)
    return math.sqrt(theta)


def write_spectrum_csv(path, split: SpectralSplit) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "lambda", "lambda_extrapolated", "beta"])
        for i in range(split.K):
            ext = split.extrapolated[i] if split.extrapolated is not None else float("nan")
            wr.writerow([i + 1, repr(float(split.eigenvalues[i])), repr(float(ext)),
                         repr(split.beta(i + 1))])
