"""Critical-point search for the discrete dual functional.

* :func:`mountain_pass_solve` - path-based mountain-pass iteration (the
  maximiser on a discretised path from 0 to a point of negative energy is
  pushed down along the Sobolev gradient), for ``ell == 0``.
* :func:`local_linking_solve` - local minimax: for a direction w orthogonal
  to a finite-dimensional space L (default X-), maximise Phi over
  ``L + R w`` and descend the resulting max-value in w.
* :func:`newton_refine` - damped Newton with MINRES inner solves.
* :func:`multiplicity_search` - local minimax over nested eigenspaces.

All searches finish with Newton refinement so converged reports satisfy the
gradient tolerance of the discrete problem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.optimize as spo
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import transform
from .energy import Functional
from .grid import Grid
from .model import Problem
from .spectrum import SpectralSplit, eigenpairs, project

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A search could not be started (wrong geometry, degenerate spectrum)."""


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: float = 1e-8
    res_tol: float = 1e-6
    max_outer: int = 3000
    switch_tol: float = 1e-4
    fallback_tol: float = 0.1
    inner_restarts: int = 20
    coarse_n: int | None = None
    newton_max_iter: int = 40
    trivial_tol: float = 1e-6
    path_points: int = 40
    energy_sep: float = 1e-6
    dist_tol: float = 1e-3
    extra_levels: int = 3
    cerami_growth: float = 1e6
    seed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SolveReport:
    mode: str
    converged: bool
    v: np.ndarray
    u: np.ndarray
    phi: float
    J: float
    grad_norm: float
    pde_residual: float
    morse_index: int | None
    iterations: list[dict] = field(default_factory=list)
    rho_history: list[float] = field(default_factory=list)
    rho_floor: float = math.nan
    trivial: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def outer_iterations(self) -> int:
        return sum(1 for it in self.iterations if it.get("stage") != "newton")

    def sign_changes(self, rel: float = 1e-6) -> int:
        return sign_changes(self.u, rel)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "converged": self.converged,
            "trivial": self.trivial,
            "phi": self.phi,
            "J": self.J,
            "grad_norm": self.grad_norm,
            "pde_residual": self.pde_residual,
            "morse_index_approx": self.morse_index,
            "sign_changes": self.sign_changes(),
            "iterations": len(self.iterations),
            "rho_floor": self.rho_floor,
            "message": self.message,
            **self.extra,
        }


def sign_changes(u: np.ndarray, rel: float = 1e-6) -> int:
    """Sign changes of a nodal field, ignoring values below rel * max|u|."""
    u = np.asarray(u)
    cut = rel * np.max(np.abs(u)) if u.size else 0.0
    s = np.sign(u[np.abs(u) > cut])
    return int(np.count_nonzero(s[1:] != s[:-1]))


# -- bookkeeping ------------------------------------------------------------------


class _Tracker:
    """Iterate log with the rho (Cerami) diagnostic and its abort rule."""

    def __init__(self, fn: Functional, growth: float):
        self.fn = fn
        self.log: list[dict] = []
        self.rho: list[float] = []
        self.ratios: list[float] = []
        self.growth = growth
        self._rho0 = None
        self._g0 = None

    def record(self, stage: str, v, phi: float | None = None, grad: float | None = None, **kw):
        b = self.fn.breakdown(v)
        grad = self.fn.dual_norm(v) if grad is None else grad
        entry = {"iter": len(self.log), "stage": stage, "phi": b.total, "grad": grad, "rho": b.rho, **kw}
        self.log.append(entry)
        self.rho.append(b.rho)
        vf = v[self.fn.f_idx]
        xn2 = float(vf @ (self.fn.gram @ vf))
        if xn2 > 0:
            self.ratios.append(b.rho**2 / xn2)
        if self._rho0 is None and b.rho > 0:
            self._rho0, self._g0 = b.rho, grad
        elif self._rho0 and b.rho > self.growth * self._rho0 and grad >= self._g0:
            raise _CeramiAbort(f"suspected unbounded Cerami path: rho grew {b.rho / self._rho0:.3g}x")
        return entry

    @property
    def rho_floor(self) -> float:
        return float(min(self.ratios)) if self.ratios else math.nan


class _CeramiAbort(RuntimeError):
    pass


# -- Newton ----------------------------------------------------------------------


def _newton_direction(fn: Functional, v, d):
    f = fn.f_idx
    nf = f.size
    prec = spla.LinearOperator((nf, nf), matvec=fn.gram_lu.solve, dtype=float)
    if fn.problem.nonlinearity.dg is not None:
        H = fn.hessian(v)
    else:
        H = spla.LinearOperator((nf, nf), dtype=float,
                                matvec=lambda x: fn.hessian_vec(v, fn.grid.field(x)))
    x, info = spla.minres(H, -d, M=prec, rtol=1e-12, maxiter=400)
    r = H @ x + d
    ok = info == 0 or np.linalg.norm(r) <= 1e-6 * np.linalg.norm(d)
    if not ok and sp.issparse(H):
        x = spla.spsolve(H.tocsc(), -d)
        ok = bool(np.all(np.isfinite(x)))
    return fn.grid.field(x) if ok else None


def newton_refine(problem, grid: Grid, v0, opts: SolverOptions = SolverOptions(), *,
                  fn: Functional | None = None, mode: str = "refine",
                  tracker: _Tracker | None = None) -> SolveReport:
    """Damped Newton on Phi'(v) = 0 with backtracking on ||Phi'||."""
    fn = Functional(problem, grid) if fn is None else fn
    tracker = _Tracker(fn, opts.cerami_growth) if tracker is None else tracker
    v = grid.field(v0)
    msg = ""
    converged = False
    for it in range(opts.newton_max_iter + 1):
        d = fn.dual(v)
        gn = fn.dual_norm(v, d)
        tracker.record("newton", v, grad=gn)
        if gn <= opts.grad_tol:
            converged = True
            break
        if it == opts.newton_max_iter:
            msg = f"Newton did not reach grad_tol in {opts.newton_max_iter} iterations"
            break
        step = _newton_direction(fn, v, d)
        if step is None:
            step = -fn.sobolev_gradient(v, d)
            msg = "linear solver stagnated; gradient step used"
        alpha = 1.0
        for _ in range(40):
            trial = v + alpha * step
            if fn.dual_norm(trial) < (1.0 - 1e-4 * alpha) * gn:
                break
            alpha *= 0.5
        else:
            msg = "Newton line search failed"
            break
        v = trial
    return _finish(fn, v, mode, converged, tracker, opts, msg)


def morse_index(fn: Functional, v, k0: int = 12) -> int | None:
    """Number of negative eigenvalues of the discrete Hessian pencil (H, W)."""
    if fn.problem.nonlinearity.dg is None:
        return None
    H = fn.hessian(v)
    w = fn.w[fn.f_idx]
    nf = w.size
    diag = H.diagonal()
    off = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(diag)
    sigma = float(np.min((diag - off) / w)) - 1.0
    k = min(k0, nf - 2)
    while True:
        vals = spla.eigsh(H, k=k, M=sp.diags(w).tocsc(), sigma=sigma, which="LM",
                          v0=np.random.default_rng(0).uniform(0.5, 1.5, nf),
                          return_eigenvectors=False)
        neg = int(np.count_nonzero(vals < 0))
        if neg < k or k >= nf - 2:
            return neg
        k = min(2 * k, nf - 2)


def _finish(fn: Functional, v, mode, converged, tracker, opts, msg="", extra=None) -> SolveReport:
    u = fn.table.f(v)
    gn = fn.dual_norm(v)
    res = fn.pde_residual(u)
    xnorm = math.sqrt(max(float(v[fn.f_idx] @ (fn.gram @ v[fn.f_idx])), 0.0))
    trivial = xnorm < opts.trivial_tol
    if converged and not trivial and res.value > opts.res_tol:
        converged = False
        msg = (msg + "; " if msg else "") + f"pde residual {res.value:.3e} above res_tol"
    mi = morse_index(fn, v) if not trivial else 0
    return SolveReport(
        mode=mode, converged=converged, v=v, u=u, phi=fn(v), J=fn.energy_J(u),
        grad_norm=gn, pde_residual=res.value, morse_index=mi,
        iterations=tracker.log, rho_history=tracker.rho, rho_floor=tracker.rho_floor,
        trivial=trivial, message=msg or ("converged" if converged else "not converged"),
        extra={"grad_l2": fn.grad_norm(v), **(extra or {})},
    )


def _failed(fn, v, mode, tracker, opts, msg, extra=None) -> SolveReport:
    rep = _finish(fn, v, mode, False, tracker, opts, msg, extra)
    rep.converged = False
    return rep


# -- mountain pass ------------------------------------------------------------------


def prolong(v, source: Grid, target: Grid) -> np.ndarray:
    """Piecewise-linear transfer of a nodal field between grids on the same domain."""
    return target.field(np.interp(target.x, source.x, source.check(v)))


def _negative_point(fn: Functional, direction, s0: float = 1.0, max_doublings: int = 60):
    s = s0
    for _ in range(max_doublings):
        if fn(s * direction) < 0.0:
            return s * direction
        s *= 2.0
    raise SolverError("no point with negative energy found along the starting ray")


def mountain_pass_solve(problem, grid: Grid, split: SpectralSplit,
                        opts: SolverOptions = SolverOptions(), *, start=None) -> SolveReport:
    """Mountain-pass search over straight paths from 0 (requires ell == 0).

    The path from 0 to a point e with Phi(e) < 0 is sampled at
    ``opts.path_points`` nodes; its maximiser is located on the nodes and
    refined on the segment.  Each iteration pushes the maximiser down the
    Sobolev gradient and re-straightens the path through it, accepting the
    step only when the path maximum decreases.  Newton refinement follows.
    """
    if split.ell != 0:
        raise SolverError(f"mountain pass needs a positive definite operator (ell={split.ell})")
    fn = Functional(problem, grid)
    direction = split.phi(1) if start is None else grid.field(start)
    e = _negative_point(fn, direction)
    nodes = np.linspace(0.0, 1.0, opts.path_points + 1)
    values = np.array([fn(t * e) for t in nodes])
    j = int(np.argmax(values))
    peak = nodes[min(j + 1, nodes.size - 1)] * e
    rep = local_minimax(problem, grid, np.zeros((0, grid.n)), peak, opts, mode="mountain-pass",
                        fn=fn)
    rep.extra.update({"e_norm": float(np.sqrt(grid.weights @ e**2)),
                      "initial_path_max": float(values.max())})
    return rep


# -- local minimax --------------------------------------------------------------------


class _InnerMax:
    """Maximise Phi over the span of a fixed basis."""

    def __init__(self, fn: Functional):
        self.fn = fn

    def __call__(self, B: np.ndarray, c0: np.ndarray) -> tuple[np.ndarray, float]:
        fn = self.fn
        f = fn.f_idx
        Bf = B[:, f]

        def fun(c):
            return -fn(c @ B)

        def jac(c):
            return -(Bf @ fn.dual(c @ B))

        def hess(c):
            H = fn.hessian(c @ B)
            return -(Bf @ (H @ Bf.T))

        use_hess = fn.problem.nonlinearity.dg is not None
        res = spo.minimize(fun, c0, jac=jac, hess=hess if use_hess else None,
                           method="trust-exact" if use_hess else "BFGS",
                           options={"gtol": 1e-11, "maxiter": 500})
        c = res.x
        if c[-1] < 0:  # Phi is even: keep the w-coefficient positive
            c = -c
        return c, -float(res.fun)


def _multistart(inner: _InnerMax, B: np.ndarray, c: np.ndarray, rng, n_random: int = 6):
    """Best inner maximum over the warm start, sign flips of the L-part and random starts."""
    scale = float(np.linalg.norm(c))
    starts = [c, np.r_[-c[:-1], c[-1]], np.r_[np.zeros(c.size - 1), c[-1]]]
    starts += [scale * x / np.linalg.norm(x) for x in rng.standard_normal((n_random, c.size))]
    best = None
    for c0 in starts:
        cand = inner(B, c0)
        if best is None or cand[1] > best[1]:
            best = cand
    return best


def _ray_max(fn: Functional, w) -> float:
    """argmax_{s>0} Phi(s w) (Phi(sw) > 0 for small s, -> -inf)."""
    hi = 1.0
    while fn(hi * w) > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise SolverError("Phi not anti-coercive along the ray")
    res = spo.minimize_scalar(lambda s: -fn(s * w), bounds=(0.0, hi), method="bounded",
                              options={"xatol": 1e-10 * hi})
    return float(res.x)


def _x_orthonormal(fn: Functional, vectors: list[np.ndarray]) -> np.ndarray:
    """X-orthonormal basis (rows) spanning the given fields."""
    f = fn.f_idx
    V = np.array([np.asarray(v)[f] for v in vectors])
    G = V @ (fn.gram @ V.T)
    L = sla.cholesky(G, lower=True)
    Q = sla.solve_triangular(L, V, lower=True)
    out = np.zeros((len(vectors), fn.grid.n))
    out[:, f] = Q
    return out


def local_minimax(problem, grid: Grid, L_fields: np.ndarray, w0,
                  opts: SolverOptions = SolverOptions(), *, mode: str = "local-linking",
                  fn: Functional | None = None) -> SolveReport:
    """Minimise over unit w in L-perp the value max_{y in L, s > 0} Phi(y + s w).

    With ``opts.coarse_n`` set below ``grid.n`` the descent runs on a grid
    with ``coarse_n`` nodes over the same domain; its result is interpolated
    to ``grid`` and finished by Newton refinement there.
    """
    fn = Functional(problem, grid) if fn is None else fn
    if opts.coarse_n is not None and opts.coarse_n < grid.n:
        coarse = Grid(grid.dimension, grid.R, opts.coarse_n, grid.lo, grid.hi)
        copts = replace(opts, coarse_n=None, res_tol=math.inf)
        crep = local_minimax(problem, coarse, np.array([prolong(y, grid, coarse) for y in L_fields]),
                             prolong(grid.field(w0), grid, coarse), copts, mode=mode)
        tracker = _Tracker(fn, opts.cerami_growth)
        tracker.log.extend(dict(e, stage=f"coarse-{e['stage']}") for e in crep.iterations)
        if not crep.converged or crep.trivial:
            return _failed(fn, prolong(crep.v, coarse, grid), mode, tracker, opts,
                           f"coarse stage: {crep.message}")
        rep = newton_refine(problem, grid, prolong(crep.v, coarse, grid), opts, fn=fn, mode=mode,
                            tracker=tracker)
        rep.extra.update({k: v for k, v in crep.extra.items() if k != "grad_l2"})
        rep.extra.update({"coarse_n": coarse.n, "coarse_phi": crep.phi})
        return rep
    tracker = _Tracker(fn, opts.cerami_growth)
    f = fn.f_idx
    L = _x_orthonormal(fn, list(L_fields)) if len(L_fields) else np.zeros((0, grid.n))
    ell = L.shape[0]

    def x_proj_out(z, basis):
        if basis.shape[0] == 0:
            return z
        coef = basis[:, f] @ (fn.gram @ z[f])
        return z - coef @ basis

    def normalize(z):
        n = math.sqrt(float(z[f] @ (fn.gram @ z[f])))
        return z / n

    w = normalize(x_proj_out(grid.field(w0), L))
    inner = _InnerMax(fn)
    s0 = _ray_max(fn, w)
    c = np.zeros(ell + 1)
    c[-1] = s0
    B = np.vstack([L, w[None, :]])
    c, val = inner(B, c)
    alpha = 1.0 / max(c[-1], 1e-12)
    rng = np.random.default_rng(opts.seed)
    restarts = 0
    it = 0
    try:
        for it in range(opts.max_outer):
            p = c @ B
            d = fn.dual(p)
            z = fn.sobolev_gradient(p, d)
            z = x_proj_out(z, _x_orthonormal(fn, list(B)))
            znorm = math.sqrt(max(float(z[f] @ (fn.gram @ z[f])), 0.0))
            xnorm = math.sqrt(float(p[f] @ (fn.gram @ p[f])))
            if it % 5 == 0:
                tracker.record(mode, p, grad=fn.dual_norm(p, d), transverse=znorm, s=float(c[-1]))
            if xnorm < opts.trivial_tol or c[-1] < opts.trivial_tol:
                return _failed(fn, p, mode, tracker, opts, "collapsed to trivial")
            if znorm <= opts.switch_tol * max(1.0, xnorm):
                break
            s = c[-1]
            for _ in range(60):
                if alpha * znorm < 1e-6 and restarts < opts.inner_restarts:
                    # the warm-started inner maximiser may sit on a fold of a
                    # non-global branch: re-solve with several starts
                    restarts += 1
                    c_best, val_best = _multistart(inner, B, c, rng)
                    if val_best > val + 1e-12 * max(1.0, abs(val)):
                        c, val = c_best, val_best
                        alpha = 1.0 / max(c[-1], 1e-12)
                        w_new = None
                        break
                w_new = normalize(w - alpha * z)
                B_new = np.vstack([L, w_new[None, :]])
                c_new, val_new = inner(B_new, c)
                if val_new <= val - 1e-4 * alpha * s * znorm * znorm:
                    break
                alpha *= 0.5
            else:
                # the max-value function is only piecewise smooth; hand over to
                # Newton when the transverse gradient is already moderate
                if znorm <= opts.fallback_tol * xnorm:
                    rep = newton_refine(problem, grid, p, opts, fn=fn, mode=mode, tracker=tracker)
                    if rep.converged and not rep.trivial:
                        rep.extra.update({"outer_iterations": it, "minimax_value": val,
                                          "subspace_dim": ell, "newton_fallback": True})
                        return rep
                return _failed(fn, p, mode, tracker, opts, "minimax descent step failed")
            if w_new is None:
                continue
            w, B, c, val = w_new, B_new, c_new, val_new
            alpha *= 2.0
        else:
            return _failed(fn, c @ B, mode, tracker, opts,
                           f"no convergence in {opts.max_outer} outer iterations")
    except _CeramiAbort as exc:
        return _failed(fn, c @ B, mode, tracker, opts, str(exc))
    rep = newton_refine(problem, grid, c @ B, opts, fn=fn, mode=mode, tracker=tracker)
    rep.extra.update({"outer_iterations": it, "minimax_value": val, "subspace_dim": ell})
    return rep


def local_linking_solve(problem, grid: Grid, split: SpectralSplit,
                        opts: SolverOptions = SolverOptions(), *, start=None) -> SolveReport:
    """Local minimax over X- (+) R w starting from w = phi_{ell+1} (or ``start``)."""
    if split.degenerate:
        raise SolverError("0 is an eigenvalue: the linking-based search needs a gap at 0")
    w0 = split.phi(split.ell + 1) if start is None else project(split, grid.field(start), "plus")
    return local_minimax(problem, grid, split.negative_fields, w0, opts, mode="local-linking")


def solve(problem, grid: Grid, split: SpectralSplit, opts: SolverOptions = SolverOptions(),
          *, start=None) -> SolveReport:
    """Pick the search by the number of negative eigenvalues."""
    if split.ell == 0:
        return mountain_pass_solve(problem, grid, split, opts, start=start)
    return local_linking_solve(problem, grid, split, opts, start=start)


# -- multiplicity -----------------------------------------------------------------------


def fit_growth_constants(problem: Problem, t_min: float = 1e-4, t_max: float = 1e4,
                         count: int = 2000) -> tuple[float, float]:
    """Constants with |G(f(t))| <= C1 t^2 + C2 |t|^{p/2} on the sampled range.

    Least-squares (nonnegative) fit, then C2 raised until the bound holds at
    every sample.
    """
    nl = problem.nonlinearity
    t = np.logspace(math.log10(t_min), math.log10(t_max), count)
    y = np.abs(nl.G(transform.f(t)))
    A = np.column_stack([t**2, t ** (nl.p / 2)])
    scale = np.maximum(y, 1e-300)
    coef, _ = spo.nnls(A / scale[:, None], np.ones_like(y))
    c1, c2 = (float(x) for x in coef)
    c2 = max(c2, float(np.max((y - c1 * t**2) / t ** (nl.p / 2))))
    return c1, c2


def choose_level(split: SpectralSplit, c1: float) -> int:
    """Smallest k > ell with eta_qe - C1 beta_k^2 > 0 (eta_qe = eta / 2)."""
    for k in range(split.ell + 1, split.K + 1):
        lam = split.eigenvalues[k - 1]
        if lam <= split.degeneracy_tol:
            continue
        eta = split.eta if not split.degenerate else lam / (lam + split.m)
        if 0.5 * eta - c1 * split.beta(k) ** 2 > 0.0:
            return k
    raise SolverError("no admissible level k among the computed eigenpairs; raise K")


def _distinct(v, others, w, rel: float) -> bool:
    """Weighted L2 distance to every other point and its negative >= rel * max L2 norm."""
    def n2(a):
        return math.sqrt(float(np.dot(w, a * a)))

    for o in others:
        scale = max(n2(v), n2(o))
        if min(n2(v - o), n2(v + o)) < rel * scale:
            return False
    return True


def multiplicity_search(problem, grid: Grid, split: SpectralSplit, count: int = 3,
                        opts: SolverOptions = SolverOptions(), *,
                        basis: str = "solutions") -> tuple[list[SolveReport], list[dict]]:
    """Up to ``count`` distinct critical points from nested-subspace minimax.

    Level j maximises over L_j + R w, w started at phi_j, for j = k, k+1, ...
    The first level uses L_k = span{phi_1..phi_{k-1}}.  With
    ``basis="solutions"`` later levels use span{phi_1..phi_{k-1}} plus the
    solutions already found (same dimension as the eigenspace when every
    level succeeds); ``basis="eigen"`` keeps L_j = span{phi_1..phi_{j-1}}.

    Returns the accepted reports sorted by Phi and one diagnostics record
    per attempted level.
    """
    if not problem.nonlinearity.odd:
        raise SolverError("multiplicity search requires an odd nonlinearity")
    if basis not in ("solutions", "eigen"):
        raise ValueError("basis must be 'solutions' or 'eigen'")
    c1, c2 = fit_growth_constants(problem)
    k = choose_level(split, c1)
    fn = Functional(problem, grid)
    found: list[SolveReport] = []
    levels: list[dict] = []
    j = k
    last = min(split.K, k + count - 1 + opts.extra_levels)
    while len(found) < count and j <= last:
        if basis == "eigen":
            L = split.eigenfields[: j - 1]
        else:
            L = np.vstack([split.eigenfields[: k - 1]] + [r.v[None, :] for r in found])
        rep = local_minimax(problem, grid, L, split.phi(j), opts, mode="multiplicity", fn=fn)
        neg = fn.dual_norm(-rep.v)
        rep.extra.update({"level": j, "C1": c1, "C2": c2, "k": k, "neg_grad_norm": neg})
        status = "accepted"
        if not rep.converged or rep.trivial:
            status = "not converged" if not rep.trivial else "trivial"
        elif neg > opts.grad_tol:
            status = "negative not critical"
        elif not _distinct(rep.v, [r.v for r in found], grid.weights, opts.dist_tol):
            status = "duplicate"
        elif any(abs(rep.phi - r.phi) < opts.energy_sep * max(1.0, abs(r.phi)) for r in found):
            status = "energy not separated"
        levels.append({"level": j, "status": status, "phi": rep.phi, "grad_norm": rep.grad_norm,
                       "pde_residual": rep.pde_residual, "message": rep.message})
        if status == "accepted":
            found.append(rep)
        j += 1
    found.sort(key=lambda r: r.phi)
    return found, levels


# -- probes -----------------------------------------------------------------------------


@dataclass
class ProbeResult:
    name: str
    passed: bool
    details: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, **self.details}


def _random_plus(split: SpectralSplit, rng, n: int) -> np.ndarray:
    grid = split.grid
    modes = split.eigenfields[split.ell:]
    out = []
    for _ in range(n):
        z = rng.standard_normal(modes.shape[0]) @ modes
        z = z + rng.uniform(0.0, 1.0) * grid.field(rng.standard_normal(grid.n))
        out.append(project(split, grid.field(z), "plus"))
    return np.array(out)


def local_linking_probe(problem, grid: Grid, split: SpectralSplit, eps: float = 1e-2,
                        n_dirs: int = 200, pos_slack: float = 1e-12, seed: int = 0) -> ProbeResult:
    """Phi <= pos_slack on the eps-sphere of X- and Phi > 0 on that of X+."""
    fn = Functional(problem, grid)
    rng = np.random.default_rng(seed)

    def on_sphere(z):
        return eps * z / math.sqrt(float(z[fn.f_idx] @ (fn.gram @ z[fn.f_idx])))

    minus_vals = []
    if split.ell:
        for _ in range(n_dirs):
            z = rng.standard_normal(split.ell) @ split.negative_fields
            minus_vals.append(fn(on_sphere(z)))
    plus_vals = [fn(on_sphere(z)) for z in _random_plus(split, rng, n_dirs)]
    minus_max = max(minus_vals) if minus_vals else -math.inf
    plus_min = min(plus_vals)
    ok_minus = minus_max <= pos_slack
    ok_plus = plus_min > 0.0
    details = {"eps": eps, "n_dirs": n_dirs, "minus_max": minus_max, "plus_min": plus_min,
               "minus_ok": ok_minus, "plus_ok": ok_plus}
    if not ok_minus:
        details["violating_minus_direction"] = int(np.argmax(minus_vals))
    if not ok_plus:
        details["violating_plus_direction"] = int(np.argmin(plus_vals))
    return ProbeResult("local_linking", ok_minus and ok_plus, details)


def _random_unit(fn: Functional, basis: np.ndarray, rng, norm: str = "x") -> np.ndarray:
    """Random direction in span(basis), unit in the X norm or the weighted L2 norm."""
    while True:
        c = rng.standard_normal(basis.shape[0])
        if np.linalg.norm(c) > 1e-8:
            break
    z = c @ basis
    if norm == "x":
        return z / math.sqrt(float(z[fn.f_idx] @ (fn.gram @ z[fn.f_idx])))
    if norm == "l2":
        return z / math.sqrt(float(np.dot(fn.w, z * z)))
    raise ValueError("norm must be 'x' or 'l2'")


def anti_coercivity_probe(problem, grid: Grid, basis, radii=(10, 20, 40, 80), n_dirs: int = 50,
                          seed: int = 0, norm: str = "l2") -> ProbeResult:
    """Phi(s w) negative at the largest radius and decreasing past the last sign change.

    Directions w are unit in ``norm`` ("l2" or "x"); on a finite-dimensional
    span the two are equivalent, only the radii at which Phi turns negative
    differ.
    """
    fn = Functional(problem, grid)
    rng = np.random.default_rng(seed)
    basis = np.array([grid.field(b) for b in basis])
    if np.linalg.matrix_rank(basis[:, fn.f_idx]) < basis.shape[0]:
        raise ValueError("basis must be linearly independent")
    radii = np.sort(np.asarray(radii, dtype=float))
    worst = []
    ok_all = True
    all_negative = True
    for _ in range(n_dirs):
        w = _random_unit(fn, basis, rng, norm)
        vals = np.array([fn(s * w) for s in radii])
        nonneg = np.flatnonzero(vals >= 0.0)
        tail = vals[nonneg[-1] + 1:] if nonneg.size else vals
        ok = vals[-1] < 0.0 and bool(np.all(np.diff(tail) < 0.0))
        ok_all &= ok
        all_negative &= not nonneg.size
        worst.append(float(vals.max()))
    return ProbeResult("anti_coercivity", ok_all, {"radii": radii.tolist(), "n_dirs": n_dirs,
                                                   "norm": norm,
                                                   "negative_at_all_radii": all_negative,
                                                   "max_phi_over_radii": max(worst)})


def large_norm_sweep(problem, grid: Grid, basis, s_max: float = 80.0, n_s: int = 161,
                   n_dirs: int = 50, seed: int = 0) -> ProbeResult:
    """Sample rays s w; with A = 1 + sup_{||v||<=2} (-Phi), every sampled v with
    Phi(v) <= -A must have <Phi'(v), v> < 0."""
    fn = Functional(problem, grid)
    rng = np.random.default_rng(seed)
    basis = np.array([grid.field(b) for b in basis])
    s_grid = np.linspace(0.0, s_max, n_s)
    rows = []
    for _ in range(n_dirs):
        w = _random_unit(fn, basis, rng)
        for s in s_grid:
            v = s * w
            rows.append((s, fn(v), fn.pairing(v, v)))
    rows = np.array(rows)
    inner = rows[rows[:, 0] <= 2.0]
    A = 1.0 + max(0.0, float(-inner[:, 1].min()))
    sel = rows[rows[:, 1] <= -A]
    ok = bool(sel.size and np.all(sel[:, 2] < 0.0))
    return ProbeResult("large_norm", ok, {"A": A, "n_checked": int(sel.shape[0]),
                                        "max_pairing": float(sel[:, 2].max()) if sel.size else math.nan})


# -- continuation ----------------------------------------------------------------------------


@dataclass
class ContinuationPoint:
    omega: float
    ell: int
    degenerate: bool
    mode: str
    report: SolveReport | None
    warm: bool

    def summary(self) -> dict:
        out = {"omega": self.omega, "ell": self.ell, "degenerate": self.degenerate,
               "mode": self.mode, "warm_start": self.warm}
        if self.report is not None:
            out.update(self.report.summary())
        return out


def continuation_in_omega(base: Problem, grid: Grid, omegas, opts: SolverOptions = SolverOptions(),
                          K: int = 20, warm: bool = True) -> list[ContinuationPoint]:
    """Solve along V = U - omega, switching search mode with ell."""
    omegas = list(omegas)
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega list must be increasing")
    points: list[ContinuationPoint] = []
    prev: SolveReport | None = None
    prev_ell = None
    for om in omegas:
        prob = replace(base, potential=base.potential.shifted(om), shift=None).with_grid(grid)
        split = eigenpairs(prob, grid, K)
        if split.degenerate:
            points.append(ContinuationPoint(om, split.ell, True, "skipped", None, False))
            continue
        mode = "mountain-pass" if split.ell == 0 else "local-linking"
        use_warm = bool(warm and prev is not None and prev.converged and prev_ell == split.ell)
        start = prev.v if use_warm else None
        try:
            rep = solve(prob, grid, split, opts, start=start)
        except SolverError as exc:
            log.warning("omega=%g: %s", om, exc)
            rep = None
        points.append(ContinuationPoint(om, split.ell, False, mode, rep, use_warm))
        if rep is not None:
            prev, prev_ell = rep, split.ell
    return points
