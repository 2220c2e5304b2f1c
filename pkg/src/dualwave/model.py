"""Problem data: potential, nonlinearity, shift, and hypothesis checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate as spi

from .checks import PropertyCheck, PropertyReport

log = logging.getLogger(__name__)

Array = np.ndarray


class ConfigError(ValueError):
    """Problem definition cannot be used (bad parameters, unbounded potential)."""


# -- potential -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Potential:
    """Radial (or 1D) potential profile ``V(x)``.

    ``kind`` is one of ``harmonic`` (x^2 - omega), ``quartic`` (x^4 - omega),
    ``constant`` or ``table`` (piecewise-linear interpolation of samples,
    held constant outside the table).
    """

    kind: str
    evaluator: Callable[[Array], Array] = field(repr=False)
    declared_inf: float
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def harmonic(cls, omega: float = 0.0, scale: float = 1.0) -> "Potential":
        return cls("harmonic", lambda x: scale * x * x - omega, -omega,
                   {"omega": omega, "scale": scale})

    @classmethod
    def quartic(cls, omega: float = 0.0) -> "Potential":
        return cls("quartic", lambda x: x**4 - omega, -omega, {"omega": omega})

    @classmethod
    def constant(cls, value: float) -> "Potential":
        return cls("constant", lambda x: np.full_like(x, value), value, {"value": value})

    @classmethod
    def table(cls, xs, values) -> "Potential":
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ConfigError("table potential needs increasing abscissae and matching values")
        return cls("table", lambda x: np.interp(x, xs, vs), float(vs.min()),
                   {"x": xs.tolist(), "V": vs.tolist()})

    def shifted(self, omega: float) -> "Potential":
        """``V - omega`` (frequency shift of a base potential)."""
        base = self
        return Potential(self.kind, lambda x: base(x) - omega, self.declared_inf - omega,
                         {**self.params, "omega": self.params.get("omega", 0.0) + omega})

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


# -- nonlinearity --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Autonomous nonlinearity ``g`` with primitive ``G`` and derivative ``dg``.

    ``C`` and ``p`` are the growth constants in |g(t)| <= C(|t| + |t|^{p-1}),
    ``mu`` the superlinearity constant in 0 < mu G(t) <= t g(t).
    """

    kind: str
    g: Callable[[Array], Array] = field(repr=False)
    G: Callable[[Array], Array] = field(repr=False)
    dg: Callable[[Array], Array] | None = field(repr=False)
    p: float
    mu: float
    C: float = 1.0
    odd: bool = True
    params: dict = field(default_factory=dict)

    @classmethod
    def power(cls, p: float, mu: float | None = None) -> "Nonlinearity":
        """``g(t) = |t|^{p-2} t``."""
        mu = p if mu is None else mu
        return cls(
            "power",
            lambda t: np.abs(t) ** (p - 2) * t,
            lambda t: np.abs(t) ** p / p,
            lambda t: (p - 1) * np.abs(t) ** (p - 2),
            p=p, mu=mu, C=1.0, odd=True, params={"p": p},
        )

    @classmethod
    def double_power(cls, p: float, q: float, a: float = 1.0, b: float = 1.0,
                     mu: float | None = None) -> "Nonlinearity":
        """``g(t) = a|t|^{p-2}t + b|t|^{q-2}t`` with ``2 <= p <= q``."""
        if not 2 <= p <= q:
            raise ConfigError("double_power needs 2 <= p <= q")
        mu = p if mu is None else mu
        return cls(
            "double_power",
            lambda t: a * np.abs(t) ** (p - 2) * t + b * np.abs(t) ** (q - 2) * t,
            lambda t: a * np.abs(t) ** p / p + b * np.abs(t) ** q / q,
            lambda t: a * (p - 1) * np.abs(t) ** (p - 2) + b * (q - 1) * np.abs(t) ** (q - 2),
            p=q, mu=mu, C=a + b, odd=True, params={"p": p, "q": q, "a": a, "b": b},
        )

    @classmethod
    def zero(cls) -> "Nonlinearity":
        """``g = 0``; violates the superlinearity hypothesis, used for checks."""
        z = lambda t: np.zeros_like(np.asarray(t, dtype=float))  # noqa: E731
        return cls("zero", z, z, z, p=6.0, mu=6.0, C=0.0, odd=True)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, **self.params}


def critical_exponent(dimension: int) -> float:
    """Upper bound ``2 * 2^*`` for the growth exponent p."""
    return math.inf if dimension <= 2 else 2.0 * (2.0 * dimension / (dimension - 2))


# -- problem -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Problem:
    potential: Potential
    nonlinearity: Nonlinearity
    dimension: int = 1
    shift: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigError("dimension must be 1, 2 or 3")
        if self.shift is not None and self.shift < 0:
            raise ConfigError("shift m must be nonnegative")

    def with_grid(self, grid) -> "Problem":
        """Copy with the shift resolved on ``grid`` when it was left automatic."""
        if self.shift is not None:
            return self
        return replace(self, shift=choose_shift(self.potential, grid))

    @property
    def m(self) -> float:
        if self.shift is None:
            raise ConfigError("shift is unresolved; call Problem.with_grid(grid) first")
        return self.shift

    def potential_values(self, grid) -> Array:
        return self.potential(grid.x)

    def shifted_potential_values(self, grid) -> Array:
        return self.potential(grid.x) + self.m

    # shifted nonlinearity
    def g_shift(self, t):
        return self.nonlinearity.g(t) + self.m * t

    def G_shift(self, t):
        return self.nonlinearity.G(t) + 0.5 * self.m * t * t

    def dg_shift(self, t):
        if self.nonlinearity.dg is None:
            raise ConfigError("nonlinearity has no derivative")
        return self.nonlinearity.dg(t) + self.m

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "potential": self.potential.to_dict(),
            "nonlinearity": self.nonlinearity.to_dict(),
            "dimension": self.dimension,
            "shift": self.shift,
        }


def choose_shift(potential: Potential, grid) -> float:
    """Smallest nonnegative shift with ``min(V + m) >= 2`` on the grid."""
    vmin = float(np.min(potential(grid.x)))
    if not math.isfinite(vmin) or vmin < -1e12:
        raise ConfigError(f"potential appears unbounded below on the grid (min {vmin:g})")
    return max(0.0, 2.0 - vmin)


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class SamplingPlan:
    t_min: float = 1e-8
    t_max: float = 1e8
    count: int = 10_000
    quad_points: int = 24

    def samples(self) -> Array:
        t = np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.count)
        return np.concatenate([-t[::-1], t])


def _rel(slack, scale):
    scale = np.maximum(np.abs(scale), np.finfo(float).tiny)
    return slack / scale


def validate(problem: Problem, grid, plan: SamplingPlan = SamplingPlan(),
             rel_tol: float = 1e-12) -> PropertyReport:
    """Sampling-based verdicts on the hypotheses imposed on V and g."""
    nl = problem.nonlinearity
    t = plan.samples()
    checks: list[PropertyCheck] = []

    def add(name, worst, passed, detail="", applicable=True):
        checks.append(PropertyCheck(name, bool(passed), float(worst), applicable, detail))

    # potential: bounded below and confining on the truncated domain
    v = problem.potential(grid.x)
    inf = problem.potential.declared_inf
    add("potential:bounded_below", v.min() - (inf - 1e-9), v.min() >= inf - 1e-9,
        f"min={v.min():.6g} declared_inf={inf:.6g}")
    boundary = v[grid.dirichlet] if grid.dirichlet.size else v[-1:]
    add("potential:confining", boundary.max() - v.max(), boundary.max() >= v.max() - 1e-12,
        f"V(boundary)={boundary.max():.6g}")
    if problem.shift is not None:
        vt_min = float(np.min(v + problem.shift))
        add("potential:shift", vt_min - 1.0, vt_min > 1.0, f"min(V+m)={vt_min:.6g}")

    # growth bound and exponent range
    pcrit = critical_exponent(problem.dimension)
    add("growth:exponent", min(nl.p - 4.0, pcrit - nl.p), 4.0 < nl.p < pcrit,
        f"p={nl.p:g} range=(4,{pcrit:g})")
    gt = nl.g(t)
    bound = nl.C * (np.abs(t) + np.abs(t) ** (nl.p - 1))
    w = float(np.min(_rel(bound - np.abs(gt), bound)))
    add("growth:bound", w, w >= -rel_tol, f"C={nl.C:g}")
    if problem.dimension == 1:
        log.info("N = 1: embedding hypotheses are taken on the same framework")

    # superlinearity: 0 < mu G(t) <= t g(t)
    Gt = nl.G(t)
    pos = float(np.min(_rel(nl.mu * Gt, np.abs(t * gt) + np.abs(nl.mu * Gt))))
    ineq = float(np.min(_rel(t * gt - nl.mu * Gt, np.abs(t * gt))))
    add("superlinear:mu>4", nl.mu - 4.0, nl.mu > 4.0, f"mu={nl.mu:g}")
    add("superlinear:mu*G>0", pos, bool(np.all(nl.mu * Gt > 0)))
    add("superlinear:mu*G<=t*g", ineq, ineq >= -rel_tol)

    # behaviour at the origin: g(t)/t -> 0
    small = 10.0 ** -np.arange(2, 9)
    ratio = np.abs(nl.g(small) / small)
    decreasing = bool(np.all(np.diff(ratio) <= 1e-15 + 1e-12 * ratio[:-1]))
    add("origin:g(t)/t->0", -ratio[-1], decreasing and ratio[-1] < 1e-6,
        "ratios=" + ",".join(f"{r:.2e}" for r in ratio))

    # G = int_0^t g
    tq = np.logspace(-3, 3, plan.quad_points)
    tq = np.concatenate([-tq, tq])
    worst = 0.0
    for ti in tq:
        val, _ = spi.quad(lambda s: float(nl.g(np.array(s))), 0.0, ti, epsabs=0.0, epsrel=1e-12, limit=200)
        ref = float(nl.G(np.array(ti)))
        if ref != 0.0 or val != 0.0:
            worst = max(worst, abs(val - ref) / max(abs(ref), abs(val)))
    add("G:primitive", -worst, worst <= 1e-8)

    # (ge): Gt - gt t / mu <= (1/2 - 1/mu) m t^2
    if problem.shift is not None:
        m = problem.shift
        lhs = problem.G_shift(t) - problem.g_shift(t) * t / nl.mu
        rhs = (0.5 - 1.0 / nl.mu) * m * t * t
        w = float(np.min(_rel(rhs - lhs, np.abs(rhs) + np.abs(problem.G_shift(t)))))
        add("ge", w, w >= -rel_tol)

    return PropertyReport(checks, {"p_max": pcrit})
