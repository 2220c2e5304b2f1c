"""Change of variables u = f(v) for the quasilinear term.

``f`` is the odd solution of ``f'(t) = 1/sqrt(1 + 2 f(t)^2)``, ``f(0) = 0``.
Its inverse has the closed form

    F(u) = u sqrt(1 + 2u^2) / 2 + asinh(sqrt(2) u) / (2 sqrt(2)),

so ``f`` is evaluated by a safeguarded Newton iteration on ``F(u) = |t|``.
All evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .checks import PropertyCheck, PropertyReport

SQRT2 = math.sqrt(2.0)
TWO_QUARTER = 2.0**0.25


class TransformError(ArithmeticError):
    """Raised when f cannot be evaluated (non-finite input, no convergence)."""


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise TransformError("transform evaluated at a non-finite argument")


def _F(u):
    """Closed-form inverse of f on u >= 0 (also valid for u < 0, odd)."""
    return 0.5 * u * np.sqrt(1.0 + 2.0 * u * u) + np.arcsinh(SQRT2 * u) / (2.0 * SQRT2)


def _F_asymptotic_inverse(t: np.ndarray) -> np.ndarray:
    # F(u) = u^2/sqrt2 + (1 + 2 ln(2 sqrt2 u)) / (4 sqrt2) + O(u^-2)
    u = np.sqrt(SQRT2 * t)
    for _ in range(3):
        u = np.sqrt(SQRT2 * t - 0.25 * (1.0 + 2.0 * np.log(2.0 * SQRT2 * u)))
    return u


@dataclass(frozen=True)
class TransformTable:
    """Evaluator for f, f', f'' and f^{-1}.

    Parameters
    ----------
    newton_tol : float
        Relative step tolerance of the Newton inversion.
    max_newton_iter : int
        Iteration cap for Newton (bisection steps included).
    asymptotic_switch : float
        Above this |t| the two-term large-u expansion of F is inverted
        instead of running Newton.
    """

    newton_tol: float = 1e-15
    max_newton_iter: int = 60
    asymptotic_switch: float = 1e8

    # -- inverse -----------------------------------------------------------
    def f_inverse(self, u):
        u_arr = np.asarray(u, dtype=float)
        _check_finite(u_arr)
        out = _F(u_arr)
        return float(out) if np.ndim(u) == 0 else out

    # -- f ---------------------------------------------------------------------
    def f(self, t):
        t_arr = np.asarray(t, dtype=float)
        _check_finite(t_arr)
        a = np.abs(np.atleast_1d(t_arr)).astype(float)
        u = np.empty_like(a)

        big = a > self.asymptotic_switch
        if np.any(big):
            u[big] = _F_asymptotic_inverse(a[big])
        small = ~big
        if np.any(small):
            u[small] = self._newton(a[small])

        out = np.sign(np.atleast_1d(t_arr)) * u
        if np.ndim(t) == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def _newton(self, a: np.ndarray) -> np.ndarray:
        # F is convex and increasing on [0, inf), and both |t| and
        # 2^{1/4}|t|^{1/2} bound f(|t|) from above, so Newton from the upper
        # bracket end decreases monotonically. Bisection guards round-off.
        hi = np.minimum(a, TWO_QUARTER * np.sqrt(a))
        lo = np.zeros_like(a)
        u = np.where(a <= 1.0, a, TWO_QUARTER * np.sqrt(a))
        u = np.minimum(u, hi)
        for _ in range(self.max_newton_iter):
            r = _F(u) - a
            hi = np.where(r > 0.0, np.minimum(hi, u), hi)
            lo = np.where(r < 0.0, np.maximum(lo, u), lo)
            new = u - r / np.sqrt(1.0 + 2.0 * u * u)
            outside = ((new < lo) | (new > hi)) & (r != 0.0)
            if np.any(outside):
                new = np.where(outside, 0.5 * (lo + hi), new)
            step = np.abs(new - u)
            u = new
            if np.all(step <= self.newton_tol * u):
                return u
        raise TransformError(
            f"Newton inversion did not converge in {self.max_newton_iter} iterations"
        )

    # -- derivatives -------------------------------------------------------
    def f_prime(self, t, fv=None):
        fv = self.f(t) if fv is None else fv
        if np.ndim(fv) == 0:
            return 1.0 / math.sqrt(1.0 + 2.0 * fv * fv)
        return 1.0 / np.sqrt(1.0 + 2.0 * fv * fv)

    def f_second(self, t, fv=None):
        """f''(t) = -2 f f' / (1 + 2 f^2)^{3/2} = -2 f f'^4."""
        fv = self.f(t) if fv is None else fv
        fp = self.f_prime(t, fv)
        return -2.0 * fv * fp**4

    def evaluate(self, t):
        """Return ``(f, f', f'')`` at ``t`` sharing one inversion."""
        fv = self.f(t)
        fp = self.f_prime(t, fv)
        return fv, fp, -2.0 * fv * fp**4

    # -- constants ---------------------------------------------------------
    @property
    def kappa(self) -> float:
        """Sharp constant in |f(t)| >= kappa min(|t|, |t|^{1/2}); equals f(1)."""
        return self.f(1.0)

    @staticmethod
    def c_lambda(lam: float) -> float:
        """Sharp constant with f(lam t)^2 <= C f(t)^2 for all t."""
        if lam <= 0:
            raise ValueError("lambda must be positive")
        return max(lam, lam * lam)


DEFAULT = TransformTable()

f = DEFAULT.f
f_prime = DEFAULT.f_prime
f_second = DEFAULT.f_second
f_inverse = DEFAULT.f_inverse


# -- property verification ---------------------------------------------------


def _worst(slack: np.ndarray) -> float:
    return float(np.min(slack)) if slack.size else 0.0


def verify_transform_bounds(samples, *, rel_tol: float = 1e-12, lam: float = 2.0,
              table: TransformTable = DEFAULT) -> PropertyReport:
    """Check the inequalities satisfied by f at the sample points.

    Slacks are relative: a check passes when every slack is >= -rel_tol.
    Reported estimates are the empirical kappa (min of f(t)/t on |t|<=1 and
    f(t)/sqrt|t| on |t|>=1) and the empirical sup of f(lam t)^2 / f(t)^2.
    """
    t = np.asarray(samples, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("samples must be non-empty")
    _check_finite(t)
    t = t[t != 0.0]
    at = np.abs(t)
    fv, fp, _ = table.evaluate(t)
    af = np.abs(fv)
    checks: list[PropertyCheck] = []

    def add(name, slack, detail=""):
        w = _worst(slack)
        checks.append(PropertyCheck(name, bool(w >= -rel_tol), w, True, detail))

    ts = np.unique(t)
    fs = table.f(ts)
    add("monotone", np.diff(fs) / np.maximum(np.abs(fs[1:]), np.abs(fs[:-1])))
    add("|f|<=|t|", (at - af) / at)
    add("0<f'<=1", np.minimum(1.0 - fp, np.where(fp > 0.0, fp, -1.0)))
    pos = t > 0
    add("f/2<=f't", (fp[pos] * t[pos] - 0.5 * fv[pos]) / fv[pos])
    add("f't<=f", (fv[pos] - fp[pos] * t[pos]) / fv[pos])
    add("f^2>=f f' t", (fv * fv - fv * fp * t) / (fv * fv))
    bound = TWO_QUARTER * np.sqrt(at)
    add("|f|<=2^(1/4)|t|^(1/2)", (bound - af) / bound)

    kappa = table.kappa
    lo = at <= 1.0
    scale = np.where(lo, at, np.sqrt(at))
    add("|f|>=kappa*scale", (af - kappa * scale) / af, f"kappa={kappa:.12g}")
    kappa_hat = float(np.min(af / scale))

    ratio = table.f(lam * t) ** 2 / fv**2
    c_lam = table.c_lambda(lam)
    add(f"C_lambda(lam={lam:g})", (c_lam - ratio) / c_lam, f"C={c_lam:g}")
    return PropertyReport(checks, {"kappa_hat": kappa_hat, "kappa": kappa,
                                   "C_lambda_hat": float(np.max(ratio)), "C_lambda": c_lam})


def verify_transfer_inequality(gshift, samples, *, rel_tol: float = 1e-12,
              table: TransformTable = DEFAULT) -> PropertyReport:
    """Check g(f(s)) f'(s) s >= g(f(s)) f(s) / 2 for a sign-condition g.

    ``gshift`` is any vectorised callable.  When ``gshift(s) s >= 0`` fails
    on the samples the inequality is reported as not applicable.
    """
    s = np.asarray(samples, dtype=float).ravel()
    _check_finite(s)
    fv, fp, _ = table.evaluate(s)
    g_s = np.asarray(gshift(s), dtype=float)
    g_f = np.asarray(gshift(fv), dtype=float)
    sign_ok = bool(np.all(g_s * s >= 0.0) and np.all(g_f * fv >= 0.0))
    if not sign_ok:
        return PropertyReport(
            [PropertyCheck("transfer", False, float("nan"), False, "precondition g(s)s>=0 violated")], {})
    lhs = g_f * fp * s
    rhs = 0.5 * g_f * fv
    scale = np.maximum(np.abs(rhs), np.finfo(float).tiny)
    slack = np.where(rhs == 0.0, lhs - rhs, (lhs - rhs) / scale)
    w = _worst(slack)
    return PropertyReport([PropertyCheck("transfer", bool(w >= -rel_tol), w)], {})
