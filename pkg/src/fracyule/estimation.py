"""Method-of-moments estimation of ``(nu, lam)`` from inter-birth times.

Two procedures, both reduced to a one-dimensional bracketed root in ``nu``:

* log moments: ``E ln T_i = -ln(i lam)/nu - gamma`` and
  ``E (ln T_i)**2 = pi**2 (1/(3 nu**2) - 1/6) + (ln(i lam)/nu + gamma)**2``;
* fractional moments: ``E T_i**kappa = C(kappa, nu) / (i lam)**(kappa/nu)`` for
  two exponents ``0 < kappa1 < kappa2 < nu``.

The sample side averages over the birth index ``i = 1..n``.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator
from sklearn.utils import check_array

from .distributions import EULER_GAMMA
from .exceptions import DegenerateDataError, DomainError, KappaTooLargeError, NoRootError

__all__ = [
    "EstimationResult",
    "NU_BRACKET",
    "SOLVER_TOL",
    "DEFAULT_KAPPAS",
    "bisect",
    "log_moment_residual",
    "solve_log_moments",
    "solve_fractional_moments",
    "estimate_log_moments",
    "estimate_fractional_moments",
    "LogMomentEstimator",
    "FractionalMomentEstimator",
]

NU_BRACKET = (0.01, 1.2)
SOLVER_TOL = 1e-10
DEFAULT_KAPPAS = (0.05, 0.10)

_PI2 = math.pi**2


@dataclass(frozen=True)
class EstimationResult:
    """Point estimates with solver diagnostics.

    ``nu_hat`` is reported raw; values above 1 are possible.
    """

    nu_hat: float
    lambda_hat: float
    method: str
    n: int
    converged: bool
    iterations: int
    residual: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def bisect(func, lo, hi, max_iter=400):
    """Bisection on a sign change of ``func`` over ``[lo, hi]``.

    Halves the bracket until it can no longer be split in floating point (or
    hits an exact zero) and returns ``(root, iterations, residual)`` for the
    best midpoint seen.  Callers treat ``residual <= tol`` as convergence;
    running past that point costs a few evaluations and buys full precision.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo, 0, 0.0
    if f_hi == 0.0:
        return hi, 0, 0.0
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoRootError(
            f"no sign change on [{lo}, {hi}]: residuals {f_lo:.6g}, {f_hi:.6g}",
            residual_low=f_lo,
            residual_high=f_hi,
        )
    best = (lo, abs(f_lo)) if abs(f_lo) < abs(f_hi) else (hi, abs(f_hi))
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return best[0], it, best[1]
        f_mid = func(mid)
        if abs(f_mid) < best[1]:
            best = (mid, abs(f_mid))
        if f_mid == 0.0:
            return mid, it, 0.0
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return best[0], max_iter, best[1]


def _as_durations(durations):
    t = check_array(durations, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    t = t.ravel()
    if t.size < 2:
        raise DegenerateDataError(f"need at least 2 durations, got {t.size}")
    if np.any(t <= 0.0):
        raise DomainError("durations must be strictly positive")
    return t


def _check_log_durations(log_t):
    log_t = np.asarray(log_t, dtype=float).ravel()
    if log_t.size < 2:
        raise DegenerateDataError(f"need at least 2 durations, got {log_t.size}")
    if not np.all(np.isfinite(log_t)):
        raise DomainError("log-durations must be finite")
    if np.all(log_t == log_t[0]):
        raise DegenerateDataError("all durations are equal; moments cannot identify (nu, lam)")
    return log_t


# ---------------------------------------------------------------------------
# log moments


def _index_log_stats(n):
    log_i = np.log(np.arange(1, n + 1))
    h = math.fsum(log_i) / n
    d = math.fsum((log_i - h) ** 2) / n
    return log_i, h, d


def log_moment_residual(nu, mean_log, mean_log_sq, n, form="centered"):
    """Second-moment equation after eliminating ``lam`` through the first.

    ``form="raw"`` compares the uncentered sample moment ``mean_log_sq`` with
    its model value term by term; ``form="centered"`` is the same equation
    rewritten around the sample variance, which is better conditioned.
    """
    log_i, h, d = _index_log_stats(n)
    if form == "raw":
        log_lam = -nu * (mean_log + EULER_GAMMA) - h
        c = (log_i + log_lam) / nu + EULER_GAMMA
        model = _PI2 * (1.0 / (3.0 * nu * nu) - 1.0 / 6.0) + math.fsum(c * c) / n
        return model - mean_log_sq
    if form == "centered":
        s2 = mean_log_sq - mean_log * mean_log
        return (_PI2 / 3.0 + d) / (nu * nu) - _PI2 / 6.0 - s2
    raise ValueError(f"form must be 'raw' or 'centered', got {form!r}")


def solve_log_moments(mean_log, mean_log_sq, n, *, bracket=NU_BRACKET, tol=SOLVER_TOL):
    """Invert the log-moment equations given the two sample moments of ``ln T_i``."""
    n = int(n)
    _, h, d = _index_log_stats(n)
    s2 = mean_log_sq - mean_log * mean_log

    def residual(nu):
        return (_PI2 / 3.0 + d) / (nu * nu) - _PI2 / 6.0 - s2

    nu, iters, res = bisect(residual, bracket[0], bracket[1])
    log_lam = -nu * (mean_log + EULER_GAMMA) - h
    return EstimationResult(
        nu_hat=float(nu),
        lambda_hat=math.exp(log_lam),
        method="log_moment",
        n=n,
        converged=bool(res <= tol),
        iterations=iters,
        residual=float(res),
        diagnostics={"above_one": bool(nu > 1.0)},
    )


def _log_moment_stats(log_t):
    n = log_t.size
    mean_log = math.fsum(log_t) / n
    # second moment assembled around the mean so the centered residual keeps its digits
    dev = log_t - mean_log
    mean_log_sq = math.fsum(dev * dev) / n + mean_log * mean_log
    return mean_log, mean_log_sq


def estimate_log_moments(durations, *, log_durations=None, bracket=NU_BRACKET, tol=SOLVER_TOL):
    """Log-moment estimates from sojourns ordered by birth index.

    ``log_durations`` may be passed instead of ``durations`` when the
    sojourns were generated in log space (very small ``nu`` can push
    ``T_i`` outside the double range).
    """
    if log_durations is None:
        log_t = np.log(_as_durations(durations))
    else:
        log_t = log_durations
    log_t = _check_log_durations(log_t)
    mean_log, mean_log_sq = _log_moment_stats(log_t)
    return solve_log_moments(mean_log, mean_log_sq, log_t.size, bracket=bracket, tol=tol)


# ---------------------------------------------------------------------------
# fractional moments


def _log_moment_factor(kappa, nu):
    # ln E[T**kappa] for unit rate, T = V**(1/nu) S with V ~ Exp(1)
    r = kappa / nu
    return special.gammaln(1.0 - r) + special.gammaln(1.0 + r) - special.gammaln(1.0 - kappa)


def _check_kappas(kappa1, kappa2):
    if not 0.0 < kappa1 < kappa2 < 1.0:
        raise DomainError(f"need 0 < kappa1 < kappa2 < 1, got {kappa1!r}, {kappa2!r}")


def solve_fractional_moments(
    m1, m2, n, kappa1=DEFAULT_KAPPAS[0], kappa2=DEFAULT_KAPPAS[1], *, bracket=NU_BRACKET, tol=SOLVER_TOL
):
    """Invert ``mean_i T_i**k = C(k, nu) lam**(-k/nu) mean_i i**(-k/nu)`` for ``k = kappa1, kappa2``.

    ``m1``, ``m2`` are the sample means of ``T**kappa1`` and ``T**kappa2``;
    ``C(k, nu) = Gamma(1 - k/nu) Gamma(1 + k/nu) / Gamma(1 - k)``.  ``lam`` is
    eliminated between the two equations and the remaining equation in
    ``nu`` is bisected on ``(kappa2, bracket[1]]``.
    """
    _check_kappas(kappa1, kappa2)
    if not (m1 > 0.0 and m2 > 0.0):
        raise DomainError("fractional sample moments must be positive")
    n = int(n)
    log_idx = np.log(np.arange(1, n + 1, dtype=float))
    log_m = {kappa1: math.log(m1), kappa2: math.log(m2)}

    def log_lam(kappa, nu):
        r = kappa / nu
        log_h = math.log(math.fsum(np.exp(-r * log_idx)) / n)
        return (_log_moment_factor(kappa, nu) + log_h - log_m[kappa]) / r

    def residual(nu):
        return log_lam(kappa1, nu) - log_lam(kappa2, nu)

    # the kappa2 moment blows up as nu -> kappa2, pushing the residual to -inf
    lo = max(bracket[0], kappa2 * (1.0 + 1e-12))
    nu, iters, res = bisect(residual, lo, bracket[1])
    if nu <= lo * (1.0 + 1e-9):
        raise KappaTooLargeError(
            f"fitted nu sits at the lower edge kappa2={kappa2}; the kappa2 moment does not exist"
        )
    lam = math.exp(log_lam(kappa2, nu))
    return EstimationResult(
        nu_hat=float(nu),
        lambda_hat=lam,
        method="fractional_moment",
        n=n,
        converged=bool(res <= tol),
        iterations=iters,
        residual=float(res),
        diagnostics={
            "kappa1": kappa1,
            "kappa2": kappa2,
            "above_one": bool(nu > 1.0),
            # the sample mean of T**kappa2 has infinite variance unless 2 kappa2 < nu
            "kappa_warning": bool(nu <= 2.0 * kappa2),
        },
    )


def estimate_fractional_moments(
    durations,
    kappa1=DEFAULT_KAPPAS[0],
    kappa2=DEFAULT_KAPPAS[1],
    *,
    log_durations=None,
    bracket=NU_BRACKET,
    tol=SOLVER_TOL,
):
    """Fractional-moment estimates from sojourns ordered by birth index."""
    _check_kappas(kappa1, kappa2)
    if log_durations is None:
        log_t = np.log(_as_durations(durations))
    else:
        log_t = log_durations
    log_t = _check_log_durations(log_t)
    n = log_t.size
    m1 = math.fsum(np.exp(kappa1 * log_t)) / n
    m2 = math.fsum(np.exp(kappa2 * log_t)) / n
    return solve_fractional_moments(m1, m2, n, kappa1, kappa2, bracket=bracket, tol=tol)


# ---------------------------------------------------------------------------
# estimator objects


class _MomentEstimator(BaseEstimator):
    def _fit_result(self, t):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Fit on a 1-D array (or single column) of sojourns in birth order."""
        t = _as_durations(X)
        self.result_ = self._fit_result(t)
        self.nu_ = self.result_.nu_hat
        self.lambda_ = self.result_.lambda_hat
        self.n_samples_ = t.size
        return self


class LogMomentEstimator(_MomentEstimator):
    """Log-moment estimator of ``(nu, lam)``; needs no tuning constants."""

    def __init__(self, bracket=NU_BRACKET, tol=SOLVER_TOL):
        self.bracket = bracket
        self.tol = tol

    def _fit_result(self, t):
        return estimate_log_moments(t, bracket=self.bracket, tol=self.tol)


class FractionalMomentEstimator(_MomentEstimator):
    """Fractional-moment estimator with exponents ``kappa1 < kappa2 < nu``."""

    def __init__(self, kappa1=DEFAULT_KAPPAS[0], kappa2=DEFAULT_KAPPAS[1], bracket=NU_BRACKET, tol=SOLVER_TOL):
        self.kappa1 = kappa1
        self.kappa2 = kappa2
        self.bracket = bracket
        self.tol = tol

    def _fit_result(self, t):
        return estimate_fractional_moments(t, self.kappa1, self.kappa2, bracket=self.bracket, tol=self.tol)
