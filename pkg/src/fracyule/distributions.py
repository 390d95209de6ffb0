"""Closed-form laws of the fractional Yule process (fYp).

The fYp ``N(t)`` starts from one individual and has state probabilities
``p_k(t) = sum_{l=1}^k C(k-1, l-1) (-1)**(l-1) E_{nu,1}(-lam l t**nu)``.
Signed binomial sums of this kind cancel for large ``k``; every such sum
here is accumulated with :func:`math.fsum` and its loss of significance is
measured.  When the loss exceeds :data:`MAX_DIGITS_LOST` the value is
either recomputed from the random-rate mixture

    p_k(t) = int_0^inf exp(-lam xi t**nu) (1 - exp(-lam xi t**nu))**(k-1) M_nu(xi) dxi,

whose integrand is non-negative, or a :class:`CancellationError` is raised.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .exceptions import CancellationError, DomainError, MLOverflowError, SeriesDivergenceError
from .specfun import mittag_leffler, wright_m_density

__all__ = [
    "FypParams",
    "StatePmf",
    "ALTERNATING_CAP",
    "MAX_DIGITS_LOST",
    "EULER_GAMMA",
    "state_pmf",
    "state_pmf_mixture",
    "wright_mixture",
    "population_mean",
    "population_variance",
    "sojourn_distribution",
    "waiting_distribution",
    "conditional_state_pmf",
    "fractional_moment",
    "log_moments",
]

#: Largest k evaluated by the alternating sum.
ALTERNATING_CAP = 40

#: Decimal digits an alternating sum may lose relative to its result.
MAX_DIGITS_LOST = 6.0

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class FypParams:
    """Fractional order ``nu`` in (0, 1] and birth intensity ``lam`` > 0."""

    nu: float
    lam: float

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"nu must lie in (0, 1], got {self.nu!r}")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise DomainError(f"lam must be positive and finite, got {self.lam!r}")

    @property
    def classical(self):
        return self.nu == 1.0


@dataclass(frozen=True)
class StatePmf:
    """``probs[k-1] = P(N(t) = k)`` for ``k = 1..k_max``.

    ``tail_mass`` is ``P(N(t) > k_max)`` computed independently by
    quadrature, so ``probs.sum() + tail_mass`` is a genuine check on 1.
    ``sources`` says which evaluator produced each entry and
    ``mixture_error`` is the quadrature's absolute error estimate.
    """

    params: FypParams
    t: float
    probs: np.ndarray
    tail_mass: float
    sources: tuple = field(default=())
    digits_lost: np.ndarray = field(default=None, repr=False)
    mixture_error: float = 0.0

    @property
    def k(self):
        return np.arange(1, len(self.probs) + 1)

    @property
    def total(self):
        return math.fsum(self.probs) + self.tail_mass


def _check_time(t, allow_zero=False):
    t = float(t)
    if not math.isfinite(t) or t < 0.0 or (t == 0.0 and not allow_zero):
        raise DomainError(f"time must be {'>= 0' if allow_zero else '> 0'} and finite, got {t!r}")
    return t


def _check_index(i, name):
    if int(i) != i or i < 1:
        raise DomainError(f"{name} must be an integer >= 1, got {i!r}")
    return int(i)


def _digits_lost(magnitude, value):
    if magnitude == 0.0:
        return 0.0
    if value == 0.0:
        return math.inf
    return max(math.log10(magnitude / abs(value)), 0.0)


def _signed_sum(terms):
    """Exactly rounded sum and the decimal digits lost to cancellation.

    The loss is ``log10(sum|terms| / |sum|)``: the rounding error of the
    terms, relative to the result.
    """
    value = math.fsum(terms)
    return value, _digits_lost(math.fsum(abs(x) for x in terms), value)


# ---------------------------------------------------------------------------
# mixture over the M-Wright law


@functools.lru_cache(maxsize=64)
def _wright_support(nu):
    """Point past which the M-Wright density underflows to zero."""
    x = 2.0
    while wright_m_density(nu, x) > 0.0:
        x *= 1.5
    return x


def wright_mixture(func, nu, *, epsrel=1e-11, epsabs=1e-15):
    """``int_0^inf func(xi) M_nu(xi) dxi`` for a (possibly vector-valued) ``func``.

    At ``nu = 1`` the mixing law is a point mass at 1 and ``func(1.0)`` is
    returned.  Returns ``(value, abserr)`` with the quadrature's error estimate.
    """
    if nu == 1.0:
        return np.asarray(func(1.0), dtype=float), 0.0
    upper = _wright_support(nu)

    def integrand(xi):
        w = wright_m_density(nu, xi)
        if w == 0.0:
            return np.zeros_like(np.asarray(func(1.0), dtype=float))
        return np.asarray(func(xi), dtype=float) * w

    pieces = [(0.0, 1.0), (1.0, upper)]
    total, err = 0.0, 0.0
    for a, b in pieces:
        val, e = integrate.quad_vec(integrand, a, b, epsabs=epsabs, epsrel=epsrel, norm="max", limit=400)
        total = total + val
        err += e
    return np.asarray(total, dtype=float), err


def _yule_pmf_rows(ks, rate_time):
    """Classical Yule pmf ``e^{-x}(1-e^{-x})^{k-1}`` for all ``ks`` at ``x = rate_time``."""
    ks = np.asarray(ks, dtype=float)
    q = -math.expm1(-rate_time)
    if q == 0.0:
        return np.where(ks == 1, 1.0, 0.0)
    return np.exp(-rate_time + (ks - 1.0) * math.log(q))


def _mixture_tail_and_probs(params, t, ks, tail_k):
    """Mixture values of ``p_k`` for ``ks`` and of ``P(N(t) > tail_k)``."""
    a = params.lam * t**params.nu
    ks = np.asarray(ks, dtype=int)

    def func(xi):
        x = a * xi
        out = np.empty(len(ks) + 1)
        out[:-1] = _yule_pmf_rows(ks, x)
        q = -math.expm1(-x)
        out[-1] = q**tail_k if q > 0.0 else 0.0
        return out

    vals, err = wright_mixture(func, params.nu)
    return vals[:-1], float(vals[-1]), err


def state_pmf_mixture(params, t, k_max):
    """State probabilities from the random-rate mixture only (no alternating sums).

    Used as the fallback evaluator and as an independent check on
    :func:`state_pmf`.
    """
    t = _check_time(t)
    k_max = _check_index(k_max, "k_max")
    ks = np.arange(1, k_max + 1)
    probs, tail, err = _mixture_tail_and_probs(params, t, ks, k_max)
    return StatePmf(params, t, probs, tail, sources=("mixture",) * k_max, mixture_error=err)


def state_pmf(params, t, k_max, *, fallback=True):
    """Probabilities ``P(N(t) = k)`` for ``k = 1..k_max``.

    Each entry is first tried by the alternating binomial sum over
    Mittag-Leffler values.  Entries beyond :data:`ALTERNATING_CAP`, or whose
    sum loses more than :data:`MAX_DIGITS_LOST` digits, are recomputed from
    the mixture representation when ``fallback`` is true and raise
    :class:`CancellationError` otherwise.
    """
    t = _check_time(t)
    k_max = _check_index(k_max, "k_max")
    nu, lam = params.nu, params.lam
    a = lam * t**nu
    n_alt = min(k_max, ALTERNATING_CAP)
    ml = [mittag_leffler(-a * l, nu) for l in range(1, n_alt + 1)]

    probs = np.empty(k_max)
    lost = np.full(k_max, np.inf)
    for k in range(1, n_alt + 1):
        terms = [math.comb(k - 1, l - 1) * (-1.0) ** (l - 1) * ml[l - 1] for l in range(1, k + 1)]
        probs[k - 1], lost[k - 1] = _signed_sum(terms)

    bad = np.flatnonzero(lost > MAX_DIGITS_LOST)
    if len(bad) and not fallback:
        k_bad = int(bad[0]) + 1
        if k_bad > ALTERNATING_CAP:
            msg = f"k_max={k_max} exceeds the alternating-sum cap {ALTERNATING_CAP}"
        else:
            msg = f"p_{k_bad}({t}) lost {lost[bad[0]]:.1f} digits to cancellation"
        raise CancellationError(msg, digits_lost=float(lost[bad[0]]))

    sources = ["alternating"] * k_max
    mix_probs, tail, err = _mixture_tail_and_probs(params, t, bad + 1, k_max)
    for idx, p in zip(bad, mix_probs):
        probs[idx] = p
        sources[idx] = "mixture"
    return StatePmf(
        params, t, probs, max(tail, 0.0), sources=tuple(sources), digits_lost=lost, mixture_error=err
    )


def population_mean(params, t):
    """``E N(t) = E_{nu,1}(lam t**nu)``."""
    t = _check_time(t, allow_zero=True)
    return mittag_leffler(params.lam * t**params.nu, params.nu)


def population_variance(params, t):
    """``Var N(t) = 2 E(2 lam t**nu) - E(lam t**nu) - E(lam t**nu)**2`` with ``E = E_{nu,1}``."""
    t = _check_time(t, allow_zero=True)
    x = params.lam * t**params.nu
    e1 = mittag_leffler(x, params.nu)
    e2 = mittag_leffler(2.0 * x, params.nu)
    return math.fsum([2.0 * e2, -e1, -e1 * e1])


def sojourn_distribution(params, i, t):
    """Density and cdf of the i-th inter-birth time (population i -> i+1).

    ``pdf = i lam t**(nu-1) E_{nu,nu}(-i lam t**nu)``,
    ``cdf = 1 - E_{nu,1}(-i lam t**nu)``.
    """
    i = _check_index(i, "i")
    t = _check_time(t)
    nu = params.nu
    x = i * params.lam * t**nu
    pdf = i * params.lam * t ** (nu - 1.0) * mittag_leffler(-x, nu, nu)
    cdf = -math.expm1(-x) if nu == 1.0 else 1.0 - mittag_leffler(-x, nu)
    return pdf, cdf


def waiting_distribution(params, j, t, *, fallback=True):
    """Density and cdf of the j-th birth time ``W_j = T_1 + ... + T_j``.

    Uses the binomial-collapsed forms

        cdf = sum_{l=0}^{j} C(j, l) (-1)**l E_{nu,1}(-lam l t**nu),
        pdf = sum_{l=1}^{j} C(j, l) (-1)**(l-1) lam l t**(nu-1) E_{nu,nu}(-lam l t**nu),

    of the double sums over ``k <= j``.  On excessive cancellation the
    values come from the mixture ``P(W_j <= t) = P(N(t) > j)`` instead.
    """
    j = _check_index(j, "j")
    t = _check_time(t)
    nu, lam = params.nu, params.lam
    a = lam * t**nu
    if j <= ALTERNATING_CAP:
        cdf_terms = [1.0]
        pdf_terms = []
        for l in range(1, j + 1):
            c = math.comb(j, l) * (-1.0) ** l
            cdf_terms.append(c * mittag_leffler(-a * l, nu))
            pdf_terms.append(-c * lam * l * t ** (nu - 1.0) * mittag_leffler(-a * l, nu, nu))
        cdf, lost_c = _signed_sum(cdf_terms)
        pdf, lost_p = _signed_sum(pdf_terms)
        lost = max(lost_c, lost_p)
        if lost <= MAX_DIGITS_LOST:
            return pdf, cdf
    else:
        lost = math.inf
    if not fallback:
        raise CancellationError(f"waiting-time sums for j={j} lost {lost:.1f} digits", digits_lost=lost)
    da = nu * lam * t ** (nu - 1.0)

    def func(xi):
        x = a * xi
        q = -math.expm1(-x)
        return np.array([j * q ** (j - 1) * math.exp(-x) * xi * da, q**j])

    (pdf, cdf), _ = wright_mixture(func, nu)
    return float(pdf), float(cdf)


# ---------------------------------------------------------------------------
# mixed non-homogeneous Poisson representation

#: Range of (omega, k) in which the l-series for q_k is evaluated.
Q_SERIES_ENVELOPE = (5.0, 15)


def _conditional_series(params, omega, t, k, series_terms):
    omega_max, k_lim = Q_SERIES_ENVELOPE
    if omega > omega_max or k > k_lim:
        raise CancellationError(
            f"q_k series outside its stable envelope (omega <= {omega_max}, k <= {k_lim})"
        )
    nu, lam = params.nu, params.lam
    a = lam * t**nu
    prefactor = math.exp(omega) * (-omega) ** (k - 1) / math.factorial(k - 1)
    total, magnitude, small_run = [], [], 0
    for l in range(series_terms):
        try:
            inner = [
                math.comb(k - 1, j - 1) * (-1.0) ** (j - 1) * mittag_leffler(a * (l + j - 1), nu)
                for j in range(1, k + 1)
            ]
        except MLOverflowError as exc:
            raise SeriesDivergenceError(f"q_k series terms overflow at l={l}") from exc
        w = (-omega) ** l / math.factorial(l)
        term = w * math.fsum(inner)
        total.append(term)
        magnitude.append(abs(w) * math.fsum(abs(x) for x in inner))
        running = abs(math.fsum(total))
        small_run = small_run + 1 if abs(term) < 1e-14 * running else 0
        if small_run >= 20:
            break
    else:
        raise SeriesDivergenceError(f"q_k series did not converge in {series_terms} terms")
    value = prefactor * math.fsum(total)
    lost = _digits_lost(abs(prefactor) * math.fsum(magnitude), value)
    if lost > MAX_DIGITS_LOST:
        raise CancellationError(f"q_k series lost {lost:.1f} digits", digits_lost=lost)
    return value


def conditional_state_pmf(params, omega, t, k, series_terms=400, method="auto"):
    """``q_k(t) = P(Nc(T(t)) = k - 1)`` given the exponential mixing value ``omega``.

    Here ``Nc`` is the non-homogeneous Poisson process with intensity
    ``omega lam e^{lam s}`` and ``T(t)`` has the M-Wright marginal.  Two
    evaluators:

    ``"series"``
        ``e^w (-w)^(k-1)/(k-1)! sum_l (-w)^l/l! sum_j C(k-1,j-1) (-1)^(j-1)
        E_{nu,1}(lam (l+j-1) t**nu)``.  Converges only for ``nu = 1``; for
        ``nu < 1`` the Mittag-Leffler factors grow faster than ``l!`` and a
        :class:`SeriesDivergenceError` is raised.
    ``"mixture"``
        ``int Poisson(k-1; omega (e^{lam xi t**nu} - 1)) M_nu(xi) dxi``.

    ``"auto"`` picks the series at ``nu = 1`` and the mixture otherwise.
    """
    if not (omega > 0.0 and math.isfinite(omega)):
        raise DomainError(f"omega must be positive, got {omega!r}")
    t = _check_time(t)
    k = _check_index(k, "k")
    if method == "auto":
        method = "series" if params.classical else "mixture"
    if method == "series":
        return _conditional_series(params, omega, t, k, series_terms)
    if method != "mixture":
        raise ValueError(f"unknown method {method!r}")
    a = params.lam * t**params.nu

    def func(xi):
        mean = omega * math.expm1(min(a * xi, 700.0))
        return stats.poisson.pmf(k - 1, mean)

    val, _ = wright_mixture(func, params.nu)
    return float(val)


# ---------------------------------------------------------------------------
# moments


def _log_sojourn_moment_factor(kappa, nu):
    # ln E[T**kappa] at unit rate: T = V**(1/nu) S with V ~ Exp(1)
    r = kappa / nu
    return math.lgamma(1.0 - r) + math.lgamma(1.0 + r) - math.lgamma(1.0 - kappa)


def fractional_moment(params, kappa, index, which="sojourn"):
    """``E[T_i**kappa]`` (``which="sojourn"``) or ``E[W_j**kappa]`` (``"waiting"``).

    With ``r = kappa/nu``, ``E[T_i**kappa] = Gamma(1-r) Gamma(1+r) / (Gamma(1-kappa) (i lam)**r)``,
    which is ``Gamma(1+kappa) / (i lam)**kappa`` at ``nu = 1``.  The waiting
    time moment is ``lam**-r`` times the same factor times
    ``sum_{l=1}^{j} C(j, l) (-1)**(l-1) l**-r``.  Requires ``0 < kappa < nu``.
    """
    index = _check_index(index, "index")
    if not 0.0 < kappa < params.nu:
        raise DomainError(f"need 0 < kappa < nu={params.nu}, got kappa={kappa!r}")
    r = kappa / params.nu
    factor = math.exp(_log_sojourn_moment_factor(kappa, params.nu))
    if which == "sojourn":
        return factor / (index * params.lam) ** r
    if which == "waiting":
        terms = [math.comb(index, l) * (-1.0) ** (l - 1) * l ** (-r) for l in range(1, index + 1)]
        s, lost = _signed_sum(terms)
        if lost > MAX_DIGITS_LOST:
            raise CancellationError(f"waiting-time moment sum lost {lost:.1f} digits", digits_lost=lost)
        return factor / params.lam**r * s
    raise ValueError(f"which must be 'sojourn' or 'waiting', got {which!r}")


def log_moments(params, i):
    """First two raw moments of ``ln T_i``."""
    i = _check_index(i, "i")
    nu = params.nu
    shift = math.log(i * params.lam) / nu + EULER_GAMMA
    m1 = -shift
    m2 = math.pi**2 * (1.0 / (3.0 * nu * nu) - 1.0 / 6.0) + shift * shift
    return m1, m2
