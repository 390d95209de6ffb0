"""Scalar special functions: Mittag-Leffler, reciprocal gamma, M-Wright density.

All functions take real scalars and are pure.  The Mittag-Leffler function
is evaluated by its power series near the origin and otherwise by
inverting its Laplace transform along the branch cut of ``s**alpha``,
which for ``0 < alpha < 1`` turns the Bromwich integral into a real,
non-oscillating integral over ``(0, inf)``.
"""

import math

import numpy as np
from scipy import integrate, special

from .exceptions import DomainError, MLOverflowError

__all__ = [
    "mittag_leffler",
    "reciprocal_gamma",
    "wright_m_density",
    "spectral_density",
    "kanter_log_a",
]

# exp() overflows just above this
_LOG_MAX = 709.0

# past this many units of r = u**(1/alpha) the factor exp(-r) underflows
_R_MAX = 800.0

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=500)


def reciprocal_gamma(x):
    """Return ``1 / Gamma(x)``; exactly zero at the poles ``x = 0, -1, -2, ...``."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"reciprocal_gamma needs a finite argument, got {x!r}")
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    return float(special.rgamma(x))


def _check_ml(z, alpha, beta):
    if not (alpha > 0.0 and beta > 0.0):
        raise DomainError(f"Mittag-Leffler needs alpha > 0 and beta > 0, got {alpha!r}, {beta!r}")
    if alpha > 1.0:
        raise DomainError(f"only 0 < alpha <= 1 is supported, got {alpha!r}")
    if not math.isfinite(z):
        raise DomainError(f"Mittag-Leffler argument must be finite, got {z!r}")


def _series_terms_needed(absz, alpha, beta):
    growth = absz ** (1.0 / alpha) if absz > 0 else 0.0
    return int((math.e * growth + 50.0) / alpha + abs(beta) + 60)


def _ml_series(z, alpha, beta):
    n = _series_terms_needed(abs(z), alpha, beta)
    r = np.arange(n, dtype=float)
    log_terms = r * math.log(abs(z)) - special.gammaln(alpha * r + beta)
    terms = np.exp(log_terms)
    if z < 0:
        terms[1::2] *= -1.0
    return math.fsum(terms)


def _ml_branch_cut(z, alpha, beta):
    """Laplace inversion for ``0 < alpha < 1`` and ``0 < beta < 1 + alpha``.

    With ``x = -z`` and the substitution ``r = u**(1/alpha)`` along the
    negative real axis, the cut contributes

        1/(pi*alpha) * int_0^U u**((1-beta)/alpha) exp(-u**(1/alpha))
                        * (u sin(pi beta) - x sin(pi (alpha-beta)))
                        / ((u + x cos(pi alpha))**2 + (x sin(pi alpha))**2) du

    and for ``z > 0`` the pole ``s = z**(1/alpha)`` adds
    ``z**((1-beta)/alpha) exp(z**(1/alpha)) / alpha``.
    """
    x = -z
    sa, ca = math.sin(math.pi * alpha), math.cos(math.pi * alpha)
    sb = 0.0 if beta == 1.0 else math.sin(math.pi * beta)
    sab = math.sin(math.pi * (alpha - beta))
    p = (1.0 - beta) / alpha
    inv_a = 1.0 / alpha
    xs = x * sa
    xc = x * ca

    def integrand(u):
        num = u * sb - x * sab
        den = (u + xc) ** 2 + xs * xs
        return u**p * math.exp(-(u**inv_a)) * num / den

    upper = _R_MAX**alpha
    points = {1.0}
    peak, width = -xc, abs(xs)
    if peak > 0:
        points.update([peak - 3 * width, peak, peak + 3 * width])
    points = sorted(q for q in points if 0.0 < q < upper)
    val, _ = integrate.quad(integrand, 0.0, upper, points=points or None, **_QUAD_OPTS)
    val /= math.pi * alpha

    if z > 0:
        log_res = -math.log(alpha) + p * math.log(z) + z**inv_a
        if log_res > _LOG_MAX:
            raise MLOverflowError(
                f"E_{{{alpha},{beta}}}({z}) overflows (log value ~ {log_res:.1f})"
            )
        val += math.exp(log_res)
    return val


def _ml_alpha_one(z, beta):
    if beta == 1.0:
        if z > _LOG_MAX:
            raise MLOverflowError(f"exp({z}) overflows")
        return math.exp(z)
    if beta == 2.0:
        if z > _LOG_MAX:
            raise MLOverflowError(f"E_{{1,2}}({z}) overflows")
        return math.expm1(z) / z
    if abs(z) <= 1.0:
        return _ml_series(z, 1.0, beta)
    raise DomainError("alpha = 1 is supported only for beta in {1, 2} away from the origin")


def mittag_leffler(z, alpha, beta=1.0):
    """Two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)`` for real ``z``.

    Parameters
    ----------
    z : float
        Real argument.
    alpha : float
        Order, ``0 < alpha <= 1``.
    beta : float, default 1.0
        Second parameter, ``beta > 0``.

    Returns
    -------
    float
        The function value; relative error is about ``1e-12`` or better on
        ``alpha in [0.05, 1]``, ``beta in {1, alpha, alpha + 1}``,
        ``|z| <= 1e6``.

    Raises
    ------
    DomainError
        For non-positive ``alpha``/``beta`` or ``alpha > 1``.
    MLOverflowError
        When the value exceeds the double range (large positive ``z``).
    """
    z = float(z)
    alpha = float(alpha)
    beta = float(beta)
    _check_ml(z, alpha, beta)
    if z == 0.0:
        return reciprocal_gamma(beta)
    if alpha == 1.0:
        return _ml_alpha_one(z, beta)
    absz = abs(z)
    # no cancellation: |z| <= 1 on the negative side, all terms positive otherwise
    if (z < 0 and absz <= 1.0) or (z > 0 and absz ** (1.0 / alpha) <= 30.0):
        return _ml_series(z, alpha, beta)
    if beta >= 1.0 + alpha:
        # E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
        return (mittag_leffler(z, alpha, beta - alpha) - reciprocal_gamma(beta - alpha)) / z
    return _ml_branch_cut(z, alpha, beta)


def spectral_density(nu, eta):
    """Spectral weight ``sin(nu pi) / (pi (eta**nu + eta**-nu + 2 cos(nu pi)))``."""
    if not 0.0 < nu < 1.0:
        raise DomainError(f"spectral_density needs 0 < nu < 1, got {nu!r}")
    if not eta > 0.0:
        raise DomainError(f"spectral_density needs eta > 0, got {eta!r}")
    en = eta**nu
    return math.sin(nu * math.pi) / (math.pi * (en + 1.0 / en + 2.0 * math.cos(nu * math.pi)))


def kanter_log_a(u, nu):
    """Logarithm of Kanter's function on ``0 < u < pi``.

    ``A(u) = sin(nu u)**(nu/(1-nu)) sin((1-nu) u) / sin(u)**(1/(1-nu))``,
    so that ``(A(U)/E)**((1-nu)/nu)`` with ``U ~ Uniform(0, pi)`` and
    ``E ~ Exp(1)`` has Laplace transform ``exp(-s**nu)``.  Vectorised.
    """
    u = np.asarray(u, dtype=float)
    q = 1.0 / (1.0 - nu)
    return (
        nu * q * np.log(np.sin(nu * u))
        + np.log(np.sin((1.0 - nu) * u))
        - q * np.log(np.sin(u))
    )


def _wright_series(nu, x):
    if x == 0.0:
        return reciprocal_gamma(1.0 - nu)
    n = 64
    while True:
        r = np.arange(n, dtype=float)
        # 1/Gamma(1-y) = sin(pi y) Gamma(y) / pi keeps large r in range
        y = nu * (r + 1.0)
        log_mag = r * math.log(x) + special.gammaln(y) - special.gammaln(r + 1.0)
        sign = np.sin(np.pi * y)
        sign[y == np.round(y)] = 0.0  # poles of Gamma(1-y): odd r at nu = 1/2
        terms = np.exp(log_mag) * sign / math.pi
        terms[1::2] *= -1.0
        if log_mag[-1] < float(np.max(log_mag)) - 45.0 and log_mag[-1] < -45.0:
            return math.fsum(terms)
        n *= 2


def _wright_stable_form(nu, x):
    """M-Wright density through the one-sided stable law and Kanter's function.

    ``M_nu(x) = x**(nu/(1-nu)) / ((1-nu) pi) int_0^pi A(u) exp(-x**(1/(1-nu)) A(u)) du``.
    """
    q = 1.0 / (1.0 - nu)
    c = x**q
    log_c = q * math.log(x)
    nq = nu * q
    log, sin = math.log, math.sin

    def integrand(u):
        la = nq * log(sin(nu * u)) + log(sin((1.0 - nu) * u)) - q * log(sin(u))
        arg = la + log_c
        if arg > 6.6:  # c*A > 735: contribution below exp(-735)
            return 0.0
        a = math.exp(la)
        return a * math.exp(-c * a)

    # the mass sits near u = 0 with width ~ 1/sqrt(c) for large c
    width = 1.0 / math.sqrt(max(c, 1.0))
    points = sorted({min(math.pi / 2, k * width) for k in (0.5, 1, 2, 4, 8)})
    val, _ = integrate.quad(integrand, 0.0, math.pi, points=points, **_QUAD_OPTS)
    return math.exp(nu * q * math.log(x)) * val / ((1.0 - nu) * math.pi)


def _wright_series_safe(nu, x):
    # largest series term grows like exp((1-nu) x**(1/(1-nu)))
    return (1.0 - nu) * x ** (1.0 / (1.0 - nu)) <= 1.0


def wright_m_density(nu, x):
    """M-Wright density ``W_{-nu,1-nu}(-x)`` on ``x >= 0`` for ``0 < nu < 1``.

    The series ``sum_r (-x)**r / (r! Gamma(1 - nu (r+1)))`` is used while
    its terms stay below ``e``; beyond that it cancels badly and the density
    is computed from the law of ``S**(-nu)`` with ``S`` one-sided stable.
    """
    nu = float(nu)
    x = float(x)
    if not 0.0 < nu < 1.0:
        raise DomainError(f"wright_m_density needs 0 < nu < 1, got {nu!r}")
    if not (x >= 0.0 and math.isfinite(x)):
        raise DomainError(f"wright_m_density needs finite x >= 0, got {x!r}")
    if _wright_series_safe(nu, x):
        return max(_wright_series(nu, x), 0.0)
    return _wright_stable_form(nu, x)
