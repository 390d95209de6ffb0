"""Random variates and sample paths of the fractional Yule process.

Every sampler takes a :class:`RandomStream` and an optional ``size``; with
``size=None`` it returns a Python float, otherwise an array.  Sojourn times
use the structural identity ``T_i = V_i**(1/nu) * S_nu`` with
``V_i ~ Exp(i lam)`` and ``S_nu`` one-sided stable, drawn through Kanter's
representation of the stable law.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import FypParams
from .exceptions import DomainError
from .specfun import kanter_log_a

__all__ = [
    "RandomStream",
    "SamplePath",
    "sample_exponential",
    "sample_positive_stable",
    "sample_wright",
    "simulate_classical_yule",
    "simulate_path_alg2",
    "simulate_marginal_alg1",
    "simulate_populations_alg2",
    "simulate_marginals_alg1",
    "simulate_sojourns",
    "simulate_log_sojourns",
]

_UINT64_MAX = 2**64 - 1
_TWO_M52 = 2.0**-52


def _check_uint64(value, name):
    if isinstance(value, bool) or int(value) != value or not 0 <= int(value) <= _UINT64_MAX:
        raise DomainError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
    return int(value)


class RandomStream:
    """Seeded PCG64 stream identified by ``(seed, stream_id, key)``.

    Streams with the same identity yield the same variates; distinct
    identities are independent through :class:`numpy.random.SeedSequence`
    spawn keys.  :meth:`substream` derives child streams for batch work so
    results do not depend on the order tasks run in.
    """

    def __init__(self, seed, stream_id=0, key=()):
        self.seed = _check_uint64(seed, "seed")
        self.stream_id = _check_uint64(stream_id, "stream_id")
        self.key = tuple(_check_uint64(k, "key") for k in key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.key))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, key={self.key})"

    def substream(self, *key):
        return RandomStream(self.seed, self.stream_id, self.key + tuple(key))

    def descriptor(self):
        return {"seed": self.seed, "stream_id": self.stream_id, "key": list(self.key)}

    def uniform_open(self, size=None):
        """Uniform on the open interval (0, 1): ``(m + 1/2) 2**-52`` with ``m`` uniform on 52 bits.

        Every value is exact in double precision; with 53 bits the top value
        would round to 1.0.
        """
        m = self._gen.integers(0, 2**52, size=size, dtype=np.int64)
        u = (m + 0.5) * _TWO_M52
        return float(u) if size is None else u


def sample_exponential(stream, rate, size=None):
    """``-ln(U) / rate`` with ``U`` uniform on (0, 1)."""
    if not rate > 0.0:
        raise DomainError(f"rate must be positive, got {rate!r}")
    u = stream.uniform_open(size)
    return -np.log(u) / rate if size is not None else -math.log(u) / rate


def _check_stable_index(nu):
    if not 0.0 < nu < 1.0:
        raise DomainError(f"need 0 < nu < 1, got {nu!r}")


def _log_kanter_ratio(stream, nu, size):
    # ln(A(U)/E) with U ~ Uniform(0, pi), E ~ Exp(1)
    u = math.pi * np.asarray(stream.uniform_open(size))
    e = -np.log(np.asarray(stream.uniform_open(size)))
    return kanter_log_a(u, nu) - np.log(e)


def sample_positive_stable(stream, nu, size=None):
    """One-sided stable ``S`` with ``E exp(-z S) = exp(-z**nu)``.

    Kanter: ``S = (A(U) / E)**((1 - nu)/nu)``.
    """
    _check_stable_index(nu)
    s = np.exp((1.0 - nu) / nu * _log_kanter_ratio(stream, nu, size))
    return float(s) if size is None else s


def sample_wright(stream, nu, size=None):
    """M-Wright variate ``Xi = S**(-nu) = (E / A(U))**(1 - nu)``."""
    _check_stable_index(nu)
    xi = np.exp(-(1.0 - nu) * _log_kanter_ratio(stream, nu, size))
    return float(xi) if size is None else xi


@dataclass(frozen=True)
class SamplePath:
    """Birth times ``W_1 <= W_2 <= ...`` of one simulated path.

    ``sojourns`` holds the inter-birth times themselves; for small ``nu``
    a sojourn can be far below the spacing of doubles at the current birth
    time, so adjacent ``birth_times`` may coincide in floating point while
    the sojourns stay strictly positive.
    """

    params: FypParams
    algorithm: str
    birth_times: np.ndarray
    sojourns: np.ndarray
    seed_info: dict = field(default_factory=dict)

    def population_at(self, t):
        return 1 + int(np.searchsorted(self.birth_times, t, side="right"))

    @property
    def n_births(self):
        return len(self.birth_times)


def _check_births(n_births):
    if int(n_births) != n_births or n_births < 1:
        raise DomainError(f"n_births must be an integer >= 1, got {n_births!r}")
    return int(n_births)


def simulate_log_sojourns(stream, params, n):
    """Logarithms of independent sojourns ``T_i = V_i**(1/nu) S_i``, ``i = 1..n``.

    The exponentials are drawn first and the stable factors after, so at
    ``nu = 1`` (no stable draw) the stream is consumed exactly as by the
    classical simulator.  Working in logs keeps ``nu`` near 0 in range.
    """
    n = _check_births(n)
    log_rates = np.log(params.lam * np.arange(1, n + 1))
    log_v = np.log(-np.log(stream.uniform_open(n))) - log_rates
    if params.classical:
        return log_v
    log_s = (1.0 - params.nu) / params.nu * _log_kanter_ratio(stream, params.nu, n)
    return log_v / params.nu + log_s


def simulate_sojourns(stream, params, n):
    """Independent sojourns ``T_i``; see :func:`simulate_log_sojourns`."""
    n = _check_births(n)
    if params.classical:
        return sample_exponential(stream, 1.0, n) / (params.lam * np.arange(1, n + 1))
    return np.exp(simulate_log_sojourns(stream, params, n))


def simulate_classical_yule(stream, lam, n_births):
    """Classical Yule path: birth times are partial sums of ``Exp(i lam)`` sojourns."""
    params = FypParams(1.0, lam)
    n_births = _check_births(n_births)
    info = stream.descriptor()
    t = simulate_sojourns(stream, params, n_births)
    return SamplePath(params, "classical", np.cumsum(t), t, info)


def simulate_path_alg2(stream, params, n_births):
    """Fractional Yule path with an independent stable factor per sojourn."""
    n_births = _check_births(n_births)
    info = stream.descriptor()
    t = simulate_sojourns(stream, params, n_births)
    return SamplePath(params, "alg2_path", np.cumsum(t), t, info)


def _check_t(t):
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"t must be positive and finite, got {t!r}")


def _yule_count(stream, rate, horizon):
    # births of a classical Yule process with the given rate up to `horizon`
    k, w = 1, 0.0
    while True:
        w += sample_exponential(stream, k * rate)
        if w > horizon:
            return k
        k += 1


def simulate_marginal_alg1(stream, params, t):
    """Population at ``t`` from a classical Yule process with random rate.

    Draws ``Xi`` from the M-Wright law (``Xi = 1`` when ``nu = 1``), then
    runs a Yule process with rate ``lam * Xi`` up to time ``t**nu``.
    """
    _check_t(t)
    xi = 1.0 if params.classical else sample_wright(stream, params.nu)
    return _yule_count(stream, params.lam * xi, t**params.nu)


def _populations_by_birth_loop(stream, size, draw_sojourn, horizon):
    """Vectorised "birth until past the horizon" loop shared by both algorithms."""
    pop = np.ones(size, dtype=np.int64)
    w = np.zeros(size)
    active = np.arange(size)
    i = 1
    while len(active):
        w[active] += draw_sojourn(i, active)
        still = w[active] <= horizon[active]
        active = active[still]
        pop[active] += 1
        i += 1
    return pop


def simulate_populations_alg2(stream, params, t, size):
    """Populations ``N(t)`` of ``size`` independent paths generated sojourn by sojourn."""
    _check_t(t)
    nu, lam = params.nu, params.lam

    def draw(i, active):
        v = sample_exponential(stream, i * lam, len(active))
        if params.classical:
            return v
        return v ** (1.0 / nu) * sample_positive_stable(stream, nu, len(active))

    return _populations_by_birth_loop(stream, size, draw, np.full(size, float(t)))


def simulate_marginals_alg1(stream, params, t, size):
    """``size`` independent draws of :func:`simulate_marginal_alg1`."""
    _check_t(t)
    xi = np.ones(size) if params.classical else sample_wright(stream, params.nu, size)
    rate = params.lam * xi

    def draw(i, active):
        return sample_exponential(stream, 1.0, len(active)) / (i * rate[active])

    return _populations_by_birth_loop(stream, size, draw, np.full(size, float(t) ** params.nu))
