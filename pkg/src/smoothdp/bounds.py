"""Closed-form bounds for the sampling mechanisms.

All bounds are evaluated in the log domain and returned both as a value
and, through the ``*_log`` variants, as a natural logarithm, so that they
can be compared against exact deltas far below double-precision range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist import DistributionSet, strict_positivity
from .numeric import Epsilon, resolve_mode, safe_exp
from .pointwise import counting_delta


class BoundNotApplicable(ValueError):
    """The parameters fall outside the range where a bound was derived."""


@dataclass(frozen=True)
class BoundParams:
    n: int
    T: int
    m: int
    eps: Epsilon
    f: float
    c2: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "eps", Epsilon.of(self.eps))
        if not 1 <= self.T < self.n:
            raise BoundNotApplicable("the bound needs 1 <= T < n")
        if self.m < 2:
            raise BoundNotApplicable("the bound needs at least two types")
        if not 0 < self.c2 < 1:
            raise BoundNotApplicable("c2 must lie strictly between 0 and 1")
        if not self.f > 0:
            raise BoundNotApplicable("the distribution set must be strictly positive (f > 0)")

    @property
    def c(self) -> float:
        """Slack ``eps - ln(n / (n - T))`` of the privacy level over the sampling rate."""
        return self.eps.value - math.log(self.n / (self.n - self.T))


def shm_upper_bound_log(p: BoundParams) -> float:
    c = p.c
    if not c > 0:
        raise BoundNotApplicable(
            f"eps={p.eps.value} does not exceed ln(n/(n-T))={math.log(p.n / (p.n - p.T)):.6g}"
        )
    fn = float(p.f) * p.n
    ratio = (p.n - p.T) / p.T
    # -(1 - e^-c)^2 / 3 * ((n - T) / T)^2 * (1 - c2) * f * n
    first = -(-math.expm1(-c)) ** 2 / 3 * ratio**2 * (1 - p.c2) * fn
    second = -(p.c2**2) / 2 * fn + math.log(p.m)
    return float(np.logaddexp(first, second))


def shm_upper_bound(p: BoundParams) -> float:
    """Smoothed-delta upper bound for the sampling histogram.

    ``exp(-(1-e^-c)^2/3 ((n-T)/T)^2 (1-c2) f n) + exp(-c2^2/2 f n + ln m)``
    where ``c = eps - ln(n/(n-T))`` must be positive.  The value may exceed
    one for small ``n``; it is returned uncapped.
    """
    return safe_exp(shm_upper_bound_log(p))


def bound_params_for(n: int, T: int, eps, pi: DistributionSet, c2: float = 0.5) -> BoundParams:
    cert = strict_positivity(pi)
    if not cert.holds:
        raise BoundNotApplicable("the distribution set is not strictly positive")
    return BoundParams(n=n, T=T, m=pi.m, eps=Epsilon.of(eps), f=float(cert.c), c2=c2)


def shm_dp_lower_bound(n: int, T: int) -> float:
    """No ``delta < T/n`` makes the sampling histogram ``(eps, delta)``-DP."""
    if not 1 <= T <= n:
        raise ValueError("need 1 <= T <= n")
    return T / n


def _positivity_constant(pi_or_c) -> float:
    if isinstance(pi_or_c, DistributionSet):
        cert = strict_positivity(pi_or_c)
        c = float(cert.c)
    else:
        c = float(pi_or_c)
    if not c > 0:
        raise BoundNotApplicable("the distribution set is not strictly positive")
    return c


def shm_tightness_floor_log(n: int, T: int, pi_or_c) -> float:
    c = _positivity_constant(pi_or_c)
    if not 1 <= T <= n:
        raise ValueError("need 1 <= T <= n")
    return math.log(T / n) + n * math.log(c)


def shm_tightness_floor(n: int, T: int, pi_or_c) -> float:
    """Witness floor ``(T/n) c^n`` on the smoothed delta of the sampling histogram.

    Every product distribution drawn from a ``c``-strictly positive set puts
    probability at least ``c^n`` on the single-type database, whose
    database-wise parameter is at least ``T/n``.
    """
    return safe_exp(shm_tightness_floor_log(n, T, pi_or_c))


# ---------------------------------------------------------------------------
# counting with replacement


def with_replacement_eps(n: int, T: int) -> float:
    return 1 + 2 * T / n


def with_replacement_delta_table(n: int, T: int, eps=None, mode: str | None = None, two_sided: bool = False) -> list:
    """``delta_M`` of the with-replacement counter for ``M = 0..n`` marked records.

    The default ``eps`` is ``1 + 2T/n``.  With ``two_sided=False`` only the
    divergences from a database towards its neighbours are counted, which
    gives ``delta_0 = 0``; ``two_sided=True`` is the database-wise
    parameter with both directions.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(with_replacement_eps(n, T) if eps is None else eps)
    return [counting_delta(n, T, M, eps, mode, two_sided=two_sided) for M in range(n + 1)]


def with_replacement_ratio_bounds(n: int, T: int, M: int, k: int) -> tuple[float, float, float]:
    """``(lower, P_{M-1,k}/P_{M,k}, upper)`` for the neighbour likelihood ratio.

    ``lower = exp((T-k)/(n-M+1) - k/(M-1))`` and
    ``upper = exp((T-k)/(n-M) - k/M)``; for ``M = 1`` the term ``k/(M-1)``
    is read as ``0`` when ``k = 0`` and as ``+inf`` otherwise.
    """
    if not 1 <= M <= n - 1 or not 0 <= k <= T:
        raise ValueError("need 1 <= M <= n-1 and 0 <= k <= T")
    ratio = ((M - 1) / M) ** k * ((n - M + 1) / (n - M)) ** (T - k)
    down = 0.0 if k == 0 else (math.inf if M == 1 else k / (M - 1))
    lower = math.exp((T - k) / (n - M + 1) - down)
    upper = math.exp((T - k) / (n - M) - k / M)
    return lower, ratio, upper


def with_replacement_up_ratio_bounds(n: int, T: int, M: int, k: int) -> tuple[float, float, float]:
    """``(lower, P_{M+1,k}/P_{M,k}, upper)`` for ``1 <= M <= n-2``.

    ``lower = exp(k/(M+1) - (T-k)/(n-M-1))`` and
    ``upper = exp(k/M - (T-k)/(n-M))``.
    """
    if not 1 <= M <= n - 2 or not 0 <= k <= T:
        raise ValueError("need 1 <= M <= n-2 and 0 <= k <= T")
    ratio = ((M + 1) / M) ** k * ((n - M - 1) / (n - M)) ** (T - k)
    lower = math.exp(k / (M + 1) - (T - k) / (n - M - 1))
    upper = math.exp(k / M - (T - k) / (n - M))
    return lower, ratio, upper


def with_replacement_bound_log(n: int, T: int, pi_or_c, max_ratio: float = 0.1) -> float:
    c = _positivity_constant(pi_or_c)
    if not 1 <= T <= n:
        raise ValueError("need 1 <= T <= n")
    if T / n > max_ratio:
        raise BoundNotApplicable(f"T/n={T / n:.4g} is above the small-sample ratio {max_ratio}")
    rate = math.e * T / n
    if rate >= 1:
        raise BoundNotApplicable("the tail series needs e*T/n < 1")
    m0 = math.ceil(c * n / 2)
    head = math.log(2) - c * n / 8
    tail = m0 * math.log(rate) - math.log1p(-rate)
    return min(0.0, float(np.logaddexp(head, tail)))


def with_replacement_bound(n: int, T: int, pi_or_c, max_ratio: float = 0.1) -> float:
    """Smoothed-delta bound for the with-replacement counter at ``eps = 1 + 2T/n``.

    Assembled from the two regimes of the marked count ``M``: outside
    ``[cn/2, n - cn/2]`` (probability at most ``2 exp(-cn/8)``) the
    database-wise parameter is bounded by one, and inside it by the
    geometric tail ``(eT/n)^{M0} / (1 - eT/n)`` with ``M0 = ceil(cn/2)``.
    Capped at one.
    """
    return safe_exp(with_replacement_bound_log(n, T, pi_or_c, max_ratio))
