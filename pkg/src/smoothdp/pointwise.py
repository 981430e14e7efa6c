"""Database-wise privacy parameter, worst-case DP delta and max divergence.

For the sampling-histogram mechanism the directed divergence between a
database ``H`` and its neighbour ``H - e_i + e_j`` depends only on the donor
count ``a = H_i`` and the receiver count ``b = H_j``: the remaining
``n - a - b`` records all behave alike.  :class:`ShmKernel` evaluates this
two-argument function ``D(a, b)`` once per pair and caches it, which makes
``delta_eps(H)`` a maximum over ordered pairs of histogram entries.

Float-mode values are carried as natural logarithms ("scores"); rational
mode carries exact :class:`~fractions.Fraction` values.  Either way a
larger score means a larger delta, so maxima can be taken on scores.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from .dist import FinitePMF
from .mechanisms import (
    CONTINUOUS,
    COUNTING,
    DEFAULT_OUTPUT_CAP,
    SHM,
    HistogramDB,
    MechanismDescriptor,
    output_pmf,
    paired_output_pmf,
    with_replacement_count_pmf,
)
from .numeric import FLOAT, RATIONAL, Epsilon, comb, logsumexp, resolve_mode, safe_exp, to_fraction

# float-mode sample histograms whose marginal log-probability falls below
# -LOG_CUT are dropped; the neglected mass is at most (T + 1) * exp(-LOG_CUT)
LOG_CUT = 800.0
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class PointwiseDelta:
    value: float | Fraction
    worst_neighbor: tuple | None = None
    direction: str | None = None
    log_value: float = -math.inf

    def __post_init__(self):
        if not 0 <= self.value <= 1 + 1e-12:
            raise ValueError(f"pointwise delta out of range: {self.value}")


def _rational_factor(eps: Epsilon):
    """Exact ``exp(eps)`` for rational mode, or ``None`` when it is astronomically large."""
    try:
        return eps.exp(RATIONAL)
    except OverflowError:
        return None


def _as_mapping(p) -> Mapping:
    if isinstance(p, FinitePMF):
        return dict(zip(p.support, p.mass))
    if isinstance(p, Mapping):
        return p
    return dict(enumerate(p))


def directed_d(p, q, eps, mode: str | None = None):
    """``sum_a max(0, p(a) - e^eps q(a))``, the largest ``p(S) - e^eps q(S)``.

    ``p`` and ``q`` may be :class:`FinitePMF` objects, ``{output: prob}``
    mappings or plain sequences indexed by position.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    if isinstance(p, FinitePMF) and isinstance(q, FinitePMF) and p.support != q.support:
        raise ValueError("p and q must share one output support")
    if not isinstance(p, (FinitePMF, Mapping)) and len(p) != len(q):
        raise ValueError("p and q must share one output support")
    pm, qm = _as_mapping(p), _as_mapping(q)
    if mode == RATIONAL:
        f = _rational_factor(eps)
        total = Fraction(0)
        for a, pa in pm.items():
            pa = to_fraction(pa)
            qa = to_fraction(qm.get(a, 0))
            gap = (pa if qa == 0 else Fraction(0)) if f is None else pa - f * qa
            if gap > 0:
                total += gap
        return total
    f = eps.exp(FLOAT)
    return math.fsum(max(0.0, float(pa) - f * float(qm.get(a, 0.0))) for a, pa in pm.items())


def total_variation(p, q) -> float:
    pm, qm = _as_mapping(p), _as_mapping(q)
    keys = set(pm) | set(qm)
    return 0.5 * math.fsum(abs(float(pm.get(k, 0)) - float(qm.get(k, 0))) for k in keys)


# ---------------------------------------------------------------------------
# sampling-histogram kernel


def _log_one_minus_exp(x: np.ndarray) -> np.ndarray:
    """``log(1 - exp(x))`` for ``x < 0``."""
    with np.errstate(divide="ignore"):
        return np.where(x > -_LN2, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


class ShmKernel:
    """Cached pair divergences ``D(a, b)`` for fixed ``(n, T, eps, mode)``.

    ``D(a, b)`` is ``d_eps(H, H')`` where ``H'`` moves one record from a
    type with ``a`` records to a type with ``b`` records.
    """

    def __init__(self, n: int, T: int, eps, mode: str | None = None):
        if not 1 <= T <= n:
            raise ValueError(f"need 1 <= T <= n, got n={n}, T={T}")
        self.n, self.T = int(n), int(T)
        self.eps = Epsilon.of(eps)
        self.mode = resolve_mode(mode)
        self._cache: dict = {}
        if self.mode == RATIONAL:
            self._factor = _rational_factor(self.eps)
            self._total = comb(self.n, self.T)
        else:
            self._logf = self.eps.log_factor
            self._lf = gammaln(np.arange(self.n + 2, dtype=float) + 1.0)
            self._lct = self._lc(self.n, self.T)

    # scores -------------------------------------------------------------
    @property
    def zero(self):
        return Fraction(0) if self.mode == RATIONAL else -math.inf

    def to_value(self, score):
        return score if self.mode == RATIONAL else safe_exp(score)

    def to_log(self, score) -> float:
        if self.mode == RATIONAL:
            return -math.inf if score == 0 else math.log(score)
        return float(score)

    def D(self, a: int, b: int):
        key = (a, b)
        hit = self._cache.get(key)
        if hit is None:
            if a < 1 or b < 0 or a + b > self.n:
                raise ValueError(f"invalid donor/receiver counts ({a}, {b}) for n={self.n}")
            hit = self._d_rational(a, b) if self.mode == RATIONAL else self._d_float(a, b)
            self._cache[key] = hit
        return hit

    def pair(self, a: int, b: int):
        """Score of a donor/receiver pair in both directions, and which one won."""
        fwd = self.D(a, b)
        rev = self.D(b + 1, a - 1)
        return (fwd, "forward") if fwd >= rev else (rev, "reverse")

    def _d_rational(self, a: int, b: int) -> Fraction:
        n, T = self.n, self.T
        r = n - a - b
        f = self._factor
        if f is not None:
            fn, fd = f.numerator, f.denominator
        total = 0
        for h1 in range(max(0, T - (n - a)), min(a, T) + 1):
            c1p, c1q = comb(a, h1), comb(a - 1, h1)
            for h2 in range(max(0, T - h1 - r), min(b, T - h1) + 1):
                hr = T - h1 - h2
                cr = comb(r, hr)
                p = c1p * comb(b, h2) * cr
                q = c1q * comb(b + 1, h2) * cr
                if f is None:
                    # an unbounded multiplier only lets through outputs the neighbour cannot produce
                    if q == 0:
                        total += p
                    continue
                gap = p * fd - fn * q
                if gap > 0:
                    total += gap
        den = self._total * (1 if f is None else fd)
        return Fraction(total, den)

    def _lc(self, top, k):
        """``log C(top, k)`` from the cached log-factorials (arguments assumed in range)."""
        lf = self._lf
        return lf[top] - lf[k] - lf[top - k]

    def _marginal(self, k: int):
        """Support and log-pmf of the sampled count of a type holding ``k`` records."""
        n, T = self.n, self.T
        h = np.arange(max(0, T - (n - k)), min(k, T) + 1)
        lp = self._lc(k, h) + self._lc(n - k, T - h) - self._lct
        keep = lp >= -LOG_CUT
        return h[keep], lp[keep]

    def _d_float(self, a: int, b: int) -> float:
        n, T = self.n, self.T
        r = n - a - b
        h1, lp1 = self._marginal(a)
        if r == 0:
            h2 = T - h1
            logp = lp1
        else:
            h2v, _ = self._marginal(b)
            hr = T - h1[:, None] - h2v[None, :]
            ok = (hr >= 0) & (hr <= r)
            i1, i2 = np.nonzero(ok)
            h1, h2, hr = h1[i1], h2v[i2], hr[ok]
            logp = self._lc(a, h1) + self._lc(b, h2) + self._lc(r, hr) - self._lct
        with np.errstate(divide="ignore"):
            log_ratio = np.log1p(-h1 / a) + np.log1p(h2 / (b + 1.0 - h2))
        x = self._logf + log_ratio
        pos = x < 0
        if not pos.any():
            return -math.inf
        return logsumexp(logp[pos] + _log_one_minus_exp(x[pos]))

    # database-level quantities -------------------------------------------
    def pointwise(self, counts) -> PointwiseDelta:
        counts = tuple(counts)
        if sum(counts) != self.n:
            raise ValueError("histogram does not sum to n")
        best, arg = self.zero, None
        seen = {}
        for i, j in itertools.permutations(range(len(counts)), 2):
            a, b = counts[i], counts[j]
            if a < 1:
                continue
            if (a, b) not in seen:
                seen[(a, b)] = self.pair(a, b)
            score, direction = seen[(a, b)]
            if arg is None or score > best:
                best, arg = score, (i, j, direction)
        if arg is None:
            return PointwiseDelta(self.to_value(self.zero))
        i, j, direction = arg
        nb = list(counts)
        nb[i] -= 1
        nb[j] += 1
        return PointwiseDelta(self.to_value(best), tuple(nb), direction, self.to_log(best))

    def two_type_score(self, a: int):
        """Score of ``delta_eps((a, n - a))``."""
        n = self.n
        cands = []
        if a >= 1:
            cands += [self.D(a, n - a), self.D(n - a + 1, a - 1)]
        if a <= n - 1:
            cands += [self.D(n - a, a), self.D(a + 1, n - a - 1)]
        return max(cands)

    def two_type_table(self):
        """Scores of ``delta_eps((a, n - a))`` for ``a = 0..n``."""
        scores = [self.two_type_score(a) for a in range(self.n + 1)]
        return scores if self.mode == RATIONAL else np.array(scores, dtype=float)

    def pair_matrix(self, values: np.ndarray) -> np.ndarray:
        """Float scores ``max(D(a, b), D(b + 1, a - 1))`` on ``values x values``.

        Rows with ``a = 0`` and cells with ``a + b > n`` are ``-inf``.
        """
        k = len(values)
        out = np.full((k, k), -math.inf)
        for x, a in enumerate(values):
            if a < 1:
                continue
            for y, b in enumerate(values):
                if a + b <= self.n:
                    s = self.pair(int(a), int(b))[0]
                    out[x, y] = float(s) if self.mode == FLOAT else self.to_log(s)
        return out


@lru_cache(maxsize=128)
def shm_kernel(n: int, T: int, eps: Epsilon, mode: str) -> ShmKernel:
    return ShmKernel(n, T, eps, mode)


# ---------------------------------------------------------------------------
# generic pointwise delta


def _neighbor_pairs(mech: MechanismDescriptor, H: HistogramDB):
    if mech.kind == COUNTING:
        # only the marked count matters, so neighbours differ by one marked record
        marked = mech.extra.get("marked", 0)
        M = H.counts[marked]
        other = next(j for j in range(H.m) if j != marked)
        if M >= 1:
            c = list(H.counts)
            c[marked] -= 1
            c[other] += 1
            yield HistogramDB(c)
        if M <= H.n - 1:
            donor = next(j for j in range(H.m) if j != marked and H.counts[j] > 0)
            c = list(H.counts)
            c[donor] -= 1
            c[marked] += 1
            yield HistogramDB(c)
        return
    for _, _, nb in H.neighbors():
        yield nb


def pointwise_delta_enumerated(mech: MechanismDescriptor, H: HistogramDB, eps, mode: str | None = None,
                               cap: int = DEFAULT_OUTPUT_CAP) -> PointwiseDelta:
    """``delta_eps(H)`` from full output distributions of every neighbour."""
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    p = output_pmf(mech, H, mode, cap)
    best = Fraction(0) if mode == RATIONAL else 0.0
    arg = (None, None)
    for nb in _neighbor_pairs(mech, H):
        q = output_pmf(mech, nb, mode, cap)
        for direction, val in (("forward", directed_d(p, q, eps, mode)), ("reverse", directed_d(q, p, eps, mode))):
            if val > best:
                best, arg = val, (nb.counts, direction)
    log_value = -math.inf if best <= 0 else math.log(best)
    return PointwiseDelta(best, arg[0], arg[1], log_value)


def paired_pointwise_delta(mech1: MechanismDescriptor, mech2: MechanismDescriptor, H, eps,
                           mode: str | None = None, cap: int = DEFAULT_OUTPUT_CAP) -> PointwiseDelta:
    """``delta_eps(H)`` of the mechanism publishing two independent runs ``(M1(H), M2(H))``."""
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    if not isinstance(H, HistogramDB):
        H = HistogramDB(H)
    if mech1.kind == COUNTING or mech2.kind == COUNTING:
        raise ValueError("paired runs are defined here for mechanisms with replacement neighbours")
    p = paired_output_pmf(mech1, mech2, H, mode, cap)
    best = Fraction(0) if mode == RATIONAL else 0.0
    arg = (None, None)
    for _, _, nb in H.neighbors():
        q = paired_output_pmf(mech1, mech2, nb, mode, cap)
        for direction, val in (("forward", directed_d(p, q, eps, mode)), ("reverse", directed_d(q, p, eps, mode))):
            if val > best:
                best, arg = val, (nb.counts, direction)
    log_value = -math.inf if best <= 0 else math.log(best)
    return PointwiseDelta(best, arg[0], arg[1], log_value)


def pointwise_delta(mech: MechanismDescriptor, H, eps, mode: str | None = None,
                    method: str = "auto", cap: int = DEFAULT_OUTPUT_CAP) -> PointwiseDelta:
    """Database-wise parameter ``delta_eps(H)`` over all replacement neighbours.

    ``method="pairs"`` (the default for the sampling histogram) uses the
    pair-reduced kernel; ``method="enumerate"`` builds every neighbour's
    full output distribution and is subject to the output cap.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    if not isinstance(H, HistogramDB):
        H = HistogramDB(H)
    mech.check_database(H.n)
    if mech.kind == CONTINUOUS:
        raise ValueError("the continuous average has no finite output law; use continuous_average_witness")
    if mech.kind == SHM and method in ("auto", "pairs"):
        return shm_kernel(H.n, mech.T, eps, mode).pointwise(H.counts)
    return pointwise_delta_enumerated(mech, H, eps, mode, cap)


def all_histograms(n: int, m: int):
    """Every histogram of ``n`` records over ``m`` types."""
    for bars in itertools.combinations(range(n + m - 1), m - 1):
        prev, counts = -1, []
        for bar in bars:
            counts.append(bar - prev - 1)
            prev = bar
        counts.append(n + m - 2 - prev)
        yield tuple(counts)


def worst_case_dp_delta(mech: MechanismDescriptor, n: int, m: int, eps, mode: str | None = None,
                        max_histograms: int = 200_000, return_argmax: bool = False):
    """Smallest ``delta`` making ``mech`` ``(eps, delta)``-DP on ``n`` records over ``m`` types.

    This is the maximum of the database-wise parameter over all histograms.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    if m < 2:
        raise ValueError("need at least two types")
    if comb(n + m - 1, m - 1) > max_histograms:
        raise ValueError(f"histogram space for n={n}, m={m} is too large to sweep exactly")
    if mech.kind == SHM and m == 2:
        kern = shm_kernel(n, mech.T, eps, mode)
        scores = kern.two_type_table()
        a = int(np.argmax(scores)) if mode == FLOAT else max(range(n + 1), key=lambda i: scores[i])
        value = kern.to_value(scores[a])
        return (value, (a, n - a)) if return_argmax else value
    best, arg = (Fraction(0) if mode == RATIONAL else 0.0), None
    for counts in all_histograms(n, m):
        val = pointwise_delta(mech, HistogramDB(counts), eps, mode).value
        if arg is None or val > best:
            best, arg = val, counts
    return (best, arg) if return_argmax else best


# ---------------------------------------------------------------------------
# counting with replacement


def counting_delta(n: int, T: int, M: int, eps, mode: str | None = None, two_sided: bool = True):
    """Database-wise parameter of the with-replacement counter at ``M`` marked records.

    ``two_sided=False`` keeps only the divergences *from* the database to
    its neighbours ``M - 1`` and ``M + 1``; ``two_sided=True`` also
    includes the reverse directions.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    p = with_replacement_count_pmf(M, n, T, mode)
    best = Fraction(0) if mode == RATIONAL else 0.0
    for M2 in (M - 1, M + 1):
        if 0 <= M2 <= n:
            q = with_replacement_count_pmf(M2, n, T, mode)
            best = max(best, directed_d(p, q, eps, mode))
            if two_sided:
                best = max(best, directed_d(q, p, eps, mode))
    return best


# ---------------------------------------------------------------------------
# approximate max divergence


def approx_max_divergence(p, q, delta, mode: str | None = None) -> float:
    """``max_S ln((p(S) - delta) / q(S))`` over output sets with ``p(S) >= delta``.

    The optimum is attained on a prefix of the outputs sorted by likelihood
    ratio ``p/q``, so only prefixes are scanned.  Returns ``+inf`` when an
    admissible set has ``q(S) = 0`` and ``p(S) > delta``.
    """
    mode = resolve_mode(mode)
    if isinstance(p, FinitePMF) and isinstance(q, FinitePMF) and p.support != q.support:
        raise ValueError("p and q must share one support")
    pm, qm = _as_mapping(p), _as_mapping(q)
    conv = to_fraction if mode == RATIONAL else float
    delta = conv(delta)
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    items = [(conv(pm.get(k, 0)), conv(qm.get(k, 0))) for k in set(pm) | set(qm)]
    items = [(a, b) for a, b in items if a > 0 or b > 0]

    def ratio_key(item):
        a, b = item
        return (1, 0) if b == 0 else (0, a / b)

    items.sort(key=ratio_key, reverse=True)
    best = -math.inf
    ps = qs = conv(0)
    for a, b in items:
        ps += a
        qs += b
        if ps < delta:
            continue
        if qs == 0:
            if ps > delta:
                return math.inf
            continue
        gap = ps - delta
        if gap > 0:
            best = max(best, math.log(gap / qs))
    return best
