"""Output distributions of the built-in sampling mechanisms.

Four mechanism kinds are modelled:

* ``histogram_without_replacement``: sample ``T`` of the ``n`` records
  without replacement and publish the histogram of the sample;
* ``counting_with_replacement``: draw ``T`` records with replacement and
  publish how many of them are of the marked type;
* ``continuous_average``: publish the average of ``T`` records sampled
  without replacement from real-valued data;
* ``coin_flip``: a one-record mechanism that reports the bit with
  probability ``p`` and its complement otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numeric import RATIONAL, comb, convert, log_comb, resolve_mode

SHM = "histogram_without_replacement"
COUNTING = "counting_with_replacement"
CONTINUOUS = "continuous_average"
COIN_FLIP = "coin_flip"
MECHANISM_KINDS = (SHM, COUNTING, CONTINUOUS, COIN_FLIP)

DEFAULT_OUTPUT_CAP = 2_000_000


class EnumerationLimitError(RuntimeError):
    """Raised when exact enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class HistogramDB:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c != orig for c, orig in zip(counts, self.counts)):
            raise ValueError("histogram counts must be integers")
        if len(counts) < 2:
            raise ValueError("a histogram needs at least two types")
        if any(c < 0 for c in counts):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def m(self) -> int:
        return len(self.counts)

    def __getitem__(self, i) -> int:
        return self.counts[i]

    def neighbors(self):
        """Yield ``(donor, receiver, H')`` for every replacement neighbour."""
        for i, j in itertools.permutations(range(self.m), 2):
            if self.counts[i] >= 1:
                c = list(self.counts)
                c[i] -= 1
                c[j] += 1
                yield i, j, HistogramDB(c)


@dataclass(frozen=True)
class SampleHistogram:
    counts: tuple

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise ValueError("sample counts must be non-negative")

    @property
    def T(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class MechanismDescriptor:
    kind: str
    T: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MECHANISM_KINDS:
            raise ValueError(f"unknown mechanism kind {self.kind!r}")
        if self.kind != COIN_FLIP and int(self.T) < 1:
            raise ValueError("the sample count T must be at least 1")
        if self.kind == COIN_FLIP:
            p = self.extra.get("p")
            if p is None or not (0 <= p <= 1):
                raise ValueError("coin_flip needs a probability p in [0, 1]")

    def __hash__(self):
        return hash((self.kind, self.T, tuple(sorted(self.extra.items()))))

    @classmethod
    def shm(cls, T: int) -> "MechanismDescriptor":
        return cls(SHM, int(T))

    @classmethod
    def counting(cls, T: int, marked: int = 0) -> "MechanismDescriptor":
        return cls(COUNTING, int(T), {"marked": int(marked)})

    @classmethod
    def continuous_average(cls, T: int) -> "MechanismDescriptor":
        return cls(CONTINUOUS, int(T))

    @classmethod
    def coin_flip(cls, p) -> "MechanismDescriptor":
        return cls(COIN_FLIP, 1, {"p": p})

    def check_database(self, n: int) -> None:
        if self.kind in (SHM, CONTINUOUS) and self.T > n:
            raise ValueError(f"cannot sample T={self.T} records without replacement from n={n}")
        if self.kind == COIN_FLIP and n != 1:
            raise ValueError("the coin-flip mechanism acts on a single record")


# ---------------------------------------------------------------------------
# sampling without replacement


def shm_output_prob(H: HistogramDB, h: SampleHistogram, T: int | None = None, mode: str | None = None):
    """Multivariate hypergeometric probability of sample histogram ``h``."""
    mode = resolve_mode(mode)
    T = h.T if T is None else T
    if len(h.counts) != H.m:
        raise ValueError("sample and database histograms have different lengths")
    if h.T != T or T > H.n:
        raise ValueError("sample histogram must sum to T <= n")
    if any(hi > Hi for hi, Hi in zip(h.counts, H.counts)):
        return Fraction(0) if mode == RATIONAL else 0.0
    if mode == RATIONAL:
        num = 1
        for hi, Hi in zip(h.counts, H.counts):
            num *= comb(Hi, hi)
        return Fraction(num, comb(H.n, T))
    logp = float(np.sum(log_comb(H.counts, h.counts)) - log_comb(H.n, T))
    return math.exp(logp)


def count_outputs(H: HistogramDB, T: int) -> int:
    """Number of compositions of ``T`` bounded componentwise by ``H``."""
    ways = [1] + [0] * T
    for cap in H.counts:
        nxt = [0] * (T + 1)
        for total, w in enumerate(ways):
            if w:
                for add in range(min(cap, T - total) + 1):
                    nxt[total + add] += w
        ways = nxt
    return ways[T]


def enumerate_outputs(H: HistogramDB, T: int, cap: int = DEFAULT_OUTPUT_CAP) -> list[SampleHistogram]:
    if not 0 <= T <= H.n:
        raise ValueError("need 0 <= T <= n")
    total = count_outputs(H, T)
    if total > cap:
        raise EnumerationLimitError(
            f"{total} feasible outputs exceed the enumeration cap of {cap}; use Monte-Carlo mode"
        )
    out: list[SampleHistogram] = []
    counts = H.counts
    suffix = [0] * (len(counts) + 1)
    for i in range(len(counts) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + counts[i]

    def rec(i, remaining, prefix):
        if i == len(counts) - 1:
            if remaining <= counts[i]:
                out.append(SampleHistogram(prefix + [remaining]))
            return
        lo = max(0, remaining - suffix[i + 1])
        for hi in range(lo, min(counts[i], remaining) + 1):
            rec(i + 1, remaining - hi, prefix + [hi])

    rec(0, T, [])
    return out


def shm_output_pmf(H: HistogramDB, T: int, mode: str | None = None, cap: int = DEFAULT_OUTPUT_CAP) -> dict:
    mode = resolve_mode(mode)
    return {h.counts: shm_output_prob(H, h, T, mode) for h in enumerate_outputs(H, T, cap)}


# ---------------------------------------------------------------------------
# counting with replacement


def with_replacement_count_prob(M: int, n: int, T: int, k: int, mode: str | None = None):
    """Probability that ``T`` draws with replacement hit ``k`` of ``M`` marked records."""
    mode = resolve_mode(mode)
    if not (0 <= M <= n) or n < 1:
        raise ValueError("need 0 <= M <= n and n >= 1")
    if not 0 <= k <= T:
        return Fraction(0) if mode == RATIONAL else 0.0
    if mode == RATIONAL:
        q = Fraction(M, n)
        return comb(T, k) * q**k * (1 - q) ** (T - k)
    q = M / n
    if q in (0.0, 1.0):
        return 1.0 if k == (T if q == 1.0 else 0) else 0.0
    return math.exp(float(log_comb(T, k)) + k * math.log(q) + (T - k) * math.log1p(-q))


def with_replacement_count_pmf(M: int, n: int, T: int, mode: str | None = None) -> dict:
    return {k: with_replacement_count_prob(M, n, T, k, mode) for k in range(T + 1)}


# ---------------------------------------------------------------------------
# coin flip


def coin_flip_output_prob(X: int, p, a: int, mode: str | None = None):
    mode = resolve_mode(mode)
    if X not in (0, 1) or a not in (0, 1):
        raise ValueError("coin-flip inputs and outputs are bits")
    p = convert(p, mode)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return p if a == X else 1 - p


# ---------------------------------------------------------------------------
# generic output law


def output_pmf(mech: MechanismDescriptor, H: HistogramDB, mode: str | None = None,
               cap: int = DEFAULT_OUTPUT_CAP) -> dict:
    """Output distribution of ``mech`` on database ``H`` as ``{output: prob}``."""
    mode = resolve_mode(mode)
    mech.check_database(H.n)
    if mech.kind == SHM:
        return shm_output_pmf(H, mech.T, mode, cap)
    if mech.kind == COUNTING:
        marked = mech.extra.get("marked", 0)
        return with_replacement_count_pmf(H.counts[marked], H.n, mech.T, mode)
    if mech.kind == COIN_FLIP:
        if H.m != 2:
            raise ValueError("the coin-flip mechanism has a binary type space")
        X = 0 if H.counts[0] == 1 else 1
        p = mech.extra["p"]
        return {a: coin_flip_output_prob(X, p, a, mode) for a in (0, 1)}
    raise ValueError("the continuous average has no finite output distribution")


def paired_output_pmf(mech1: MechanismDescriptor, mech2: MechanismDescriptor, H: HistogramDB,
                      mode: str | None = None, cap: int = DEFAULT_OUTPUT_CAP) -> dict:
    """Law of ``(M1(H), M2(H))`` for two independent runs on the same database."""
    mode = resolve_mode(mode)
    p1 = output_pmf(mech1, H, mode, cap)
    p2 = output_pmf(mech2, H, mode, cap)
    if len(p1) * len(p2) > cap:
        raise EnumerationLimitError(f"{len(p1) * len(p2)} paired outputs exceed the enumeration cap of {cap}")
    return {(a, b): pa * pb for a, pa in p1.items() for b, pb in p2.items()}


# ---------------------------------------------------------------------------
# continuous sampling average


@dataclass(frozen=True)
class WitnessBound:
    n: int
    T: int
    delta_lower: float
    kind: str
    description: str


def continuous_average(x: Sequence[float], T: int, rng: np.random.Generator) -> float:
    """One run of the sampling-average mechanism on real-valued data ``x``."""
    x = np.asarray(x, dtype=float)
    if not 1 <= T <= len(x):
        raise ValueError("need 1 <= T <= n")
    return float(x[rng.choice(len(x), size=T, replace=False)].mean())


def continuous_average_witness(n: int, T: int) -> WitnessBound:
    """Lower bound ``T/n`` on the DP ``delta`` of the sampling average.

    Generic data (drawn from any distribution with a density on
    ``[0, 1]``) has all subset averages distinct almost surely.  Replace
    the last record by a fresh value ``X'_n``: the set of averages of
    ``T``-subsets containing ``X'_n`` has probability ``T/n`` under the
    neighbour and probability zero under the original database, whatever
    ``eps`` is.
    """
    if not 1 <= T <= n:
        raise ValueError("need 1 <= T <= n")
    return WitnessBound(
        n=n,
        T=T,
        delta_lower=T / n,
        kind="analytic_bound",
        description=(
            "distinguishing value: the replaced record X'_n; output set: "
            "averages of T-subsets that contain X'_n"
        ),
    )


def simulate_witness_mass(n: int, T: int, trials: int, seed: int, chunk: int = 2048) -> tuple[float, float]:
    """Monte-Carlo frequency with which a ``T``-sample contains a marked record.

    Samples without replacement are drawn as the ``T`` smallest of ``n``
    i.i.d. uniform keys; the marked record is the last one.  Returns the
    empirical frequency and its binomial standard error.
    """
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        keys = rng.random((size, n))
        rank = (keys[:, :-1] < keys[:, -1:]).sum(axis=1)
        hits += int((rank < T).sum())
        done += size
    freq = hits / trials
    return freq, math.sqrt(max(freq * (1 - freq), 0.0) / trials)
