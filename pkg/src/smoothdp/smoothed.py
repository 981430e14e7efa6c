"""Smoothed delta: the worst expected database-wise parameter over ``Pi^n``.

The expectation ``E_{x ~ pi_1 x ... x pi_n}[delta_eps(x)]`` is multilinear
in the per-agent distributions, so its maximum over the convex hull is
attained when every agent sits on a hull vertex.  The mechanisms are
anonymous, so only the number of agents on each vertex matters.  With two
record types and two vertices this leaves ``n + 1`` candidate assignments,
each of which is swept exactly by :func:`smoothed_delta_exact`.  Larger
problems go through the seeded Monte-Carlo estimator
:func:`smoothed_delta_mc`.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .dist import DistributionSet, reduce_to_vertices
from .mechanisms import COUNTING, SHM, HistogramDB, MechanismDescriptor
from .numeric import FLOAT, RATIONAL, Epsilon, comb, logsumexp, resolve_mode, safe_exp, to_fraction
from .pointwise import counting_delta, pointwise_delta, shm_kernel
from .reports import ESTIMATE, EXACT, PrivacyReport

MONTE_CARLO = "monte_carlo"
QUERY_MODES = (EXACT, MONTE_CARLO)
EXACT_CAP = {FLOAT: 5000, RATIONAL: 200}
MC_CHUNK = 1024


@dataclass(frozen=True)
class PrivacyQuery:
    mech: MechanismDescriptor
    eps: Epsilon
    n: int
    pi: DistributionSet
    mode: str = EXACT
    trials: int = 10_000
    seed: int = 0
    confidence: float = 0.99
    numeric: str | None = None
    mixtures: tuple = ()
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "eps", Epsilon.of(self.eps))
        object.__setattr__(self, "numeric", resolve_mode(self.numeric))
        object.__setattr__(self, "mixtures", tuple(tuple(int(k) for k in mix) for mix in self.mixtures))
        if self.mode not in QUERY_MODES:
            raise ValueError(f"query mode must be one of {QUERY_MODES}")
        if int(self.n) < 1:
            raise ValueError("need at least one record")
        if int(self.trials) < 1:
            raise ValueError("Monte-Carlo mode needs at least one trial")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie strictly between 0 and 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.threads) < 1:
            raise ValueError("threads must be positive")
        for mix in self.mixtures:
            if len(mix) != len(self.pi) or sum(mix) != self.n or min(mix) < 0:
                raise ValueError("a mixture gives a non-negative agent count per member, summing to n")
        self.mech.check_database(int(self.n))


@dataclass(frozen=True)
class Candidate:
    """Agents per member of a distribution set (an anonymous assignment class)."""

    counts: tuple
    label: str
    heuristic: bool = False


def homogeneous_candidates(pi: DistributionSet, n: int = 1, mode: str | None = None) -> list[Candidate]:
    """One homogeneous assignment per hull vertex, as indices into ``pi``."""
    from .dist import vertex_indices

    verts = vertex_indices(pi, mode)
    out = []
    for v in verts:
        counts = [0] * len(pi)
        counts[v] = n
        out.append(Candidate(tuple(counts), f"all agents on member {v}", heuristic=len(verts) >= 3))
    return out


# ---------------------------------------------------------------------------
# two-type tables


def _two_type_scores(mech: MechanismDescriptor, n: int, eps: Epsilon, mode: str):
    """Scores of ``delta_eps`` for two-type databases with ``a`` records of type 0.

    Returns ``(scores, to_value)``; float scores are logs.
    """
    if mech.kind == SHM:
        kern = shm_kernel(n, mech.T, eps, mode)
        return kern.two_type_table(), kern.to_value
    if mech.kind == COUNTING:
        marked = mech.extra.get("marked", 0)
        vals = [counting_delta(n, mech.T, a if marked == 0 else n - a, eps, mode) for a in range(n + 1)]
        if mode == RATIONAL:
            return vals, lambda s: s
        return np.array([math.log(v) if v > 0 else -math.inf for v in vals]), safe_exp
    raise ValueError("the two-type engine covers the sampling histogram and the counting mechanism")


def _sweep_rational(scores: list, n: int, pA: Fraction, pB: Fraction):
    """Exact ``E_k`` for every split ``k`` agents on A, ``n - k`` on B."""
    powA = [Fraction(1)]
    powA1 = [Fraction(1)]
    for _ in range(n):
        powA.append(powA[-1] * pA)
        powA1.append(powA1[-1] * (1 - pA))
    F = list(scores)
    out = [Fraction(0)] * (n + 1)
    for j in range(n + 1):
        k = n - j
        out[k] = sum((comb(k, i) * powA[i] * powA1[k - i] * F[i] for i in range(k + 1)), Fraction(0))
        if j < n:
            F = [pB * F[s + 1] + (1 - pB) * F[s] for s in range(n - j)]
    return out


def _log_binom_pmf(k: int, p: float) -> np.ndarray:
    i = np.arange(k + 1)
    if p == 0.0:
        return np.where(i == 0, 0.0, -np.inf)
    if p == 1.0:
        return np.where(i == k, 0.0, -np.inf)
    return stats.binom.logpmf(i, k, p)


def _sweep_log(scores: np.ndarray, n: int, pA: float, pB: float) -> np.ndarray:
    """Log-domain version of :func:`_sweep_rational`."""
    with np.errstate(divide="ignore"):
        lb, lb1 = math.log(pB) if pB > 0 else -math.inf, math.log1p(-pB) if pB < 1 else -math.inf
    F = np.asarray(scores, dtype=float).copy()
    out = np.empty(n + 1)
    for j in range(n + 1):
        k = n - j
        out[k] = logsumexp(_log_binom_pmf(k, pA) + F[: k + 1])
        if j < n:
            F = np.logaddexp(lb + F[1:], lb1 + F[:-1])
    return out


def split_expectations(mech: MechanismDescriptor, n: int, eps, pA, pB, mode: str | None = None):
    """Expected ``delta_eps`` for each split of agents over two Bernoulli-type vertices.

    Entry ``k`` is the expectation when ``k`` agents put mass ``pA`` on
    type 0 and the other ``n - k`` put mass ``pB`` on it.  Float mode
    returns natural logs.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    scores, _ = _two_type_scores(mech, n, eps, mode)
    if mode == RATIONAL:
        return _sweep_rational(scores, n, to_fraction(pA), to_fraction(pB))
    return _sweep_log(scores, n, float(pA), float(pB))


def smoothed_delta_exact(q: PrivacyQuery) -> PrivacyReport:
    mode = q.numeric
    n = int(q.n)
    if n > EXACT_CAP[mode]:
        raise ValueError(f"n={n} exceeds the exact cap of {EXACT_CAP[mode]} in {mode} mode; use Monte-Carlo mode")
    pi = q.pi.to_mode(mode)
    if pi.m != 2:
        raise ValueError("the exact engine needs two record types; use Monte-Carlo mode")
    verts = reduce_to_vertices(pi, mode)
    if len(verts) > 2:
        raise AssertionError("two-type sets have at most two hull vertices")
    pA = verts[0].mass[0]
    pB = verts[-1].mass[0]
    values = split_expectations(q.mech, n, q.eps, pA, pB, mode)
    ks = range(n + 1) if len(verts) == 2 else [n]
    if mode == RATIONAL:
        k = max(ks, key=lambda i: values[i])
        delta = values[k]
        log_delta = math.log(delta) if delta > 0 else -math.inf
        exact_value = str(delta)
    else:
        k = max(ks, key=lambda i: values[i])
        log_delta = float(values[k])
        delta = safe_exp(log_delta)
        exact_value = None
    return PrivacyReport(
        delta=float(delta),
        kind=EXACT,
        eps=q.eps.value,
        n=n,
        T=q.mech.T,
        log_delta=log_delta,
        exact_value=exact_value,
        pi_fingerprint=q.pi.fingerprint(),
        provenance={
            "path": "exact split sweep over hull vertices",
            "numeric_mode": mode,
            "mechanism": q.mech.kind,
            "vertices": [str(v.mass[0]) if mode == RATIONAL else float(v.mass[0]) for v in verts],
            "maximizer": {"agents_on_first_vertex": k, "agents_on_second_vertex": n - k},
        },
    )


# ---------------------------------------------------------------------------
# exhaustive small-instance engine


def _draw_law(law: dict, pmf_mass: Sequence, mode: str) -> dict:
    out: dict = {}
    for hist, p in law.items():
        for t, w in enumerate(pmf_mass):
            if w == 0:
                continue
            h = list(hist)
            h[t] += 1
            key = tuple(h)
            out[key] = out.get(key, 0) + p * w
    return out


def database_law(pi: DistributionSet, counts: Sequence[int], mode: str | None = None) -> dict:
    """Law of the database histogram when ``counts[v]`` agents follow member ``v``."""
    mode = resolve_mode(mode)
    pi = pi.to_mode(mode)
    law = {tuple([0] * pi.m): Fraction(1) if mode == RATIONAL else 1.0}
    for member, k in zip(pi.members, counts):
        for _ in range(k):
            law = _draw_law(law, member.mass, mode)
    return law


def smoothed_delta_enumerated(mech: MechanismDescriptor, eps, n: int, pi: DistributionSet,
                              mode: str | None = None, reduce: bool = False):
    """Smoothed delta by sweeping every agent-count split over the members of ``pi``.

    Works for any number of types and members; cost grows quickly, so it
    is meant for small instances.  Returns ``(value, counts)``.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    pi = pi.to_mode(mode)
    if reduce:
        pi = reduce_to_vertices(pi, mode)
    cache: dict = {}

    def delta_of(h):
        if h not in cache:
            cache[h] = pointwise_delta(mech, HistogramDB(h), eps, mode).value
        return cache[h]

    best, arg = None, None
    for bars in itertools.combinations(range(n + len(pi) - 1), len(pi) - 1):
        prev, counts = -1, []
        for bar in bars:
            counts.append(bar - prev - 1)
            prev = bar
        counts.append(n + len(pi) - 2 - prev)
        law = database_law(pi, counts, mode)
        total = sum((p * delta_of(h) for h, p in law.items()), Fraction(0)) if mode == RATIONAL else math.fsum(
            p * delta_of(h) for h, p in law.items())
        if best is None or total > best:
            best, arg = total, tuple(counts)
    return best, arg


# ---------------------------------------------------------------------------
# Monte Carlo


class _Evaluator:
    """Float-mode ``delta_eps`` for batches of drawn histograms, with lazy tables."""

    def __init__(self, mech: MechanismDescriptor, n: int, eps: Epsilon, m: int):
        self.mech, self.n, self.eps, self.m = mech, n, eps, m
        self.column = None
        if mech.kind == COUNTING:
            self.column = mech.extra.get("marked", 0)
        elif mech.kind == SHM and m == 2:
            self.column = 0
        self._line = np.full(n + 2, np.nan)
        self._square = np.full((0, 0), np.nan)
        self._generic: dict = {}
        if mech.kind == SHM:
            self.kern = shm_kernel(n, mech.T, eps, FLOAT)

    def _line_score(self, a: int) -> float:
        if self.mech.kind == SHM:
            return float(self.kern.two_type_score(a))
        v = counting_delta(self.n, self.mech.T, a, self.eps, FLOAT)
        return math.log(v) if v > 0 else -math.inf

    def _ensure_square(self, values: np.ndarray) -> None:
        top = int(values.max()) + 1
        if top > self._square.shape[0]:
            grown = np.full((top, top), np.nan)
            k = self._square.shape[0]
            grown[:k, :k] = self._square
            self._square = grown
        sub = self._square[np.ix_(values, values)]
        for x, y in zip(*np.nonzero(np.isnan(sub))):
            a, b = int(values[x]), int(values[y])
            if a < 1 or a + b > self.n:
                self._square[a, b] = -np.inf
            else:
                self._square[a, b] = float(self.kern.pair(a, b)[0])

    def log_deltas(self, H: np.ndarray) -> np.ndarray:
        if self.column is not None:
            col = H[:, self.column]
            for a in np.unique(col[np.isnan(self._line[col])]):
                self._line[a] = self._line_score(int(a))
            return self._line[col]
        if self.mech.kind == SHM:
            self._ensure_square(np.unique(H))
            out = np.empty(len(H))
            for t, row in enumerate(H):
                vals, cnt = np.unique(row, return_counts=True)
                sub = self._square[np.ix_(vals, vals)].copy()
                single = np.nonzero(cnt == 1)[0]
                sub[single, single] = -np.inf
                out[t] = sub.max()
            return out
        out = np.empty(len(H))
        for t, row in enumerate(H):
            key = tuple(int(v) for v in row)
            if key not in self._generic:
                self._generic[key] = pointwise_delta(self.mech, HistogramDB(key), self.eps, FLOAT).log_value
            out[t] = self._generic[key]
        return out


def _draw_chunk(masses: np.ndarray, counts: Sequence[int], size: int, seq: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seq)
    H = np.zeros((size, masses.shape[1]), dtype=np.int64)
    for member, k in enumerate(counts):
        if k:
            H += rng.multinomial(k, masses[member], size=size)
    return H


@dataclass(frozen=True)
class CandidateEstimate:
    candidate: Candidate
    mean: float
    ci: tuple
    hoeffding_ci: tuple
    std: float
    skewness: float = 0.0
    trials: int = 1

    @property
    def normal_ci_reliable(self) -> bool:
        """Cochran's rule ``trials > 25 g1^2`` for the normal approximation to the mean."""
        return self.trials > 25 * self.skewness**2


def _estimate_candidate(q: PrivacyQuery, masses: np.ndarray, cand_index: int, cand: Candidate,
                        evaluator: _Evaluator, pool) -> CandidateEstimate:
    trials = int(q.trials)
    sizes = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        sizes.append(trials % MC_CHUNK)
    seqs = [np.random.SeedSequence(entropy=int(q.seed), spawn_key=(cand_index, c)) for c in range(len(sizes))]
    samples: list[np.ndarray] = []
    group = max(1, int(q.threads)) * 4
    for start in range(0, len(sizes), group):
        jobs = list(zip(sizes[start:start + group], seqs[start:start + group]))
        if pool is None:
            draws = [_draw_chunk(masses, cand.counts, s, seq) for s, seq in jobs]
        else:
            draws = list(pool.map(lambda job: _draw_chunk(masses, cand.counts, *job), jobs))
        for H in draws:
            samples.append(np.exp(evaluator.log_deltas(H)))
    x = np.concatenate(samples)
    mean = math.fsum(x) / trials
    mean = min(1.0, max(0.0, mean))
    alpha = 1 - q.confidence
    skew = 0.0
    if trials == 1:
        ci = (0.0, 1.0)
        std = 0.0
    else:
        std = math.sqrt(math.fsum((x - mean) ** 2) / (trials - 1))
        if std > 0:
            skew = float(stats.skew(x))
        half = float(stats.norm.ppf(1 - alpha / 2)) * std / math.sqrt(trials)
        ci = (max(0.0, mean - half), min(1.0, mean + half))
    h = math.sqrt(math.log(2 / alpha) / (2 * trials))
    hci = (max(0.0, mean - h), min(1.0, mean + h))
    return CandidateEstimate(cand, mean, ci, hci, std, skew, trials)


def smoothed_delta_mc(q: PrivacyQuery) -> PrivacyReport:
    """Seeded Monte-Carlo estimate of the smoothed delta.

    Every candidate assignment gets its own counter-based random streams,
    keyed by ``(seed, candidate, chunk)`` with a fixed chunk size, so the
    report does not depend on the number of worker threads.
    """
    n = int(q.n)
    pi = q.pi.to_mode(FLOAT)
    cands = homogeneous_candidates(pi, n, FLOAT)
    n_vertices = len(cands)
    for mix in q.mixtures:
        cands.append(Candidate(mix, "user mixture " + ",".join(map(str, mix))))
    masses = pi.as_array()
    masses = masses / masses.sum(axis=1, keepdims=True)
    evaluator = _Evaluator(q.mech, n, q.eps, pi.m)
    pool = ThreadPoolExecutor(max_workers=int(q.threads)) if int(q.threads) > 1 else None
    try:
        ests = [_estimate_candidate(q, masses, i, c, evaluator, pool) for i, c in enumerate(cands)]
    finally:
        if pool is not None:
            pool.shutdown()
    best = max(ests, key=lambda e: e.mean)
    lower_bound = n_vertices >= 2
    return PrivacyReport(
        delta=best.mean,
        kind=ESTIMATE,
        eps=q.eps.value,
        n=n,
        T=q.mech.T,
        ci=best.ci,
        hoeffding_ci=best.hoeffding_ci,
        seed=int(q.seed),
        pi_fingerprint=q.pi.fingerprint(),
        provenance={
            "path": "monte carlo over candidate assignments",
            "mechanism": q.mech.kind,
            "trials": int(q.trials),
            "confidence": q.confidence,
            "maximizer": best.candidate.label,
            "lower_bound_on_max": lower_bound,
            "heuristic_search": any(c.heuristic for c in cands),
            # heavy right tails make the normal interval undercover; hoeffding_ci stays valid
            "sample_skewness": best.skewness,
            "normal_ci_reliable": best.normal_ci_reliable,
            "candidates": [
                {"label": e.candidate.label, "mean": e.mean, "ci": list(e.ci), "std": e.std,
                 "skewness": e.skewness} for e in ests
            ],
        },
    )


def smoothed_delta(q: PrivacyQuery) -> PrivacyReport:
    return smoothed_delta_exact(q) if q.mode == EXACT else smoothed_delta_mc(q)
