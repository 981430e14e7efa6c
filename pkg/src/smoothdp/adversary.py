"""Hypothesis-testing and Bayesian-adversary views of the privacy parameter.

An adversary who knows every record but one observes a mechanism output
and guesses the missing record by maximum a-posteriori inference under a
uniform prior.  Its adjusted utility with threshold ``t`` counts only the
outputs on which the MAP guess is correct with posterior above ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .mechanisms import HistogramDB, MechanismDescriptor, output_pmf
from .numeric import RATIONAL, Epsilon, convert, resolve_mode
from .pointwise import _as_mapping, _rational_factor, directed_d


@dataclass(frozen=True)
class ErrorPair:
    type1: float | Fraction
    type2: float | Fraction
    rejection_region: tuple

    def __post_init__(self):
        if not (0 <= self.type1 <= 1 and 0 <= self.type2 <= 1):
            raise ValueError("error rates must lie in [0, 1]")


@dataclass(frozen=True)
class AdjustedUtility:
    value: float | Fraction
    threshold_t: float | Fraction


def error_pair(p, q, region: Iterable, mode: str | None = None) -> ErrorPair:
    """Type I error ``p(region)`` and type II error ``1 - q(region)``.

    ``p`` is the output law under the null hypothesis and ``q`` under the
    alternative; the test rejects the null on ``region``.
    """
    mode = resolve_mode(mode)
    pm, qm = _as_mapping(p), _as_mapping(q)
    region = tuple(region)
    support = set(pm) | set(qm)
    missing = [a for a in region if a not in support]
    if missing:
        raise ValueError(f"region contains outputs outside the support: {missing}")
    zero = Fraction(0) if mode == RATIONAL else 0.0
    t1 = sum((convert(pm.get(a, 0), mode) for a in set(region)), zero)
    t2 = 1 - sum((convert(qm.get(a, 0), mode) for a in set(region)), zero)
    return ErrorPair(t1, t2, region)


def dp_error_tradeoff_check(p, q, eps, delta, mode: str | None = None) -> bool:
    """Whether ``e^eps E_I + E_II >= 1 - delta`` holds for every region, both ways round.

    The weakest region is the positive set of ``p - e^eps q``, so the check
    reduces to ``delta`` dominating both directed divergences.
    """
    mode = resolve_mode(mode)
    delta = convert(delta, mode)
    return delta >= directed_d(p, q, eps, mode) and delta >= directed_d(q, p, eps, mode)


def _posterior_table(mech: MechanismDescriptor, x_minus_i: HistogramDB, typespace: Sequence[int], mode: str):
    laws = []
    for X in typespace:
        counts = list(x_minus_i.counts)
        counts[X] += 1
        laws.append(output_pmf(mech, HistogramDB(counts), mode))
    outputs = sorted({a for law in laws for a in law}, key=repr)
    zero = Fraction(0) if mode == RATIONAL else 0.0
    map_post = {}
    for a in outputs:
        probs = [law.get(a, zero) for law in laws]
        total = sum(probs, zero)
        if total > 0:
            # ties resolve to the lowest type index; only the maximum value matters here
            best = max(range(len(probs)), key=lambda i: (probs[i], -i))
            map_post[a] = probs[best] / total
    return laws, map_post


def adjusted_utility(mech: MechanismDescriptor, x_minus_i: HistogramDB, t, typespace: Sequence[int] | None = None,
                     mode: str | None = None) -> AdjustedUtility:
    """``u(t, x_-i) = max_X E_{a ~ M(x_-i + X)}[max(0, maxpost(a) - t)] / (1 - t)``.

    ``1 - maxpost(a)`` is the 0-1 loss of the MAP guess after seeing
    ``a``.  The uniform prior ranges over ``typespace`` (all types by
    default).
    """
    mode = resolve_mode(mode)
    t = convert(t, mode)
    if not 0 < t < 1:
        raise ValueError("the threshold t must lie in (0, 1)")
    if not isinstance(x_minus_i, HistogramDB):
        x_minus_i = HistogramDB(x_minus_i)
    typespace = list(range(x_minus_i.m)) if typespace is None else list(typespace)
    laws, map_post = _posterior_table(mech, x_minus_i, typespace, mode)
    zero = Fraction(0) if mode == RATIONAL else 0.0
    best = zero
    for law in laws:
        gain = sum((pa * max(zero, map_post[a] - t) for a, pa in law.items() if pa > 0), zero)
        best = max(best, gain)
    return AdjustedUtility(best / (1 - t), t)


def _shared_part(x: HistogramDB, x_prime: HistogramDB) -> tuple[HistogramDB, list[int]]:
    """``x cap x'`` and the two types ``[X_i, X'_i]`` in which the neighbours differ."""
    if x.m != x_prime.m:
        raise ValueError("x and x_prime must have the same number of types")
    diff = [a - b for a, b in zip(x.counts, x_prime.counts)]
    if sorted(diff) != [-1] + [0] * (len(diff) - 2) + [1]:
        raise ValueError("x and x_prime must be replacement neighbours")
    counts = list(x.counts)
    counts[diff.index(1)] -= 1
    return HistogramDB(counts), [diff.index(1), diff.index(-1)]


@dataclass(frozen=True)
class UtilityBoundResult:
    utility: float | Fraction
    d_sum: float | Fraction
    upper_holds: bool
    lower_holds: bool | None

    @property
    def holds(self) -> bool:
        return self.upper_holds and self.lower_holds is not False


def utility_threshold(eps, mode: str | None = None):
    """``e^eps / (e^eps + 1)``, the threshold tied to privacy level ``eps``."""
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    if mode == RATIONAL:
        f = _rational_factor(eps)
        if f is None:
            raise OverflowError("eps too large for an exact threshold")
        return f / (f + 1)
    return 1.0 / (1.0 + math.exp(-eps.log_factor))


def utility_bound_details(mech: MechanismDescriptor, x, x_prime, eps, mode: str | None = None,
                          pair_prior: bool = False) -> UtilityBoundResult:
    """Both sides of the utility bound for neighbours ``x`` and ``x'``.

    By default the adversary's prior ranges over every type; with
    ``pair_prior=True`` it ranges only over the two types in which ``x``
    and ``x'`` differ.
    """
    mode = resolve_mode(mode)
    eps = Epsilon.of(eps)
    x = x if isinstance(x, HistogramDB) else HistogramDB(x)
    x_prime = x_prime if isinstance(x_prime, HistogramDB) else HistogramDB(x_prime)
    shared, pair = _shared_part(x, x_prime)
    t = utility_threshold(eps, mode)
    u = adjusted_utility(mech, shared, t, typespace=pair if pair_prior else None, mode=mode).value
    p, q = output_pmf(mech, x, mode), output_pmf(mech, x_prime, mode)
    d_sum = directed_d(p, q, eps, mode) + directed_d(q, p, eps, mode)
    lower = (d_sum <= 3 * u) if x.m == 2 else None
    return UtilityBoundResult(u, d_sum, u < d_sum, lower)


def utility_bound_check(mech: MechanismDescriptor, x, x_prime, eps, mode: str | None = None,
                        pair_prior: bool = False) -> bool:
    """``u(e^eps/(e^eps+1), x cap x') < d(x, x') + d(x', x)``, plus ``d + d <= 3u`` for two types.

    The inequality is strict, so it fails when both sides vanish.
    """
    return utility_bound_details(mech, x, x_prime, eps, mode, pair_prior).holds
