"""Finite distributions over record types and sets of them.

A :class:`DistributionSet` plays the role of the family of per-agent
ground-truth distributions that smoothed privacy is taken over.  Mechanisms
only ever see histogram counts, so support labels are opaque ordinals.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, stats

from .numeric import FLOAT, RATIONAL, convert, resolve_mode, to_fraction

FLOAT_SUM_TOL = 1e-9

QUANT_LEVELS = 256
QUANT_OFFSET = 128


@dataclass(frozen=True)
class FinitePMF:
    support: tuple
    mass: tuple

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "mass", tuple(self.mass))
        if len(self.support) != len(self.mass):
            raise ValueError("support and mass must have the same length")
        if not self.support:
            raise ValueError("a PMF needs a non-empty support")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support labels must be distinct")
        if any(not (p >= 0) for p in self.mass):
            raise ValueError("probability masses must be non-negative")
        if self.is_exact:
            if sum(self.mass, Fraction(0)) != 1:
                raise ValueError("rational masses must sum to exactly 1")
        elif abs(math.fsum(float(p) for p in self.mass) - 1.0) > FLOAT_SUM_TOL:
            raise ValueError("masses must sum to 1")

    @property
    def is_exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.mass)

    @property
    def mode(self) -> str:
        return RATIONAL if self.is_exact else FLOAT

    def __len__(self) -> int:
        return len(self.support)

    def prob(self, label):
        return self.mass[self.support.index(label)]

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.mass])

    def to_mode(self, mode: str) -> "FinitePMF":
        if mode == RATIONAL:
            masses = [to_fraction(p) for p in self.mass]
            # decimal round-tripping of floats can leave the total a hair off 1
            drift = 1 - sum(masses, Fraction(0))
            if drift:
                if abs(drift) > Fraction(1, 10**9):
                    raise ValueError("masses do not sum to 1")
                # the least tidy entry (largest denominator) absorbs the drift
                top = max(range(len(masses)), key=lambda i: (masses[i].denominator, masses[i]))
                masses[top] += drift
            return FinitePMF(self.support, masses)
        return FinitePMF(self.support, [float(p) for p in self.mass])

    def reorder(self, labels: Sequence) -> "FinitePMF":
        labels = tuple(labels)
        if sorted(map(repr, labels)) != sorted(map(repr, self.support)):
            raise ValueError("reorder needs a permutation of the support")
        return FinitePMF(labels, [self.prob(lab) for lab in labels])


@dataclass(frozen=True)
class StrictPositivityCertificate:
    c: float | Fraction
    holds: bool


@dataclass(frozen=True)
class DistributionSet:
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("a distribution set needs at least one member")
        support = self.members[0].support
        for pmf in self.members[1:]:
            if pmf.support != support:
                raise ValueError("all members must share one support, in the same order")

    @property
    def support(self) -> tuple:
        return self.members[0].support

    @property
    def m(self) -> int:
        return len(self.support)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i) -> FinitePMF:
        return self.members[i]

    def to_mode(self, mode: str) -> "DistributionSet":
        return DistributionSet([pmf.to_mode(mode) for pmf in self.members])

    def as_array(self) -> np.ndarray:
        return np.array([pmf.as_array() for pmf in self.members])

    def subset(self, indices: Sequence[int]) -> "DistributionSet":
        return DistributionSet([self.members[i] for i in indices])

    def to_json(self) -> dict:
        return {
            "support": [_label_out(lab) for lab in self.support],
            "members": [[_mass_out(p) for p in pmf.mass] for pmf in self.members],
        }

    @classmethod
    def from_json(cls, data: Mapping, mode: str | None = None) -> "DistributionSet":
        mode = resolve_mode(mode)
        support = list(data["support"])
        members = []
        for row in data["members"]:
            if len(row) != len(support):
                raise ValueError("member length does not match the support")
            members.append(FinitePMF(support, [_mass_in(p) for p in row]).to_mode(mode))
        return cls(members)

    @classmethod
    def load(cls, path, mode: str | None = None) -> "DistributionSet":
        return cls.from_json(json.loads(Path(path).read_text()), mode)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    def fingerprint(self) -> str:
        """Hash of the canonical (support, sorted member masses) form."""
        rows = sorted([_canonical_mass(p) for p in pmf.mass] for pmf in self.members)
        blob = json.dumps({"support": [repr(lab) for lab in self.support], "members": rows})
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _label_out(label):
    if isinstance(label, (str, int)):
        return label
    return str(label)


def _mass_out(p):
    return str(p) if isinstance(p, Fraction) and p.denominator != 1 else (int(p) if isinstance(p, Fraction) else p)


def _mass_in(p):
    if isinstance(p, str):
        return Fraction(p)
    return p


def _canonical_mass(p) -> str:
    # 12 significant digits, so float and rational copies of a set agree
    return format(float(p), ".12g")


# ---------------------------------------------------------------------------
# constructors


def bernoulli_pmf(p, support=(0, 1), mode: str | None = None) -> FinitePMF:
    """Two-type distribution putting mass ``p`` on the first label."""
    mode = resolve_mode(mode)
    p = convert(p, mode)
    if not (0 <= p <= 1):
        raise ValueError(f"Bernoulli parameter must lie in [0, 1], got {p}")
    return FinitePMF(support, (p, 1 - p))


def quantization_grid() -> tuple:
    return tuple(Fraction(i - QUANT_OFFSET, QUANT_LEVELS) for i in range(QUANT_LEVELS))


def _interval_probs(dist, edges: np.ndarray, centre: float) -> np.ndarray:
    lo, hi = edges[:-1], edges[1:]
    # differences taken on the side of the centre where they do not cancel
    left = dist.cdf(hi) - dist.cdf(lo)
    right = dist.sf(lo) - dist.sf(hi)
    return np.where(lo >= centre, right, left)


def _quantized(dist, mu: float) -> FinitePMF:
    edges = (np.arange(QUANT_LEVELS + 1) - QUANT_OFFSET) / QUANT_LEVELS
    raw = _interval_probs(dist, edges, mu)
    z = _interval_probs(dist, np.array([-0.5, 0.5]), mu)[0]
    if not z > 0:
        raise ValueError("distribution puts no mass on (-0.5, 0.5]")
    return FinitePMF(quantization_grid(), tuple(float(v) for v in raw / z))


def quantized_gaussian(mu: float, sigma: float) -> FinitePMF:
    """8-bit quantisation of N(mu, sigma^2) on ``(i - 128) / 256``.

    Grid point ``i`` carries the Gaussian mass of
    ``((i - 128) / 256, (i - 127) / 256]``; tails outside ``(-0.5, 0.5]``
    are dropped and the remainder renormalised.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _quantized(stats.norm(loc=mu, scale=sigma), mu)


def quantized_laplacian(mu: float, sigma: float) -> FinitePMF:
    """8-bit quantised Laplacian with mean ``mu`` and standard deviation ``sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _quantized(stats.laplace(loc=mu, scale=sigma / math.sqrt(2)), mu)


SGD_SETTINGS = {
    "pi1": (("gaussian", 0.0, 0.12), ("gaussian", 0.2, 0.12)),
    "pi2": (("gaussian", 0.0, 0.1), ("gaussian", 0.2, 0.1)),
    "setting1": (("gaussian", 0.0, 0.15), ("gaussian", 0.2, 0.15)),
    "setting2": (("gaussian", 0.0, 0.1), ("gaussian", 0.2, 0.1)),
    "setting3": (("gaussian", 0.0, 0.12), ("laplacian", 0.0, 0.12)),
    "setting4": (("laplacian", 0.0, 0.12), ("laplacian", 0.2, 0.12)),
}


def sgd_distribution_set(name: str = "pi1") -> DistributionSet:
    """Quantised-gradient distribution sets used by the SGD experiments."""
    try:
        setting = SGD_SETTINGS[name]
    except KeyError:
        raise ValueError(f"unknown SGD setting {name!r}; choose from {sorted(SGD_SETTINGS)}") from None
    build = {"gaussian": quantized_gaussian, "laplacian": quantized_laplacian}
    return DistributionSet([build[kind](mu, sigma) for kind, mu, sigma in setting])


# ---------------------------------------------------------------------------
# positivity and hull reduction


def strict_positivity(pi: DistributionSet) -> StrictPositivityCertificate:
    c = min(min(pmf.mass) for pmf in pi.members)
    return StrictPositivityCertificate(c=c, holds=c > 0)


def _feasible_exact(A: list, b: list) -> bool:
    """Phase-one simplex over the rationals: is ``A x = b, x >= 0`` solvable?

    Bland's rule keeps the pivoting finite on degenerate problems.
    """
    rows, cols = len(A), len(A[0])
    tab = []
    for i in range(rows):
        sign = -1 if b[i] < 0 else 1
        art = [Fraction(0)] * rows
        art[i] = Fraction(1)
        tab.append([sign * Fraction(v) for v in A[i]] + art + [sign * Fraction(b[i])])
    basis = [cols + i for i in range(rows)]
    width = cols + rows
    cost = [-sum(tab[i][j] for i in range(rows)) for j in range(cols)] + [Fraction(0)] * rows
    cost.append(-sum(tab[i][-1] for i in range(rows)))
    while True:
        entering = next((j for j in range(width) if cost[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(rows):
            if tab[i][entering] > 0:
                ratio = tab[i][-1] / tab[i][entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # cannot happen: phase one is bounded below
            break
        r = best[1]
        piv = tab[r][entering]
        tab[r] = [v / piv for v in tab[r]]
        for i in range(rows):
            if i != r and tab[i][entering] != 0:
                f = tab[i][entering]
                tab[i] = [v - f * w for v, w in zip(tab[i], tab[r])]
        f = cost[entering]
        cost = [v - f * w for v, w in zip(cost, tab[r])]
        basis[r] = entering
    return cost[-1] == 0


def _feasible_float(A: np.ndarray, b: np.ndarray) -> bool:
    res = optimize.linprog(
        np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs"
    )
    return res.status == 0


def in_convex_hull(point, others, mode: str | None = None) -> bool:
    """Whether ``point`` is a convex combination of the rows of ``others``."""
    mode = resolve_mode(mode)
    if len(others) == 0:
        return False
    if mode == RATIONAL:
        cols = [[to_fraction(v) for v in q] for q in others]
        A = [[col[r] for col in cols] for r in range(len(point))]
        A.append([Fraction(1)] * len(cols))
        b = [to_fraction(v) for v in point] + [Fraction(1)]
        return _feasible_exact(A, b)
    others = np.asarray(others, dtype=float)
    A = np.vstack([others.T, np.ones(len(others))])
    b = np.append(np.asarray(point, dtype=float), 1.0)
    return _feasible_float(A, b)


def vertex_indices(pi: DistributionSet, mode: str | None = None) -> list[int]:
    """Indices of the members that are vertices of the set's convex hull.

    Duplicates keep their first occurrence.
    """
    mode = resolve_mode(mode)
    if mode == RATIONAL:
        points = [tuple(pmf.to_mode(RATIONAL).mass) for pmf in pi.members]
    else:
        points = [tuple(float(p) for p in pmf.mass) for pmf in pi.members]
    unique: list[int] = []
    for i, pt in enumerate(points):
        if mode == RATIONAL:
            dup = any(points[j] == pt for j in unique)
        else:
            dup = any(np.allclose(points[j], pt, rtol=0, atol=1e-15) for j in unique)
        if not dup:
            unique.append(i)
    if len(unique) == 1:
        return unique
    keep = []
    for i in unique:
        rest = [points[j] for j in unique if j != i]
        if not in_convex_hull(points[i], rest, mode):
            keep.append(i)
    return keep


def reduce_to_vertices(pi: DistributionSet, mode: str | None = None) -> DistributionSet:
    return pi.subset(vertex_indices(pi, mode))
