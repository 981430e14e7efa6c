"""Election vote counts and experiment configurations.

Election data is a CSV with header ``year,unit,candidate,votes``, one row
per candidate and unit.  Only the two leading candidates of each unit are
used: their vote shares form a two-type distribution over voters.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dist import DistributionSet, FinitePMF, SGD_SETTINGS
from .mechanisms import MechanismDescriptor
from .numeric import RATIONAL, Epsilon, resolve_mode

CSV_HEADER = ("year", "unit", "candidate", "votes")


@dataclass(frozen=True)
class ElectionRecord:
    year: int
    unit: str
    candidate_votes: Mapping[str, int]

    def __post_init__(self):
        votes = {str(k): int(v) for k, v in dict(self.candidate_votes).items()}
        if any(v < 0 for v in votes.values()):
            raise ValueError(f"{self.unit} {self.year}: vote counts must be non-negative")
        if sum(1 for v in votes.values() if v > 0) < 2:
            raise ValueError(f"{self.unit} {self.year}: need at least two candidates with votes")
        object.__setattr__(self, "candidate_votes", dict(sorted(votes.items())))

    def __hash__(self):
        return hash((self.year, self.unit, tuple(self.candidate_votes.items())))

    def top2(self) -> tuple[tuple[str, int], tuple[str, int]]:
        """The two leading candidates; equal counts are ordered by name."""
        ranked = sorted(self.candidate_votes.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[0], ranked[1]

    @property
    def top2_total(self) -> int:
        (_, a), (_, b) = self.top2()
        return a + b


def _parse_rows(rows: Iterable[Sequence[str]], source: str) -> list[ElectionRecord]:
    rows = iter(rows)
    try:
        header = next(rows)
    except StopIteration:
        raise ValueError(f"{source}: empty file") from None
    if tuple(h.strip().lower() for h in header) != CSV_HEADER:
        raise ValueError(f"{source}: header must be {','.join(CSV_HEADER)}, got {','.join(header)}")
    groups: dict = {}
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ValueError(f"{source}, line {line}: expected 4 fields, got {len(row)}")
        year, unit, cand, votes = (c.strip() for c in row)
        try:
            year_i = int(year)
        except ValueError:
            raise ValueError(f"{source}, line {line}: year {year!r} is not an integer") from None
        if not votes.isdigit():
            raise ValueError(f"{source}, line {line}: votes {votes!r} is not a non-negative integer")
        key = (year_i, unit)
        bucket = groups.setdefault(key, {})
        if cand in bucket:
            raise ValueError(f"{source}, line {line}: duplicate row for {unit} {year_i} {cand}")
        bucket[cand] = int(votes)
    return [ElectionRecord(y, u, v) for (y, u), v in groups.items()]


def parse_election_csv(text: str, source: str = "<string>") -> list[ElectionRecord]:
    return _parse_rows(csv.reader(io.StringIO(text)), source)


def load_election_csv(path) -> list[ElectionRecord]:
    path = Path(path)
    with path.open(newline="") as fh:
        return _parse_rows(csv.reader(fh), str(path))


def election_csv_text(records: Sequence[ElectionRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        for cand, votes in rec.candidate_votes.items():
            writer.writerow((rec.year, rec.unit, cand, votes))
    return buf.getvalue()


def write_election_csv(records: Sequence[ElectionRecord], path) -> None:
    Path(path).write_text(election_csv_text(records))


def bundled_dc_2020() -> ElectionRecord:
    """Certified 2020 presidential totals for Washington, D.C. (top two candidates)."""
    text = resources.files("smoothdp").joinpath("data/dc_2020_top2.csv").read_text()
    return parse_election_csv(text, "dc_2020_top2.csv")[0]


def to_top2_distribution(rec: ElectionRecord, mode: str | None = None) -> FinitePMF:
    """Vote shares of the two leading candidates, renormalised; leader first."""
    mode = resolve_mode(mode)
    (c1, v1), (c2, v2) = rec.top2()
    total = v1 + v2
    if mode == RATIONAL:
        return FinitePMF((c1, c2), (Fraction(v1, total), Fraction(v2, total)))
    return FinitePMF((c1, c2), (v1 / total, v2 / total))


def election_distribution_set(records: Sequence[ElectionRecord], mode: str | None = None) -> DistributionSet:
    """One top-two distribution per unit, with the candidate labels sorted by name."""
    if not records:
        raise ValueError("no election records")
    pmfs = [to_top2_distribution(r, mode) for r in records]
    labels = tuple(sorted(pmfs[0].support))
    for rec, pmf in zip(records, pmfs):
        if tuple(sorted(pmf.support)) != labels:
            raise ValueError(f"{rec.unit} {rec.year}: top-two candidates differ from {labels}")
    return DistributionSet([pmf.reorder(labels) for pmf in pmfs])


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def lost_votes_T(n: int, loss_ratio: float) -> int:
    """Sample size left after losing a fraction of the ballots, clamped to ``[1, n - 1]``."""
    if not 0 < loss_ratio <= 1:
        raise ValueError("loss_ratio must lie in (0, 1]")
    if n < 2:
        raise ValueError("need at least two voters")
    T = round_half_up((1 - loss_ratio) * n)
    if T < 1:
        raise ValueError(f"loss_ratio={loss_ratio} leaves no ballots (T must be at least 1)")
    return min(T, n - 1)


def sqrt_batch_T(n: int) -> int:
    return max(1, min(n, round_half_up(math.sqrt(n))))


def lost_votes_query(rec, loss_ratio: float, eps, pi: DistributionSet | None = None, **query_kw):
    """Sampling-histogram query for an election that lost a fraction of its ballots.

    ``rec`` is an :class:`ElectionRecord` (``n`` is its top-two total) or a
    plain voter count.  Without ``pi`` the record's own top-two
    distribution is used.
    """
    from .smoothed import PrivacyQuery

    if isinstance(rec, ElectionRecord):
        n = rec.top2_total
        if pi is None:
            pi = DistributionSet([to_top2_distribution(rec, query_kw.get("numeric"))])
    else:
        n = int(rec)
        if pi is None:
            raise ValueError("a distribution set is needed when only n is given")
    T = lost_votes_T(n, loss_ratio)
    return PrivacyQuery(MechanismDescriptor.shm(T), Epsilon.of(eps), n, pi, **query_kw)


# ---------------------------------------------------------------------------
# experiment configuration

SCENARIOS = ("election", "sgd")
QUERY_CHOICES = ("auto", "exact", "monte_carlo")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    eps: tuple
    n_grid: tuple
    loss_ratio: float | None = None
    batch_rule: str = "sqrt"
    mode: str = "auto"
    trials: int = 10_000
    seed: int = 0
    confidence: float = 0.99
    numeric: str = "float"
    pi: str | None = None
    election_csv: str | None = None
    sgd_setting: str = "pi1"
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if not self.eps or any(e < 0 for e in self.eps):
            raise ValueError("eps list must be non-empty and non-negative")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly increasing")
        if self.n_grid[0] < 2:
            raise ValueError("n values must be at least 2")
        if self.scenario == "election":
            if self.loss_ratio is None or not 0 < self.loss_ratio <= 1:
                raise ValueError("election sweeps need loss_ratio in (0, 1]")
        elif self.batch_rule != "sqrt":
            try:
                ratio = float(self.batch_rule)
            except ValueError:
                raise ValueError("batch_rule must be 'sqrt' or a ratio in (0, 1]") from None
            if not 0 < ratio <= 1:
                raise ValueError("batch_rule ratio must lie in (0, 1]")
        if self.mode not in QUERY_CHOICES:
            raise ValueError(f"mode must be one of {QUERY_CHOICES}")
        if self.trials < 1 or not 0 < self.confidence < 1:
            raise ValueError("need trials >= 1 and confidence in (0, 1)")
        if self.scenario == "sgd" and self.sgd_setting not in SGD_SETTINGS and self.pi is None:
            raise ValueError(f"unknown SGD setting {self.sgd_setting!r}")
        resolve_mode(self.numeric)

    def T_for(self, n: int) -> int:
        if self.scenario == "election":
            return lost_votes_T(n, self.loss_ratio)
        if self.batch_rule == "sqrt":
            return sqrt_batch_T(n)
        return max(1, min(n, round_half_up(float(self.batch_rule) * n)))

    @classmethod
    def from_json(cls, data: Mapping) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "extra"}
        out["eps"] = list(self.eps)
        out["n_grid"] = list(self.n_grid)
        return out
