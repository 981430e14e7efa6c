"""Privacy reports and the algebra of guarantees built from them.

A :class:`PrivacyReport` records one ``(eps, delta)`` guarantee together
with how it was obtained.  Reports compose additively, survive arbitrary
post-processing unchanged, and transfer from a pushed-forward distribution
set to the original one under per-record deterministic pre-processing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .dist import DistributionSet, FinitePMF

EXACT = "exact"
ESTIMATE = "estimate"
ANALYTIC_BOUND = "analytic_bound"
REPORT_KINDS = (EXACT, ESTIMATE, ANALYTIC_BOUND)


@dataclass(frozen=True)
class PrivacyReport:
    delta: float
    kind: str
    eps: float
    n: int | None = None
    T: int | None = None
    ci: tuple | None = None
    hoeffding_ci: tuple | None = None
    seed: int | None = None
    log_delta: float | None = None
    exact_value: str | None = None
    pi_fingerprint: str | None = None
    provenance: dict = field(default_factory=dict)
    history: tuple = ()

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise ValueError(f"report kind must be one of {REPORT_KINDS}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.kind == ESTIMATE:
            if self.ci is None:
                raise ValueError("estimates need a confidence interval")
            lo, hi = self.ci
            if not 0 <= lo <= self.delta <= hi <= 1:
                raise ValueError(f"inconsistent interval {self.ci} around {self.delta}")
        if self.log_delta is None:
            object.__setattr__(self, "log_delta", math.log(self.delta) if self.delta > 0 else -math.inf)

    def to_json(self) -> dict:
        data = {
            "eps": self.eps,
            "delta": self.delta,
            "kind": self.kind,
            "ci": list(self.ci) if self.ci is not None else None,
            "n": self.n,
            "T": self.T,
            "seed": self.seed,
            "provenance": self.provenance,
            "hoeffding_ci": list(self.hoeffding_ci) if self.hoeffding_ci is not None else None,
            "log_delta": self.log_delta if math.isfinite(self.log_delta) else None,
            "exact_value": self.exact_value,
            "pi_fingerprint": self.pi_fingerprint,
            "history": [part.to_json() for part in self.history],
        }
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "PrivacyReport":
        log_delta = data.get("log_delta")
        return cls(
            delta=data["delta"],
            kind=data["kind"],
            eps=data["eps"],
            n=data.get("n"),
            T=data.get("T"),
            ci=tuple(data["ci"]) if data.get("ci") is not None else None,
            hoeffding_ci=tuple(data["hoeffding_ci"]) if data.get("hoeffding_ci") is not None else None,
            seed=data.get("seed"),
            log_delta=-math.inf if log_delta is None else log_delta,
            exact_value=data.get("exact_value"),
            pi_fingerprint=data.get("pi_fingerprint"),
            provenance=dict(data.get("provenance") or {}),
            history=tuple(cls.from_json(p) for p in data.get("history") or ()),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "PrivacyReport":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ComposedReport:
    eps_total: float
    delta_total: float
    parts: tuple
    ci_total: tuple | None = None

    def to_report(self) -> PrivacyReport:
        if len(self.parts) == 1:
            return self.parts[0]
        has_estimate = any(p.kind == ESTIMATE for p in self.parts)
        kind = ESTIMATE if has_estimate else ANALYTIC_BOUND
        return PrivacyReport(
            delta=self.delta_total,
            kind=kind,
            eps=self.eps_total,
            ci=self.ci_total if has_estimate else None,
            pi_fingerprint=self.parts[0].pi_fingerprint,
            provenance={"path": "additive composition", "parts": len(self.parts)},
            history=self.parts,
        )


def _interval(r: PrivacyReport) -> tuple:
    return r.ci if r.ci is not None else (r.delta, r.delta)


def compose(parts: Sequence[PrivacyReport]) -> ComposedReport:
    """Additive composition of guarantees proved under one distribution set."""
    parts = tuple(parts)
    if not parts:
        raise ValueError("nothing to compose")
    prints = {p.pi_fingerprint for p in parts}
    if len(prints) > 1:
        raise ValueError("cannot compose guarantees proved under different distribution sets")
    eps_total = math.fsum(p.eps for p in parts)
    delta_total = min(1.0, math.fsum(p.delta for p in parts))
    ci_total = None
    if any(p.kind == ESTIMATE for p in parts):
        ci_total = (
            min(1.0, math.fsum(_interval(p)[0] for p in parts)),
            min(1.0, math.fsum(_interval(p)[1] for p in parts)),
        )
    return ComposedReport(eps_total, delta_total, parts, ci_total)


def post_process(r: PrivacyReport, f_description: str) -> PrivacyReport:
    """The same guarantee for ``f(M(x))``; only the provenance changes."""
    prov = dict(r.provenance)
    prov["post_processing"] = list(prov.get("post_processing", [])) + [f_description]
    return replace(r, provenance=prov)


# ---------------------------------------------------------------------------
# pre-processing


def _as_function(f) -> Callable:
    if isinstance(f, Mapping):
        def lookup(label):
            try:
                return f[label]
            except KeyError:
                raise ValueError(f"map is not defined on support label {label!r}") from None

        return lookup
    return f


def pushforward_pmf(pmf: FinitePMF, f, labels: Sequence | None = None) -> FinitePMF:
    """Law of ``f(X)`` for ``X ~ pmf``; masses of merged labels add up.

    The image support is ordered by first appearance unless ``labels``
    fixes it.
    """
    g = _as_function(f)
    acc: dict = {}
    for label, p in zip(pmf.support, pmf.mass):
        image = g(label)
        acc[image] = acc.get(image, 0) + p
    if labels is None:
        labels = list(acc)
    elif not set(acc) <= set(labels):
        raise ValueError("target labels do not cover the image of the map")
    return FinitePMF(tuple(labels), tuple(acc.get(lab, 0 * pmf.mass[0]) for lab in labels))


def pushforward(pi: DistributionSet, f, labels: Sequence | None = None) -> DistributionSet:
    if labels is None:
        g = _as_function(f)
        seen: dict = {}
        for label in pi.support:
            seen.setdefault(g(label), None)
        labels = list(seen)
    return DistributionSet([pushforward_pmf(pmf, f, labels) for pmf in pi.members])


def pre_process(r: PrivacyReport, f, pi: DistributionSet, description: str = "per-record map") -> PrivacyReport:
    """Transfer a guarantee for ``M`` over ``f(pi)`` to ``M o f`` over ``pi``."""
    image = pushforward(pi, f)
    if r.pi_fingerprint is not None and r.pi_fingerprint != image.fingerprint():
        raise ValueError("the report was not computed for the pushforward of this distribution set")
    prov = dict(r.provenance)
    prov["pre_processing"] = list(prov.get("pre_processing", [])) + [description]
    return replace(r, provenance=prov, pi_fingerprint=pi.fingerprint())
