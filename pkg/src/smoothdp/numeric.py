"""Arithmetic modes and small numerical helpers shared by every module.

Two numeric modes are supported:

``"float"``
    Double precision, with probabilities carried as natural logarithms
    wherever they can underflow.
``"rational"``
    Exact :class:`fractions.Fraction` arithmetic, for small oracle-grade
    instances.

The default mode is ``"float"``; the environment variable
``SDP_NUMERIC_MODE`` overrides it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Union

import numpy as np
from scipy.special import gammaln

FLOAT = "float"
RATIONAL = "rational"
NUMERIC_MODES = (FLOAT, RATIONAL)

Number = Union[float, Fraction]


def default_numeric_mode() -> str:
    mode = os.environ.get("SDP_NUMERIC_MODE", FLOAT).strip().lower()
    if mode not in NUMERIC_MODES:
        raise ValueError(f"SDP_NUMERIC_MODE must be one of {NUMERIC_MODES}, got {mode!r}")
    return mode


def resolve_mode(mode: str | None) -> str:
    if mode is None:
        return default_numeric_mode()
    if mode not in NUMERIC_MODES:
        raise ValueError(f"numeric mode must be one of {NUMERIC_MODES}, got {mode!r}")
    return mode


def to_fraction(x) -> Fraction:
    """Exact rational for ``x``.

    Floats go through their shortest decimal repr, so ``0.3`` becomes
    ``3/10`` rather than the binary expansion of the double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot convert {x!r} to a rational")
    return Fraction(repr(x))


def convert(x, mode: str) -> Number:
    return to_fraction(x) if mode == RATIONAL else float(x)


@dataclass(frozen=True)
class Epsilon:
    """Privacy-loss level ``value`` >= 0.

    ``factor`` optionally pins ``exp(value)`` to an exact rational; it is
    what rational-mode computations multiply by.  When it is absent the
    exact binary value of ``math.exp(value)`` is used instead, which keeps
    both sides of an exact comparison on the same multiplier.
    """

    value: float
    factor: Fraction | None = None

    def __post_init__(self):
        if not (self.value >= 0) or math.isnan(self.value):
            raise ValueError(f"epsilon must be >= 0, got {self.value!r}")
        if self.factor is not None and self.factor < 1:
            raise ValueError("exp(epsilon) factor must be >= 1")

    @classmethod
    def of(cls, eps) -> "Epsilon":
        if isinstance(eps, Epsilon):
            return eps
        if isinstance(eps, (Fraction, Rational)) and not isinstance(eps, int):
            eps = float(eps)
        value = float(eps)
        if value == 0:
            return cls(0.0, Fraction(1))
        return cls(value)

    @classmethod
    def log_of(cls, factor) -> "Epsilon":
        """The epsilon whose exponential is exactly ``factor``."""
        factor = to_fraction(factor)
        return cls(math.log(factor), factor)

    def exp(self, mode: str = FLOAT) -> Number:
        if mode == RATIONAL:
            if self.factor is not None:
                return self.factor
            e = math.exp(self.value)
            if math.isinf(e):
                raise OverflowError(f"exp({self.value}) does not fit a rational multiplier")
            return Fraction(e)
        if self.factor is not None:
            return float(self.factor)
        return math.exp(self.value)

    @property
    def log_factor(self) -> float:
        """``log(exp(eps))`` as used by the float-mode log-domain kernels."""
        if self.factor is not None:
            return math.log(self.factor)
        return self.value

    def __float__(self) -> float:
        return self.value


def add_eps(a: Epsilon, b: Epsilon) -> Epsilon:
    factor = a.factor * b.factor if a.factor is not None and b.factor is not None else None
    return Epsilon(a.value + b.value, factor)


# ---------------------------------------------------------------------------
# binomial coefficients


def log_comb(n, k):
    """Vectorised ``log C(n, k)``; ``-inf`` outside ``0 <= k <= n``."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n) & (n >= 0)
    with np.errstate(invalid="ignore"):
        out = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.where(valid, out, -np.inf)


@lru_cache(maxsize=65536)
def comb(n: int, k: int) -> int:
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def binom_pmf_exact(k: int, n: int, p: Fraction) -> Fraction:
    if k < 0 or k > n:
        return Fraction(0)
    return comb(n, k) * p**k * (1 - p) ** (n - k)


# ---------------------------------------------------------------------------
# summation


def logsumexp(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return -math.inf
    top = values.max()
    if top == -math.inf:
        return -math.inf
    return float(top + math.log(math.fsum(np.exp(values - top))))


def exact_sum(values: Iterable[Number], mode: str) -> Number:
    if mode == RATIONAL:
        return sum(values, Fraction(0))
    return math.fsum(values)


def safe_exp(log_value: float) -> float:
    return 0.0 if log_value == -math.inf else math.exp(log_value)


def safe_log(value: float) -> float:
    return -math.inf if value <= 0 else math.log(value)
