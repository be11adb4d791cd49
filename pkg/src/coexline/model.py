"""Boundary rates, parameter maps, height functions and the shock location.

Occupation vectors are plain integer sequences with entries in {0, 1}; site 1
is the first entry.  Comparisons against the line of slope 1/2 are done on the
doubled integers ``2*s_j - j`` so that ties are detected exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoundaryRates:
    """Jump rates of the open ASEP on sites 1..n.

    Particles enter at site 1 with rate ``alpha`` and leave from site n with
    rate ``beta``.  ``gamma``, ``delta`` (reverse boundary moves) and ``q``
    (left bulk jumps) only enter the parameter map; every sampler in this
    package requires them to be zero.
    """

    alpha: float
    beta: float
    gamma: float = 0.0
    delta: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if min(self.gamma, self.delta, self.q) < 0:
            raise ValueError("gamma, delta and q must be non-negative")

    @property
    def is_tasep(self) -> bool:
        return self.gamma == 0 and self.delta == 0 and self.q == 0


@dataclass(frozen=True)
class RepParams:
    """Boundary parameters ``a = (1 - alpha)/alpha`` and ``b = (1 - beta)/beta``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"a and b must be positive, got {self.a}, {self.b}")

    @property
    def on_coexistence_line(self) -> bool:
        return self.a == self.b and self.a > 1

    def rates(self) -> BoundaryRates:
        return BoundaryRates(alpha=1.0 / (1.0 + self.a), beta=1.0 / (1.0 + self.b))


def kappa_pm(x: float, y: float, q: float = 0.0, sign: int = +1) -> float:
    """Evaluate kappa_+(x, y) (``sign=+1``) or kappa_-(x, y) (``sign=-1``).

    kappa_pm(x, y) = (1 - q - x + y +/- sqrt((1 - q - x + y)**2 + 4*x*y)) / (2*x)

    The root whose formula would cancel is taken from the product of the
    roots, -y/x, instead.
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if y < 0:
        raise ValueError(f"y must be non-negative, got {y}")
    if not 0 <= q < 1:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    c = 1.0 - q - x + y
    root = math.sqrt(c * c + 4.0 * x * y)
    if sign * c >= 0:
        return (c + sign * root) / (2.0 * x)
    return sign * 2.0 * y / (root - sign * c)


def rep_from_rates(rates: BoundaryRates) -> RepParams:
    """Map TASEP boundary rates in (0, 1) to the (a, b) parameterisation."""
    if not rates.is_tasep:
        raise ValueError("only gamma = delta = q = 0 is supported")
    if not (0 < rates.alpha < 1 and 0 < rates.beta < 1):
        raise ValueError("alpha and beta must lie in (0, 1)")
    return RepParams(a=(1.0 - rates.alpha) / rates.alpha, b=(1.0 - rates.beta) / rates.beta)


def as_occupations(tau: Sequence[int]) -> np.ndarray:
    """Validate an occupation vector and return it as an int8 array."""
    arr = np.asarray(tau)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("occupation vector must be one-dimensional and non-empty")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("occupations must be 0 or 1")
    return arr.astype(np.int8)


def heights(tau: Sequence[int]) -> np.ndarray:
    """Partial sums (s_0 = 0, s_1, ..., s_n) of an occupation vector."""
    arr = as_occupations(tau)
    out = np.zeros(arr.size + 1, dtype=np.int64)
    np.cumsum(arr, out=out[1:])
    return out


def height(tau: Sequence[int], j: int) -> int:
    """Number of particles on sites 1..j."""
    arr = as_occupations(tau)
    if not 0 <= j <= arr.size:
        raise IndexError(f"j={j} outside 0..{arr.size}")
    return int(arr[:j].sum())


def first_argmin(values: np.ndarray, axis: int = -1) -> np.ndarray:
    # np.argmin returns the first occurrence, which is the tie-break we want
    return np.argmin(values, axis=axis)


def tau_star(tau: Sequence[int]) -> int:
    """Smallest j in 0..n minimising s_j - j/2."""
    s = heights(tau)
    doubled = 2 * s - np.arange(s.size)
    return int(first_argmin(doubled))
