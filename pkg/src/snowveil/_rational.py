"""Exact handling of user-supplied fractions (alpha, beta, lambda, Q, split)."""

from __future__ import annotations

import math
from fractions import Fraction

# Float parameters are read as the shortest decimal-ish rational within this
# denominator, so 0.3 means 3/10 rather than its binary approximation.
MAX_DENOMINATOR = 10**6


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        if x.denominator > 10**9:
            return x.limit_denominator(10**9)
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x).limit_denominator(MAX_DENOMINATOR)


def ceil_times(x, n: int) -> int:
    """``ceil(x * n)`` computed exactly."""
    f = as_fraction(x) * n
    return math.ceil(f)


def floor_times(x, n: int) -> int:
    f = as_fraction(x) * n
    return math.floor(f)
