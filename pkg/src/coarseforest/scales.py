"""Rational scale parameters and boundary-tolerant threshold comparisons.

Scale parameters (the Rips parameter r, its powers r^k, ball radii) are kept
as exact fractions. Distances are float64, so a comparison like
``d <= r**k`` is evaluated against a threshold widened by a relative slack of
1e-9; this keeps edge predicates deterministic when an input distance equals
a scale boundary up to float rounding (e.g. d = 1/36 against (1/6)^2).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Scalar = Union[int, float, Fraction]

REL_SLACK = Fraction(1, 10**9)


def parse_scale(value: Scalar | str) -> Fraction:
    """Parse a scale given as a number, a decimal string or a 'p/q' literal."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        return Fraction(text)
    return Fraction(value)


def upper_threshold(bound: Scalar) -> float:
    """Float threshold for 'd <= bound' with relative slack."""
    b = Fraction(bound)
    return float(b + abs(b) * REL_SLACK)


def lower_threshold(bound: Scalar) -> float:
    """Float threshold for 'd >= bound' with relative slack."""
    b = Fraction(bound)
    return float(b - abs(b) * REL_SLACK)


def at_most(d: float, bound: Scalar) -> bool:
    return d <= upper_threshold(bound)


def at_least(d: float, bound: Scalar) -> bool:
    return d >= lower_threshold(bound)


def exponent_window(r: Fraction, lo: Scalar, hi: Scalar) -> tuple[int, int]:
    """Levels k with lo <= r**k <= hi (up to slack), as an inclusive range.

    Requires 0 < r < 1 and 0 < lo <= hi.
    """
    if not 0 < r < 1:
        raise ValueError("scale parameter r must lie in (0, 1)")
    lo_f, hi_f = Fraction(lo), Fraction(hi)
    if not 0 < lo_f <= hi_f:
        raise ValueError("window bounds must satisfy 0 < lo <= hi")
    log_r = math.log(float(r))
    guess_lo = math.floor(math.log(float(hi_f)) / log_r) - 2
    guess_hi = math.ceil(math.log(float(lo_f)) / log_r) + 2
    lo_slack = lo_f * (1 - REL_SLACK)
    hi_slack = hi_f * (1 + REL_SLACK)
    ks = [k for k in range(guess_lo, guess_hi + 1) if lo_slack <= r**k <= hi_slack]
    if not ks:
        raise ValueError("no integer scale exponent falls inside the window")
    return min(ks), max(ks)
