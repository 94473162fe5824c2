"""Exact rational arithmetic helpers.

All structural computations in this package run on exact rationals so that
volume cuts, laminar-family checks and vertex integrality can be asserted
with zero tolerance.  gmpy2's mpq is used when available (much faster);
fractions.Fraction is a drop-in fallback.
"""

from __future__ import annotations

from typing import Union

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as Q

Rational = Union[int, float, str, "Q"]

ZERO = Q(0)
ONE = Q(1)

#: tolerance used by float-mode comparisons throughout the repo
FLOAT_TOL = 1e-9


def to_q(value) -> "Q":
    """Convert ints, floats, 'p/q' strings and rationals to an exact Q.

    Floats are converted exactly (their binary expansion), so conversion is
    deterministic; JSON documents may spell numbers as "p/q" strings.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, str)):
        return Q(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite number: {value}")
        return Q(value)
    return Q(value)


def q_to_json(value) -> Union[int, str]:
    """Render a rational for a JSON document: int when integral, else 'p/q'."""
    q = to_q(value)
    if q.denominator == 1:
        return int(q)
    return f"{q.numerator}/{q.denominator}"


def q_str(value) -> str:
    q = to_q(value)
    return str(q)


def as_float(value) -> float:
    return float(to_q(value))
