"""Scalar handling for the two arithmetic modes.

``exact`` mode works with :class:`fractions.Fraction` throughout; ``float`` mode
with Python floats.  Inputs may be ints, floats, Fractions or strings such as
``"3/2"``.
"""

from __future__ import annotations

import os
from fractions import Fraction
from typing import Union

from .errors import ConfigurationError

Scalar = Union[Fraction, float]

EXACT = "exact_rational"
FLOAT = "float64"
SCALAR_MODES = (EXACT, FLOAT)
_ALIASES = {"exact": EXACT, "exact_rational": EXACT, "rational": EXACT,
            "float": FLOAT, "float64": FLOAT}


def normalize_mode(mode: str | None) -> str:
    if mode is None:
        mode = os.environ.get("FLOWBERG_MODE", "exact")
    try:
        return _ALIASES[mode]
    except KeyError:
        raise ConfigurationError(f"unknown scalar mode {mode!r}") from None


def parse_scalar(v, mode: str) -> Scalar:
    """Convert ``v`` to the scalar type of ``mode``."""
    if isinstance(v, str):
        try:
            v = Fraction(v)
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse scalar {v!r}") from exc
    if mode == EXACT:
        if isinstance(v, float):
            # floats given in exact mode are taken at their decimal face value
            return Fraction(repr(v))
        return Fraction(v)
    return float(v)


def to_json_scalar(v: Scalar):
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def as_float(v) -> float:
    return float(v)


def power(base: Scalar, n: int) -> Scalar:
    """``base ** n`` for integer ``n`` that stays exact for Fractions."""
    if isinstance(base, Fraction) or (isinstance(base, int) and not isinstance(base, bool)):
        return Fraction(base) ** n
    return float(base) ** n
