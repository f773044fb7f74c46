"""Helpers for the "p/q" text form of exact rationals."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Any, Iterable, List


def parse_rational(value: Any) -> Fraction:
    """Convert a "p/q" string, an integer or a Fraction into a canonical Fraction."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        text = value.strip()
        if not text or any(ch in text for ch in ".eE"):
            raise ValueError(f"not a rational literal: {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    raise TypeError(f"cannot read {type(value).__name__} {value!r} as an exact rational")


def format_rational(value: Any) -> str:
    """Canonical text form; integers drop the "/1"."""
    number = parse_rational(value)
    if number.denominator == 1:
        return str(number.numerator)
    return f"{number.numerator}/{number.denominator}"


def format_row(values: Iterable[Any]) -> List[str]:
    return [format_rational(value) for value in values]
