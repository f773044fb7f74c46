"""Utility helpers for the formalnets package."""

from .rationals import format_rational, format_row, parse_rational  # noqa: F401
