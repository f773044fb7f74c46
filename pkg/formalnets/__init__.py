"""Exact formal Transformer and Neural GPU workbench."""

from .cli import main  # noqa: F401
