"""Exception hierarchy shared across the workbench."""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for every error raised by formalnets."""


class ShapeError(WorkbenchError, ValueError):
    """Vector, matrix or tensor dimensions do not line up."""


class SpecError(WorkbenchError, ValueError):
    """A machine, network or predicate document is malformed."""


class NormalizationError(SpecError):
    """A Turing machine breaks one of the normal-form assumptions."""


class UnknownSymbolError(SpecError):
    """An input word uses a symbol outside the alphabet."""

    def __init__(self, symbol: str, alphabet: tuple[str, ...] | list[str]) -> None:
        super().__init__(f"symbol {symbol!r} is not in the alphabet {list(alphabet)}")
        self.symbol = symbol


class GatingError(WorkbenchError, ArithmeticError):
    """A Neural GPU gate left the unit interval."""


class AuditError(WorkbenchError, AssertionError):
    """A sigma stage saw a value its construction does not allow."""
