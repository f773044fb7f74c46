"""Exact rational vectors, matrices, affine maps and feed-forward networks.

Vectors are 1-D and matrices 2-D numpy arrays of dtype ``object`` whose
entries are :class:`fractions.Fraction`.  Every operation keeps the entries
exact; the row-vector convention ``x @ M + b`` is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from formalnets.exceptions import ShapeError
from formalnets.utils.rationals import parse_rational

Rat = Fraction
ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)


class Activation(str, Enum):
    """Activation tags allowed in a feed-forward stage."""

    IDENTITY = "identity"
    SIGMA = "sigma"
    RELU = "relu"


def rat(value: Any) -> Fraction:
    """Exact rational from an int, Fraction or "p/q" string."""
    return parse_rational(value)


_to_rat = np.frompyfunc(rat, 1, 1)


def vector(values: Iterable[Any]) -> np.ndarray:
    entries = [rat(value) for value in values]
    if not entries:
        raise ShapeError("vectors need at least one entry")
    out = np.empty(len(entries), dtype=object)
    out[:] = entries
    return out


def zeros(n: int) -> np.ndarray:
    return np.full(n, ZERO, dtype=object)


def unit(n: int, index: int, value: Any = ONE) -> np.ndarray:
    out = zeros(n)
    out[index] = rat(value)
    return out


def matrix(rows: Sequence[Sequence[Any]]) -> np.ndarray:
    if not rows:
        raise ShapeError("matrices need at least one row")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ShapeError("ragged matrix rows")
    out = np.empty((len(rows), width), dtype=object)
    for i, row in enumerate(rows):
        out[i, :] = [rat(value) for value in row]
    return out


def zero_matrix(rows: int, cols: int) -> np.ndarray:
    return np.full((rows, cols), ZERO, dtype=object)


def identity_matrix(n: int) -> np.ndarray:
    out = zero_matrix(n, n)
    for i in range(n):
        out[i, i] = ONE
    return out


def as_rational_array(values: Any) -> np.ndarray:
    """Copy any nested sequence or array into an object array of Fractions."""
    array = np.array(values, dtype=object)
    if array.size == 0:
        return array
    return _to_rat(array).astype(object)


def concat(*parts: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(part, dtype=object) for part in parts])


def dot(x: np.ndarray, y: np.ndarray) -> Fraction:
    """Exact inner product, skipping zero coordinates of ``x``."""
    if x.shape != y.shape:
        raise ShapeError(f"inner product of shapes {x.shape} and {y.shape}")
    total = ZERO
    for i in np.flatnonzero(x != 0):
        total += x[i] * y[i]
    return total


def vectors_equal(x: np.ndarray, y: np.ndarray) -> bool:
    return x.shape == y.shape and bool(np.all(x == y))


def sigma_pl(x: Any) -> Fraction:
    """Piecewise-linear sigmoid: clamp to [0, 1]."""
    value = rat(x)
    if value < 0:
        return ZERO
    if value > 1:
        return ONE
    return value


def relu_pl(x: Any) -> Fraction:
    value = rat(x)
    return value if value > 0 else ZERO


_sigma_array = np.frompyfunc(sigma_pl, 1, 1)
_relu_array = np.frompyfunc(relu_pl, 1, 1)


def activate(tag: Activation | str, values: Any) -> Any:
    """Apply an activation to a scalar or componentwise to an array."""
    tag = Activation(tag)
    if tag is Activation.IDENTITY:
        return values
    scalar = np.ndim(values) == 0
    func = _sigma_array if tag is Activation.SIGMA else _relu_array
    if scalar:
        return sigma_pl(values) if tag is Activation.SIGMA else relu_pl(values)
    return func(values).astype(object)


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> x @ matrix + bias, with matrix of shape (in_dim, out_dim)."""

    matrix: np.ndarray
    bias: np.ndarray
    _active_rows: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)
    _row_entries: Tuple[Tuple[Tuple[int, Fraction], ...], ...] = field(
        default=(), init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        mat = as_rational_array(self.matrix)
        if mat.ndim != 2:
            raise ShapeError(f"affine matrix must be 2-D, got shape {mat.shape}")
        bias = as_rational_array(self.bias)
        if bias.shape != (mat.shape[1],):
            raise ShapeError(f"bias of shape {bias.shape} does not fit a {mat.shape} matrix")
        object.__setattr__(self, "matrix", _freeze(mat))
        object.__setattr__(self, "bias", _freeze(bias))
        active = tuple(int(i) for i in np.flatnonzero(np.any(mat != 0, axis=1)))
        object.__setattr__(self, "_active_rows", active)
        entries = tuple(
            tuple((int(j), mat[i, j]) for j in np.flatnonzero(mat[i] != 0)) for i in range(mat.shape[0])
        )
        object.__setattr__(self, "_row_entries", entries)

    @classmethod
    def linear(cls, mat: np.ndarray) -> "AffineMap":
        return cls(mat, zeros(mat.shape[1]))

    @classmethod
    def zero(cls, in_dim: int, out_dim: int) -> "AffineMap":
        return cls(zero_matrix(in_dim, out_dim), zeros(out_dim))

    @property
    def in_dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.matrix.shape[1])

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.in_dim,):
            raise ShapeError(f"affine map expects dimension {self.in_dim}, got {x.shape}")
        # accumulate over nonzero inputs and nonzero weights only
        out = list(self.bias)
        for i in self._active_rows:
            xi = x[i]
            if xi == 0:
                continue
            for j, weight in self._row_entries[i]:
                out[j] += weight if xi == 1 else xi * weight
        result = np.empty(len(out), dtype=object)
        result[:] = out
        return result

    def then(self, other: "AffineMap") -> "AffineMap":
        """Composition: apply self first, then other."""
        if self.out_dim != other.in_dim:
            raise ShapeError(f"cannot compose {self.out_dim}-dim output with {other.in_dim}-dim input")
        return AffineMap(self.matrix.dot(other.matrix), self.bias.dot(other.matrix) + other.bias)


@dataclass(frozen=True)
class Stage:
    affine: AffineMap
    activation: Activation = Activation.IDENTITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass(frozen=True)
class FeedForward:
    """Sequence of (affine map, activation) stages; no stages means identity."""

    stages: Tuple[Stage, ...] = ()

    def __post_init__(self) -> None:
        stages = tuple(self.stages)
        for index in range(1, len(stages)):
            if stages[index - 1].affine.out_dim != stages[index].affine.in_dim:
                raise ShapeError(
                    f"stage {index} expects dimension {stages[index].affine.in_dim}, "
                    f"stage {index - 1} produces {stages[index - 1].affine.out_dim}"
                )
        object.__setattr__(self, "stages", stages)

    @classmethod
    def identity(cls) -> "FeedForward":
        return cls(())

    @classmethod
    def zero(cls, in_dim: int, out_dim: Optional[int] = None) -> "FeedForward":
        return cls((Stage(AffineMap.zero(in_dim, in_dim if out_dim is None else out_dim)),))

    @classmethod
    def single(
        cls,
        mat: np.ndarray,
        bias: Optional[np.ndarray] = None,
        activation: Activation | str = Activation.IDENTITY,
    ) -> "FeedForward":
        affine = AffineMap(mat, zeros(mat.shape[1]) if bias is None else bias)
        return cls((Stage(affine, Activation(activation)),))

    @property
    def in_dim(self) -> Optional[int]:
        return self.stages[0].affine.in_dim if self.stages else None

    @property
    def out_dim(self) -> Optional[int]:
        return self.stages[-1].affine.out_dim if self.stages else None

    def apply(self, x: np.ndarray) -> np.ndarray:
        value = x
        for index, stage in enumerate(self.stages):
            if value.shape != (stage.affine.in_dim,):
                raise ShapeError(
                    f"stage {index} expects dimension {stage.affine.in_dim}, got {value.shape}"
                )
            value = activate(stage.activation, stage.affine.apply(value))
        return value

    def trace(self, x: np.ndarray) -> List[np.ndarray]:
        """Post-activation output of every stage, in order."""
        outputs: List[np.ndarray] = []
        value = x
        for stage in self.stages:
            value = activate(stage.activation, stage.affine.apply(value))
            outputs.append(value)
        return outputs

    def then(self, other: "FeedForward") -> "FeedForward":
        return FeedForward(self.stages + other.stages)

    def fused(self) -> "FeedForward":
        """Fold every identity-activation stage into the stage after it."""
        merged: List[Stage] = []
        pending: Optional[AffineMap] = None
        for stage in self.stages:
            affine = stage.affine if pending is None else pending.then(stage.affine)
            pending = None
            if stage.activation is Activation.IDENTITY:
                pending = affine
            else:
                merged.append(Stage(affine, stage.activation))
        if pending is not None:
            merged.append(Stage(pending, Activation.IDENTITY))
        return FeedForward(tuple(merged))


def ffn_apply(f: FeedForward, x: np.ndarray) -> np.ndarray:
    return f.apply(x)
