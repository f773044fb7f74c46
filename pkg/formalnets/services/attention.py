"""Scoring functions and the hard-attention operator."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple, Union

import numpy as np

from formalnets.exceptions import ShapeError
from formalnets.services.linalg import (
    Activation,
    AffineMap,
    FeedForward,
    Stage,
    concat,
    dot,
    matrix,
    zero_matrix,
)


@dataclass(frozen=True)
class MultPhi:
    """score(q, k) = -|<q, k>|."""

    def __call__(self, q: np.ndarray, k: np.ndarray) -> Fraction:
        return score_phi(q, k)

    def scores(self, q: np.ndarray, keys: Sequence[np.ndarray]) -> List[Fraction]:
        if keys and keys[0].shape != q.shape:
            raise ShapeError(f"query of shape {q.shape} against keys of shape {keys[0].shape}")
        support = np.flatnonzero(q != 0)
        out: List[Fraction] = []
        for key in keys:
            total = Fraction(0)
            for i in support:
                total += q[i] * key[i]
            out.append(-abs(total))
        return out


@dataclass(frozen=True)
class PosDiff:
    """score(q, k) = -|e(q) - e(k)| where e reads coordinate ``slot``."""

    slot: int

    def network(self, dim: int) -> FeedForward:
        return posdiff_network(dim, self.slot)

    def __call__(self, q: np.ndarray, k: np.ndarray) -> Fraction:
        return score_posdiff(q, k, self.slot)

    def scores(self, q: np.ndarray, keys: Sequence[np.ndarray]) -> List[Fraction]:
        # closed form of the network score
        if not 0 <= self.slot < q.shape[0]:
            raise ShapeError(f"positional slot {self.slot} outside dimension {q.shape[0]}")
        scores = []
        for key in keys:
            if key.shape != q.shape:
                raise ShapeError(f"query of shape {q.shape} against key of shape {key.shape}")
            scores.append(-abs(q[self.slot] - key[self.slot]))
        return scores


@dataclass(frozen=True)
class NetDefined:
    """Score computed by an arbitrary feed-forward network over [q || k]."""

    net: FeedForward

    def __call__(self, q: np.ndarray, k: np.ndarray) -> Fraction:
        return _single_score(self.net, q, k)

    def scores(self, q: np.ndarray, keys: Sequence[np.ndarray]) -> List[Fraction]:
        return [_single_score(self.net, q, key) for key in keys]


ScoreFn = Union[MultPhi, PosDiff, NetDefined]


def _single_score(net: FeedForward, q: np.ndarray, k: np.ndarray) -> Fraction:
    if q.shape != k.shape:
        raise ShapeError(f"query of shape {q.shape} against key of shape {k.shape}")
    out = net.apply(concat(q, k))
    if out.shape != (1,):
        raise ShapeError(f"score network must return one value, got shape {out.shape}")
    return out[0]


def posdiff_network(dim: int, slot: int) -> FeedForward:
    """Three stages: pick [e(q), e(k)], relu([x-y, y-x]), then -x-y."""
    if not 0 <= slot < dim:
        raise ShapeError(f"positional slot {slot} outside dimension {dim}")
    pick = zero_matrix(2 * dim, 2)
    pick[slot, 0] = Fraction(1)
    pick[dim + slot, 1] = Fraction(1)
    spread = matrix([[1, -1], [-1, 1]])
    collapse = matrix([[-1], [-1]])
    return FeedForward(
        (
            Stage(AffineMap.linear(pick)),
            Stage(AffineMap.linear(spread), Activation.RELU),
            Stage(AffineMap.linear(collapse)),
        )
    )


def score_phi(q: np.ndarray, k: np.ndarray) -> Fraction:
    return -abs(dot(q, k))


def score_posdiff(q: np.ndarray, k: np.ndarray, slot: int | None = None) -> Fraction:
    """Positional score; ``slot`` defaults to the last coordinate."""
    if q.shape != k.shape:
        raise ShapeError(f"query of shape {q.shape} against key of shape {k.shape}")
    dim = int(q.shape[0])
    return _single_score(posdiff_network(dim, dim - 1 if slot is None else slot), q, k)


@dataclass(frozen=True)
class KVPair:
    keys: Tuple[np.ndarray, ...]
    values: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        keys, values = tuple(self.keys), tuple(self.values)
        if not keys:
            raise ShapeError("attention needs at least one key/value pair")
        if len(keys) != len(values):
            raise ShapeError(f"{len(keys)} keys but {len(values)} values")
        if len({key.shape for key in keys}) != 1 or len({value.shape for value in values}) != 1:
            raise ShapeError("keys (and values) must share one dimension")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.keys)


def hardmax(scores: Sequence[Fraction]) -> List[Fraction]:
    """Weight 1/r on each of the r exact maxima, 0 elsewhere."""
    if not scores:
        raise ValueError("hardmax of an empty sequence")
    best = max(scores)
    winners = sum(1 for score in scores if score == best)
    weight = Fraction(1, winners)
    return [weight if score == best else Fraction(0) for score in scores]


def tied_indices(scores: Sequence[Fraction]) -> List[int]:
    best = max(scores)
    return [index for index, score in enumerate(scores) if score == best]


def attend_with_support(q: np.ndarray, kv: KVPair, score: ScoreFn) -> Tuple[np.ndarray, List[int]]:
    """Attention result plus the indices that received weight."""
    winners = tied_indices(score.scores(q, kv.keys))
    total = kv.values[winners[0]].copy()
    for index in winners[1:]:
        total = total + kv.values[index]
    if len(winners) > 1:
        total = total / len(winners)
    return total.astype(object), winners


def attend(q: np.ndarray, kv: KVPair, score: ScoreFn) -> np.ndarray:
    """Att(q, K, V): exact average of the values at the maximal scores."""
    return attend_with_support(q, kv, score)[0]
