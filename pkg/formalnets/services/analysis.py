"""Proportion invariance sampling and the explicit majority recognizer."""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from functools import reduce
from math import factorial, gcd
import logging
from typing import Dict, Iterator, List, Sequence

import numpy as np
import pandas as pd

from formalnets.services.attention import MultPhi
from formalnets.services.linalg import FeedForward, identity_matrix, matrix, vector
from formalnets.services.transformer import (
    DecoderLayer,
    EncoderLayer,
    FinalPredicate,
    PositionalEncoding,
    Recognizer,
    TransformerParams,
    run_trans,
)

logger = logging.getLogger(__name__)


def proportions(w: Sequence[str]) -> Dict[str, Fraction]:
    symbols = list(w)
    if not symbols:
        raise ValueError("proportions of an empty word")
    counts = Counter(symbols)
    return {symbol: Fraction(count, len(symbols)) for symbol, count in counts.items()}


def _multiset_permutations(symbols: List[str]) -> Iterator[str]:
    """Distinct permutations in lexicographic order of a sorted multiset."""
    items = sorted(symbols)
    while True:
        yield "".join(items)
        i = len(items) - 2
        while i >= 0 and items[i] >= items[i + 1]:
            i -= 1
        if i < 0:
            return
        j = len(items) - 1
        while items[j] <= items[i]:
            j -= 1
        items[i], items[j] = items[j], items[i]
        items[i + 1 :] = reversed(items[i + 1 :])


def _distinct_permutations(counts: Counter) -> int:
    total = factorial(sum(counts.values()))
    for count in counts.values():
        total //= factorial(count)
    return total


def propinv_samples(
    w: Sequence[str],
    max_len: int,
    count: int,
    seed: int = 0,
    cap: int = 5040,
) -> List[str]:
    """Members of PropInv(w): w, its powers, then rearrangements of every admissible length.

    A length admits members when it is a multiple of the shortest word with
    w's proportions.  Lengths whose distinct rearrangements exceed ``cap`` are
    sampled with seeded shuffles instead of enumerated.
    """
    word = "".join(w)
    if not word:
        raise ValueError("PropInv needs a non-empty base word")
    counts = Counter(word)
    step = reduce(gcd, counts.values())
    unit = Counter({symbol: n // step for symbol, n in counts.items()})
    unit_len = sum(unit.values())
    rng = np.random.default_rng(seed)

    out: List[str] = []
    seen = set()

    def take(candidate: str) -> bool:
        if candidate not in seen:
            seen.add(candidate)
            out.append(candidate)
        return len(out) >= count

    if take(word):
        return out
    k = 2
    while k * len(word) <= max_len:
        if take(word * k):
            return out
        k += 1
    multiple = 1
    while multiple * unit_len <= max_len:
        scaled = Counter({symbol: n * multiple for symbol, n in unit.items()})
        letters = sorted(scaled.elements())
        if _distinct_permutations(scaled) <= cap:
            for candidate in _multiset_permutations(letters):
                if take(candidate):
                    return out
        else:
            if take("".join(letters)):
                return out
            for _ in range(cap):
                if take("".join(rng.permutation(letters))):
                    return out
        multiple += 1
    logger.debug("PropInv(%s) exhausted at %d members", word, len(out))
    return out


def _majority_params(final_K: FeedForward) -> TransformerParams:
    zero = FeedForward.zero(2)
    encoder = EncoderLayer(zero, zero, zero, zero, MultPhi())
    decoder = DecoderLayer(zero, zero, zero, FeedForward.single(matrix([[-1, 0], [1, -1]])), MultPhi(), MultPhi())
    return TransformerParams(2, (encoder,), final_K, FeedForward.identity(), (decoder,), FeedForward.identity())


def majority_recognizer() -> Recognizer:
    """d = 2 network whose outputs are [(#a - #b) / n, 0]; accepts when the first coordinate is positive."""
    embed = {"a": vector([0, 1]), "b": vector([0, -1])}
    return Recognizer(
        ("a", "b"),
        embed,
        PositionalEncoding("zero"),
        _majority_params(FeedForward.zero(2)),
        vector([0, 0]),
        FinalPredicate.greater_than([0], 0),
    )


def order_sensitive_recognizer() -> Recognizer:
    """The majority network with identity keys and the index written into slot 0."""
    embed = {"a": vector([0, 1]), "b": vector([0, -1])}
    return Recognizer(
        ("a", "b"),
        embed,
        PositionalEncoding("index", 0),
        _majority_params(FeedForward.single(identity_matrix(2))),
        vector([0, 0]),
        FinalPredicate.greater_than([0], 0),
    )


def outputs_for(rec: Recognizer, w: Sequence[str], steps: int) -> List[np.ndarray]:
    return run_trans(rec.encode(w), rec.seed, steps, rec)


def first_difference(left: Sequence[np.ndarray], right: Sequence[np.ndarray]) -> int | None:
    """1-based index of the first differing output, or None."""
    for index, (x, y) in enumerate(zip(left, right), start=1):
        if not bool(np.all(x == y)):
            return index
    return None


def invariance_report(rec: Recognizer, w: Sequence[str], members: Sequence[str], steps: int) -> pd.DataFrame:
    """Per-member agreement of output sequences with the base word's."""
    reference = outputs_for(rec, w, steps)
    rows = []
    for member in members:
        difference = first_difference(reference, outputs_for(rec, member, steps))
        rows.append(
            {
                "member": member,
                "length": len(member),
                "agrees": difference is None,
                "first_difference": difference,
            }
        )
    frame = pd.DataFrame(rows, columns=["member", "length", "agrees", "first_difference"])
    logger.info("PropInv(%s): %d of %d members agree", "".join(w), int(frame["agrees"].sum()), len(frame))
    return frame
