"""Tests for scoring functions and hard attention."""

from __future__ import annotations

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from formalnets.exceptions import ShapeError
from formalnets.services.attention import (
    KVPair,
    MultPhi,
    NetDefined,
    PosDiff,
    attend,
    attend_with_support,
    hardmax,
    score_phi,
    score_posdiff,
)
from formalnets.services.linalg import vector, vectors_equal


def _brute_hardmax(scores):
    best = max(scores)
    winners = [i for i, s in enumerate(scores) if s == best]
    return [Fraction(1, len(winners)) if i in winners else 0 for i in range(len(scores))]


def test_hardmax_matches_brute_force_on_small_integer_scores():
    for length in range(1, 6):
        for scores in product(range(-2, 3), repeat=length):
            weights = hardmax([Fraction(s) for s in scores])
            assert weights == _brute_hardmax(scores)
            assert sum(weights) == 1


def test_hardmax_of_nothing_is_an_error():
    with pytest.raises(ValueError):
        hardmax([])


def test_score_phi_is_negative_absolute_inner_product():
    q = vector([1, -2, 0])
    k = vector(["1/2", 1, 9])
    assert score_phi(q, k) == Fraction(-3, 2)
    assert MultPhi().scores(q, [k, vector([2, 1, 0])]) == [Fraction(-3, 2), 0]


def test_attention_averages_tied_values():
    keys = (vector([1, 0]), vector([0, 1]), vector([1, 1]))
    values = (vector([2, 0]), vector([4, 0]), vector([0, 6]))
    kv = KVPair(keys, values)
    result, support = attend_with_support(vector([0, 1]), kv, MultPhi())
    assert support == [0]
    assert vectors_equal(result, vector([2, 0]))
    tied = attend(vector([0, 0]), kv, MultPhi())
    assert vectors_equal(tied, vector([2, 2]))


def _positional_pairs(n):
    keys = tuple(vector([0, j]) for j in range(1, n + 1))
    values = tuple(vector([j, 1]) for j in range(1, n + 1))
    return KVPair(keys, values)


def test_positional_score_points_at_the_query_position():
    for n in range(1, 13):
        kv = _positional_pairs(n)
        for position in range(1, n + 6):
            result, support = attend_with_support(vector([0, position]), kv, PosDiff(1))
            target = min(position, n)
            assert support == [target - 1]
            assert vectors_equal(result, vector([target, 1]))


def test_score_posdiff_defaults_to_last_coordinate():
    assert score_posdiff(vector([5, 2]), vector([-1, 7])) == -5
    assert score_posdiff(vector([5, 2]), vector([-1, 7]), slot=0) == -6
    assert PosDiff(0)(vector([5, 2]), vector([-1, 7])) == -6


def test_net_defined_score_runs_the_network_on_the_concatenation():
    net = PosDiff(0).network(2)
    assert NetDefined(net)(vector([3, 0]), vector([1, 0])) == -2


def test_kv_pair_rejects_mismatched_lengths():
    with pytest.raises(ShapeError):
        KVPair((vector([1]),), ())
    with pytest.raises(ShapeError):
        KVPair((), ())
    with pytest.raises(ShapeError):
        KVPair((vector([1]), vector([1, 2])), (vector([1]), vector([1])))


rationals = st.fractions(min_value=-4, max_value=4, max_denominator=5)
scores = st.sampled_from([MultPhi(), PosDiff(0), PosDiff(1)])


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(1, 6), score=scores)
def test_attention_ignores_the_order_of_key_value_pairs(data, n, score):
    def vec(size):
        return vector(data.draw(st.lists(rationals, min_size=size, max_size=size)))

    q = vec(2)
    keys = [vec(2) for _ in range(n)]
    values = [vec(3) for _ in range(n)]
    order = data.draw(st.permutations(range(n)))
    shuffled = KVPair(tuple(keys[i] for i in order), tuple(values[i] for i in order))
    assert vectors_equal(attend(q, KVPair(tuple(keys), tuple(values)), score), attend(q, shuffled, score))


@settings(max_examples=80, deadline=None)
@given(st.lists(rationals, min_size=3, max_size=3), st.lists(rationals, min_size=3, max_size=3), st.integers(0, 2))
def test_positional_score_is_minus_the_distance_of_one_coordinate(q, k, slot):
    expected = -abs(q[slot] - k[slot])
    assert score_posdiff(vector(q), vector(k), slot=slot) == expected
    assert PosDiff(slot).scores(vector(q), [vector(k)]) == [expected]
    assert NetDefined(PosDiff(slot).network(3))(vector(q), vector(k)) == expected
