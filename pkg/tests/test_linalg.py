"""Tests for exact vectors, affine maps and feed-forward networks."""

from __future__ import annotations

from fractions import Fraction

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from formalnets.exceptions import ShapeError
from formalnets.services.linalg import (
    Activation,
    AffineMap,
    FeedForward,
    Stage,
    activate,
    ffn_apply,
    identity_matrix,
    matrix,
    relu_pl,
    sigma_pl,
    vector,
    vectors_equal,
    zeros,
)

small = st.fractions(min_value=-4, max_value=4, max_denominator=6)


def test_sigma_clamps_to_unit_interval():
    assert sigma_pl(Fraction(-3, 2)) == 0
    assert sigma_pl(Fraction(1, 3)) == Fraction(1, 3)
    assert sigma_pl(5) == 1
    assert relu_pl(Fraction(-1, 2)) == 0
    assert relu_pl(Fraction(7, 2)) == Fraction(7, 2)


def test_activate_is_componentwise_and_exact():
    values = vector(["-1", "1/2", "3"])
    out = activate(Activation.SIGMA, values)
    assert list(out) == [0, Fraction(1, 2), 1]
    assert all(isinstance(entry, Fraction) for entry in out)


def test_affine_apply_matches_dense_product():
    mat = matrix([[1, "1/2"], [0, -1], ["2/3", 0]])
    affine = AffineMap(mat, vector([1, 0]))
    x = vector([0, 3, "3/2"])
    assert list(affine.apply(x)) == [Fraction(2), Fraction(-3)]


def test_affine_shape_mismatch_raises():
    affine = AffineMap.zero(3, 2)
    with pytest.raises(ShapeError):
        affine.apply(zeros(2))
    with pytest.raises(ShapeError):
        AffineMap(matrix([[1, 2]]), vector([0]))


def test_feedforward_names_the_mismatched_stage():
    first = Stage(AffineMap.zero(2, 3))
    second = Stage(AffineMap.zero(2, 2))
    with pytest.raises(ShapeError, match="stage 1"):
        FeedForward((first, second))


def test_identity_feedforward_returns_input():
    x = vector([1, "-2/5"])
    assert vectors_equal(ffn_apply(FeedForward.identity(), x), x)
    assert FeedForward.identity().in_dim is None


def test_trace_lists_every_stage_output():
    net = FeedForward.single(identity_matrix(2), vector([-1, 0]), Activation.RELU).then(
        FeedForward.single(matrix([[2], [1]]))
    )
    outputs = net.trace(vector([3, 1]))
    assert [list(value) for value in outputs] == [[2, 1], [5]]


@settings(max_examples=40, deadline=None)
@given(
    st.lists(small, min_size=6, max_size=6),
    st.lists(small, min_size=4, max_size=4),
    st.lists(small, min_size=3, max_size=3),
)
def test_fused_network_computes_the_same_function(entries, second_entries, x):
    first = FeedForward.single(np.array(entries, dtype=object).reshape(3, 2))
    relu = FeedForward.single(np.array(second_entries, dtype=object).reshape(2, 2), activation=Activation.RELU)
    tail = FeedForward.single(identity_matrix(2), vector([1, -1]))
    net = first.then(relu).then(tail).then(FeedForward.single(identity_matrix(2)))
    fused = net.fused()
    assert len(fused.stages) == 2
    assert vectors_equal(fused.apply(vector(x)), net.apply(vector(x)))


@settings(max_examples=40, deadline=None)
@given(st.lists(small, min_size=4, max_size=4), st.lists(small, min_size=4, max_size=4), st.lists(small, min_size=2, max_size=2))
def test_affine_composition_is_exact(a, b, x):
    left = AffineMap(np.array(a, dtype=object).reshape(2, 2), vector([1, "1/2"]))
    right = AffineMap(np.array(b, dtype=object).reshape(2, 2), vector([0, -1]))
    point = vector(x)
    assert vectors_equal(left.then(right).apply(point), right.apply(left.apply(point)))


@settings(max_examples=60, deadline=None)
@given(st.lists(small, min_size=12, max_size=12), st.lists(small, min_size=3, max_size=3), st.lists(small, min_size=4, max_size=4))
def test_affine_application_matches_the_dense_product(entries, bias, x):
    mat = np.array(entries, dtype=object).reshape(4, 3)
    point = vector(x)
    expected = [sum((point[i] * mat[i, j] for i in range(4)), bias[j]) for j in range(3)]
    assert list(AffineMap(mat, vector(bias)).apply(point)) == expected
