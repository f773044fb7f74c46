"""Tests for the reference Turing machine and RNN interpreters."""

from __future__ import annotations

from fractions import Fraction
from itertools import product

import pytest

from formalnets.exceptions import NormalizationError, SpecError, UnknownSymbolError
from formalnets.services.codec import machine_to_document, parse_general_tm_spec
from formalnets.services.linalg import vector, vectors_equal
from formalnets.services.machines import (
    GeneralTuringMachine,
    Transition,
    TuringMachine,
    last_visits,
    normalize_tm,
    random_rnn,
    rnn_accepts,
    rnn_run,
    run_general_tm,
    tm_accepts,
    tm_trace,
    validate_tm,
)
from formalnets.services.transformer import AcceptDecision


def _words(alphabet, max_len):
    for length in range(1, max_len + 1):
        for letters in product(alphabet, repeat=length):
            yield "".join(letters)


def test_even_ones_accepts_exactly_even_counts(even_ones):
    for word in _words("01", 6):
        decision = tm_accepts(even_ones, word, 100)
        if word.count("1") % 2 == 0:
            assert decision == AcceptDecision.accept(2 * len(word) + 3)
        else:
            assert decision == AcceptDecision.undecided()


def test_even_ones_trace_of_11(even_ones):
    trace = tm_trace(even_ones, "11", 20)
    assert trace.accept_time == 7
    assert trace.states == ("init", "read", "read", "read", "even", "odd", "even", "acc")
    assert trace.cells == (0, 1, 2, 3, 2, 1, 0, 1)
    assert trace.moves == (1, 1, 1, -1, -1, -1, 1)
    assert trace.move(-1) == 0
    frame = trace.frame()
    assert list(frame.columns) == ["step", "state", "read", "written", "move", "cell", "last_visit"]
    assert len(frame) == trace.length


def test_scan_to_blank_trace_of_11(scan_to_blank):
    assert len(scan_to_blank.states) == 3
    trace = tm_trace(scan_to_blank, "11", 8)
    assert trace.cells[:4] == (0, 1, 2, 3)
    assert trace.states[:4] == ("init", "read", "read", "read")
    assert trace.accept_time == 4


def test_zero_step_trace_is_the_start_configuration(scan_to_blank):
    trace = tm_trace(scan_to_blank, "11", 0)
    assert (trace.states, trace.read, trace.cells) == (("init",), ("#",), (0,))
    assert trace.move(-1) == 0
    assert trace.accept_time is None


def test_anbn_recognizes_balanced_words(anbn):
    for word in _words("ab", 6):
        k = len(word) // 2
        expected = len(word) % 2 == 0 and word == "a" * k + "b" * k
        assert tm_accepts(anbn, word, 400).accepted is expected, word


def test_unary_successor_appends_one(unary_successor):
    for n in range(1, 6):
        trace = tm_trace(unary_successor, "1" * n, 100)
        assert trace.accept_time == 2 * n + 3
        assert trace.written[n + 1] == "1"


def test_last_visits_match_brute_force(fixture_machines):
    for tm in fixture_machines.values():
        word = [symbol for symbol in tm.alphabet if symbol not in (tm.blank, "X")][:2] * 2
        trace = tm_trace(tm, word, 80)
        for i, cell in enumerate(trace.cells):
            earlier = [j for j in range(i) if trace.cells[j] == cell]
            assert trace.last_visit[i] == (max(earlier) if earlier else i - 1)
    assert last_visits([0, 1, 0, 1, 2]) == [-1, 0, 0, 1, 3]


def test_trace_rejects_bad_words(even_ones):
    with pytest.raises(SpecError):
        tm_trace(even_ones, "", 5)
    with pytest.raises(SpecError):
        tm_trace(even_ones, "1#", 5)
    with pytest.raises(UnknownSymbolError):
        tm_trace(even_ones, "12", 5)


def test_head_left_of_cell_zero_is_a_normalization_error():
    delta = {
        ("init", "#"): Transition("read", "#", "R"),
        ("init", "1"): Transition("left", "1", "L"),
        ("read", "1"): Transition("read", "1", "R"),
        ("read", "#"): Transition("left", "#", "L"),
        ("left", "1"): Transition("left", "1", "L"),
        ("left", "#"): Transition("left", "#", "L"),
    }
    tm = TuringMachine(("init", "read", "left"), ("1", "#"), "init", "read", (), delta)
    validate_tm(tm)
    with pytest.raises(NormalizationError, match="left of cell 0"):
        tm_trace(tm, "1", 20)


def test_validate_names_the_missing_rule(even_ones):
    delta = dict(even_ones.delta)
    del delta[("odd", "0")]
    broken = TuringMachine(
        even_ones.states, even_ones.alphabet, even_ones.init, even_ones.read_state, even_ones.accept, delta
    )
    with pytest.raises(SpecError, match=r"\(odd, 0\)"):
        validate_tm(broken)


def test_validate_rejects_rules_out_of_accepting_states(even_ones):
    broken = even_ones.with_rule("acc", "0", Transition("acc", "0", "R"))
    with pytest.raises(NormalizationError, match="accepting"):
        validate_tm(broken)


def test_normalize_preserves_language(contains_a):
    normalized = normalize_tm(contains_a)
    validate_tm(normalized)
    assert any(state.startswith("stay_") for state in normalized.states)
    for word in _words("ab", 5):
        general = run_general_tm(contains_a, word, 50)
        assert general.accepted is ("a" in word)
        assert tm_accepts(normalized, word, 200).accepted is general.accepted


def test_normalize_returns_normalized_machines_unchanged(fixture_path, even_ones):
    general = parse_general_tm_spec(fixture_path("even_ones.json").read_text(encoding="utf-8"))
    assert machine_to_document(normalize_tm(general)) == machine_to_document(even_ones)


def test_rnn_run_follows_the_recurrences(tiny_rnn):
    X = tiny_rnn.embed_word("a")
    run = rnn_run(tiny_rnn, X, 2)
    assert vectors_equal(run.hidden[1], vector(["1/3", 0]))
    assert vectors_equal(run.decoded[0], run.hidden[-1])
    assert vectors_equal(run.decoded[1], vector([0, "1/9"]))
    assert len(run.decoded) == 3


def test_rnn_accepts_reports_decoder_steps(tiny_rnn):
    X = tiny_rnn.embed_word("a")
    assert rnn_accepts(tiny_rnn, X, max_steps=10) == AcceptDecision.accept(3)
    assert rnn_accepts(tiny_rnn, X, max_steps=2) == AcceptDecision.undecided()


def test_random_rnn_draws_small_weights(rng):
    rnn = random_rnn(3, rng)
    allowed = {Fraction(k, 6) for k in (-2, -1, 0, 1, 2)}
    for mat in (rnn.W, rnn.V, rnn.U):
        assert mat.shape == (3, 3)
        assert set(mat.flatten()) <= allowed
    assert rnn.alphabet == ("a", "b")


_INPUT_LETTERS = {
    "even_ones.json": ("01", 5),
    "anbn.json": ("ab", 5),
    "unary_successor.json": ("1", 6),
    "scan_to_blank.json": ("01", 5),
    "contains_a_general.json": ("ab", 5),
    "stay_rule.json": ("1", 6),
}


@pytest.mark.parametrize("name", sorted(_INPUT_LETTERS))
def test_normalize_keeps_the_language_of_every_fixture(fixture_path, name):
    general = parse_general_tm_spec(fixture_path(name).read_text(encoding="utf-8"))
    normalized = normalize_tm(general)
    letters, max_len = _INPUT_LETTERS[name]
    for word in _words(letters, max_len):
        expected = run_general_tm(general, word, 200).accepted
        assert tm_accepts(normalized, word, 600).accepted is expected, word


def test_declared_read_phase_keeps_input_on_cell_one(fixture_path):
    general = parse_general_tm_spec(fixture_path("even_ones.json").read_text(encoding="utf-8"))
    assert general.input_origin == 1
    assert run_general_tm(general, "11", 20) == AcceptDecision.accept(7)
    assert run_general_tm(general, "1", 20) == AcceptDecision.undecided()


def test_one_stay_move_adds_one_state(fixture_path):
    general = parse_general_tm_spec(fixture_path("stay_rule.json").read_text(encoding="utf-8"))
    normalized = normalize_tm(general)
    assert normalized.states == ("init", "read", "acc", "stay_acc")
    assert normalized.delta[("read", "#")] == Transition("stay_acc", "#", "R")
    assert normalized.delta[("stay_acc", "1")] == Transition("acc", "1", "L")
    assert normalized.read_state == "read"


def test_left_margin_is_shifted_onto_cell_zero():
    general = GeneralTuringMachine(
        ("start", "back", "acc"),
        ("a", "b", "#"),
        "start",
        ("acc",),
        {
            ("start", "a"): Transition("back", "a", "L"),
            ("start", "b"): Transition("start", "b", "R"),
            ("back", "#"): Transition("acc", "#", "R"),
        },
    )
    assert run_general_tm(general, "a", 5).accepted
    trace = tm_trace(normalize_tm(general), "a", 40)
    assert trace.accept_time is not None
    assert min(trace.cells) == 0
