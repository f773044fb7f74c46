"""Tests for the Turing machine to Transformer compiler."""

from __future__ import annotations

from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from formalnets.services.linalg import Activation, concat, vector, vectors_equal
from formalnets.services.machines import tm_accepts, tm_trace
from formalnets.services.tm_compiler import (
    OneHotCodec,
    TMVectorLayout,
    audit_values,
    build_if_gadget,
    compile_tm,
    expected_first_layer,
    expected_output,
    pair_encoder,
    sigma_stage_outputs,
    transition_matrix,
    triple_decoder,
)
from formalnets.services.transformer import AcceptDecision, run_trans


def _words(alphabet, max_len):
    for length in range(1, max_len + 1):
        for letters in product(alphabet, repeat=length):
            yield "".join(letters)


def _check_simulation(tm, rec, word, steps):
    trace = tm_trace(tm, word, steps)
    outputs = run_trans(rec.encode(word), rec.seed, trace.length - 1, rec)
    for t, y in enumerate(outputs, start=1):
        assert vectors_equal(y, expected_output(tm, trace, t)), (word, t)
    hits = [t for t, y in enumerate(outputs, start=1) if rec.final_pred.holds(y)]
    network = AcceptDecision.accept(hits[0]) if hits else AcceptDecision.undecided()
    assert network == tm_accepts(tm, word, steps), word


def test_compiled_dimensions(fixture_machines):
    for tm in fixture_machines.values():
        rec = compile_tm(tm)
        assert rec.dim == 2 * len(tm.states) + 4 * len(tm.alphabet) + 11
        assert len(rec.params.enc_layers) == 1
        assert len(rec.params.dec_layers) == 3
        assert len(rec.slots) == rec.dim
        assert [stage.activation for stage in rec.params.final_F.stages] == [
            Activation.SIGMA,
            Activation.SIGMA,
            Activation.SIGMA,
            Activation.IDENTITY,
        ]


def test_layout_names_and_blocks(even_ones):
    layout = TMVectorLayout.for_machine(even_ones)
    names = layout.slot_names(even_ones)
    assert names[0] == "q1[init]"
    assert names[layout.x1] == "x1"
    assert names[layout.s3.start + 2] == "s3[#]"
    assert layout.block_of(layout.q2.start + 1) == "q2"
    frame = layout.frame(even_ones)
    assert list(frame.columns) == ["slot", "name", "block"]
    assert len(frame) == layout.dim


@pytest.mark.parametrize("m,n", [(m, n) for m in range(1, 4) for n in range(1, 4)])
def test_if_gadget_selects_on_every_binary_input(m, n):
    gadget = build_if_gadget(m, n)
    for bits in product((0, 1), repeat=m + 2 * n + 1):
        x, y, z, b = bits[:m], bits[m : m + n], bits[m + n : m + 2 * n], bits[-1]
        expected = list(x) + list(z if b else y)
        assert list(gadget.apply(vector(bits))) == expected


def test_pair_encoder_and_transition_lookup(fixture_machines):
    for tm in fixture_machines.values():
        codec = OneHotCodec(tm)
        encoder = pair_encoder(codec)
        lookup = transition_matrix(tm, codec).dot(triple_decoder(codec))
        for state in tm.states:
            for symbol in tm.alphabet:
                pair = encoder.apply(concat(codec.state_vector(state), codec.symbol_vector(symbol)))
                assert [int(v) for v in pair].index(1) == codec.pair(state, symbol)
                assert sum(pair) == 1
                if tm.is_accepting(state):
                    continue
                rule = tm.delta[(state, symbol)]
                move = 1 if rule.move == "R" else -1
                expected = concat(codec.state_vector(rule.next), codec.symbol_vector(rule.write), vector([move]))
                assert vectors_equal(pair.dot(lookup), expected)


def test_even_ones_simulation(even_ones):
    rec = compile_tm(even_ones)
    for word in _words("01", 4):
        _check_simulation(even_ones, rec, word, 40)


def test_unary_successor_simulation(unary_successor):
    rec = compile_tm(unary_successor)
    for n in range(1, 5):
        _check_simulation(unary_successor, rec, "1" * n, 40)


def test_anbn_simulation(anbn):
    rec = compile_tm(anbn)
    for word in list(_words("ab", 2)) + ["aabb"]:
        _check_simulation(anbn, rec, word, 60)


def test_first_layer_and_pointers_follow_the_trace(anbn):
    rec = compile_tm(anbn)
    word = "aabb"
    trace = tm_trace(anbn, word, 120)
    run = rec.decoder(word)
    y = rec.seed
    for t in range(1, trace.length):
        y = run.push(y)
        first, second, third = run.records[-1].layers
        assert vectors_equal(first.output, expected_first_layer(anbn, trace, word, t - 1)), t
        assert second.self_support == tuple(range(t))
        assert third.self_support == (trace.last_visit[t],)
        sigma_values = sigma_stage_outputs(rec.params.dec_layers[0].O, first.attended)
        sigma_values += sigma_stage_outputs(rec.params.final_F, third.output)
        assert audit_values(sigma_values) == []
    assert trace.accept_time == trace.length - 1


@pytest.fixture(scope="module")
def compiled_fixtures(fixture_machines):
    return {name: compile_tm(tm) for name, tm in fixture_machines.items()}


@pytest.mark.slow
@pytest.mark.parametrize("name,letters", [("even_ones", "01"), ("anbn", "ab"), ("unary_successor", "1")])
@settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_fixture_simulations_long(fixture_machines, compiled_fixtures, name, letters, data):
    text = data.draw(st.text(alphabet=letters, min_size=1, max_size=6))
    _check_simulation(fixture_machines[name], compiled_fixtures[name], text, 100)
