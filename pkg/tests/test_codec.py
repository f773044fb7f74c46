"""Tests for document parsing and serialization."""

from __future__ import annotations

import json

import pytest

from formalnets.exceptions import NormalizationError, SpecError
from formalnets.services import codec
from formalnets.services.analysis import majority_recognizer, order_sensitive_recognizer
from formalnets.services.linalg import vectors_equal
from formalnets.services.neural_gpu import compile_rnn_to_ngpu, ngpu_run
from formalnets.services.rnn_compiler import compile_rnn
from formalnets.services.tm_compiler import compile_tm
from formalnets.services.transformer import Recognizer, run_trans

from .conftest import fixture_text


def _same_outputs(left, right):
    return len(left) == len(right) and all(vectors_equal(x, y) for x, y in zip(left, right))


def test_machine_document_matches_fixture(even_ones):
    doc = codec.machine_to_document(even_ones)
    assert doc.model_dump() == json.loads(fixture_text("even_ones.json"))


def test_machine_document_parses_back(anbn):
    again = codec.parse_tm_spec(codec.dump_document(codec.machine_to_document(anbn)))
    assert again.states == anbn.states
    assert again.alphabet == anbn.alphabet
    assert dict(again.delta) == dict(anbn.delta)


def test_stay_move_is_rejected_with_its_rule():
    with pytest.raises(NormalizationError, match=r"\(read, #\)"):
        codec.parse_tm_spec(fixture_text("stay_rule.json"))


def test_stay_move_parses_as_general_machine():
    general = codec.parse_general_tm_spec(fixture_text("stay_rule.json"))
    assert general.delta[("read", "#")].move == "S"


def test_unknown_field_is_rejected():
    data = json.loads(fixture_text("even_ones.json"))
    data["tape"] = ["1"]
    with pytest.raises(SpecError, match="tape"):
        codec.parse_tm_spec(data)


def test_duplicate_rule_is_rejected():
    data = json.loads(fixture_text("even_ones.json"))
    data["delta"].append({"state": "odd", "read": "1", "next": "odd", "write": "1", "move": "L"})
    with pytest.raises(SpecError, match="duplicate rule for \\(odd, 1\\)"):
        codec.parse_tm_spec(data)


def test_broken_json_is_a_spec_error():
    with pytest.raises(SpecError, match="not a JSON document"):
        codec.parse_tm_spec("{\"states\": [")


def test_float_weights_are_rejected():
    data = json.loads(fixture_text("tiny_rnn.json"))
    data["W"][0][0] = 0.5
    with pytest.raises(SpecError):
        codec.parse_rnn_spec(data)


def test_rnn_document_round_trip(tiny_rnn):
    again = codec.parse_rnn_spec(codec.dump_document(codec.rnn_to_document(tiny_rnn)))
    for name in ("W", "V", "U"):
        assert (getattr(again, name) == getattr(tiny_rnn, name)).all()
    assert set(again.embed) == {"a", "b"}
    assert again.accept == tiny_rnn.accept


@pytest.mark.parametrize("word", ["11", "101", "0"])
def test_compiled_machine_survives_serialization(even_ones, word):
    rec = compile_tm(even_ones)
    loaded = codec.load_network(codec.dump_document(codec.recognizer_to_document(rec)))
    assert isinstance(loaded, Recognizer)
    assert loaded.slots == rec.slots
    steps = 2 * len(word) + 4
    assert _same_outputs(
        run_trans(rec.encode(word), rec.seed, steps, rec),
        run_trans(loaded.encode(word), loaded.seed, steps, loaded),
    )


def test_compiled_rnn_survives_serialization(tiny_rnn):
    rec = compile_rnn(tiny_rnn)
    loaded = codec.load_network(codec.dump_document(codec.recognizer_to_document(rec)))
    assert _same_outputs(
        run_trans(rec.encode("abba"), rec.seed, 7, rec),
        run_trans(loaded.encode("abba"), loaded.seed, 7, loaded),
    )
    assert loaded.final_pred == rec.final_pred


@pytest.mark.parametrize("factory", [majority_recognizer, order_sensitive_recognizer])
def test_positional_encoding_is_serialized(factory):
    rec = factory()
    doc = codec.recognizer_to_document(rec)
    loaded = codec.recognizer_from_document(doc)
    assert loaded.posenc == rec.posenc
    assert _same_outputs(run_trans(rec.encode("aba"), rec.seed, 3, rec), run_trans(loaded.encode("aba"), loaded.seed, 3, loaded))


def test_neural_gpu_document_round_trip(tiny_rnn):
    params, lifter = compile_rnn_to_ngpu(tiny_rnn)
    embed = {symbol: lifter(vector) for symbol, vector in tiny_rnn.embed.items()}
    text = codec.dump_document(codec.ngpu_to_document(params, embed, lifter.blocks()))
    assert json.loads(text)["format"] == "neural_gpu"
    loaded_params, loaded_embed = codec.load_network(text)
    word = [embed[s] for s in "abab"]
    again = [loaded_embed[s] for s in "abab"]
    assert _same_outputs(ngpu_run(word, 6, params), ngpu_run(again, 6, loaded_params))


def test_neural_gpu_document_with_wrong_width():
    params, lifter = compile_rnn_to_ngpu(codec.parse_rnn_spec(fixture_text("tiny_rnn.json")))
    data = json.loads(codec.dump_document(codec.ngpu_to_document(params, {})))
    data["width"] = 3
    with pytest.raises(SpecError, match="width"):
        codec.load_network(data)
