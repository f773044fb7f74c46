"""Tests for the verification pipeline."""

from __future__ import annotations

import pytest

from formalnets.config import Config
from formalnets.services.machines import Transition, normalize_tm
from formalnets.services.pipeline import VerificationPipeline, first_mismatch
from formalnets.services.linalg import vector
from formalnets.services.tm_compiler import compile_tm


@pytest.fixture()
def pipeline():
    return VerificationPipeline(Config(VERIFY_WORKERS=2))


def test_first_mismatch():
    assert first_mismatch(vector([1, 2, 3]), vector([1, 2, 3])) is None
    assert first_mismatch(vector([1, 2, 3]), vector([1, 0, 0])) == 1
    assert first_mismatch(vector([1, 2]), vector([1, 2, 3])) == 0


def test_even_ones_passes(pipeline, even_ones):
    inputs = [["1"], ["1", "1"], ["0", "1", "1"], ["1", "0"]]
    report = pipeline.verify_tm(even_ones, inputs, 12)
    assert report.status == "PASS"
    assert [case.input for case in report.cases] == ["1", "11", "011", "10"]
    eleven = report.cases[1]
    assert eleven.reference_accept == 7
    assert eleven.network_accept == 7
    assert pipeline.summary() == ["compile_tm", "verify_tm:4", "tm:PASS"]


def test_anbn_passes(pipeline, anbn):
    report = pipeline.verify_tm(anbn, [list("ab"), list("aabb"), list("ba")], 24)
    assert report.status == "PASS"


def test_normalized_general_machine_passes(pipeline, contains_a):
    report = pipeline.verify_tm(normalize_tm(contains_a), [list("bba"), list("bb")], 20)
    assert report.status == "PASS"
    accepts = {case.input: case.reference_accept for case in report.cases}
    assert accepts["bb"] is None
    assert accepts["bba"] is not None


def test_wrong_next_state_is_located(pipeline, even_ones):
    faulty = even_ones.with_rule("even", "1", Transition("even", "1", "L"))
    report = pipeline.verify_tm(even_ones, [["1", "1"]], 12, recognizer=compile_tm(faulty))
    assert report.status == "FAIL"
    divergence = report.cases[0].divergence
    assert divergence.step == 5
    assert divergence.stage == "layer1"
    assert divergence.block == "q2"
    assert (divergence.expected, divergence.got) == ("0", "1")
    assert pipeline.summary()[0] == "use_supplied_network"
    assert pipeline.summary()[-1] == "tm:FAIL"


def test_wrong_written_symbol_is_located(pipeline, even_ones):
    faulty = even_ones.with_rule("read", "1", Transition("read", "0", "R"))
    report = pipeline.verify_tm(even_ones, [["1", "1"]], 12, recognizer=compile_tm(faulty))
    divergence = report.cases[0].divergence
    assert (divergence.step, divergence.stage, divergence.block) == (2, "layer1", "s2")


def test_zero_steps_is_vacuous(pipeline, even_ones):
    report = pipeline.verify_tm(even_ones, [["1"]], 0)
    assert report.status == "PASS"
    assert report.cases[0].steps_checked == 0
    assert report.warnings
    assert pipeline.summary() == ["vacuous"]


def test_audit_can_be_disabled(even_ones):
    report = VerificationPipeline(Config(AUDIT=False)).verify_tm(even_ones, [["1", "1"]], 8)
    assert report.status == "PASS"


def test_tiny_rnn_passes_both_compilations(pipeline, tiny_rnn):
    report = pipeline.verify_rnn(tiny_rnn, [["a"], ["a", "b"], ["b", "a"], list("abba")], 8)
    assert report.status == "PASS"
    by_input = {case.input: case for case in report.cases}
    assert by_input["a"].reference_accept == 3
    assert by_input["ba"].network_accept == by_input["ba"].reference_accept
    assert pipeline.summary() == ["compile_rnn", "compile_ngpu", "verify_rnn:4", "rnn:PASS"]


def test_report_serializes(pipeline, even_ones):
    report = pipeline.verify_tm(even_ones, [["1"]], 6)
    text = report.model_dump_json()
    assert '"status":"PASS"' in text
