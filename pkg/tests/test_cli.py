"""Tests for the command-line front end."""

from __future__ import annotations

import json

from formalnets.cli import main, read_inputs, split_word
from formalnets.services import codec
from formalnets.services.analysis import order_sensitive_recognizer

from .conftest import FIXTURES


def _fixture(name):
    return str(FIXTURES / name)


def test_split_word():
    assert split_word("abba") == ["a", "b", "b", "a"]
    assert split_word(" 0 1 1 ") == ["0", "1", "1"]


def test_read_inputs_skips_comments(tmp_path):
    path = tmp_path / "inputs.txt"
    path.write_text("# words\nab\n\nb a\n", encoding="utf-8")
    assert read_inputs(str(path)) == [["a", "b"], ["b", "a"]]


def test_compile_then_run(tmp_path, capsys):
    network = tmp_path / "even_ones.net.json"
    assert main(["compile-tm", _fixture("even_ones.json"), "-o", str(network)]) == 0
    assert json.loads(network.read_text(encoding="utf-8"))["format"] == "transformer"
    capsys.readouterr()

    assert main(["run", str(network), "--input", "11", "--steps", "8"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("y_1 = [")
    assert lines[-1] == "accept(7)"


def test_run_tsv_and_trace(tmp_path, capsys):
    network = tmp_path / "net.json"
    main(["compile-tm", _fixture("even_ones.json"), "-o", str(network)])
    capsys.readouterr()

    assert main(["run", str(network), "--input", "1", "--steps", "3", "--tsv"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].startswith("step\taccepts\t")
    assert len(rows) == 4

    assert main(["run", str(network), "--input", "1", "--steps", "2", "--trace"]) == 0
    out = capsys.readouterr().out
    assert "layer 1: self=" in out
    assert out.strip().endswith("undecided")


def test_layout_table(capsys):
    assert main(["compile-tm", _fixture("even_ones.json"), "--layout"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split("\t")[0] == "slot"


def test_verify_machine(capsys):
    code = main(["verify", _fixture("even_ones.json"), "--inputs", _fixture("even_ones_inputs.txt"), "--steps", "12"])
    captured = capsys.readouterr()
    assert code == 0
    assert json.loads(captured.out)["status"] == "PASS"
    assert captured.err.strip().endswith("PASS")


def test_verify_rnn(capsys):
    code = main(["verify", _fixture("tiny_rnn.json"), "--inputs", _fixture("rnn_inputs.txt"), "--steps", "6"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["status"] == "PASS"


def test_trace_tsv(capsys):
    assert main(["trace", _fixture("even_ones.json"), "--input", "11", "--tsv"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].split("\t") == ["step", "state", "read", "written", "move", "cell", "last_visit"]
    assert rows[-1].split("\t")[1] == "acc"


def test_normalize_general_machine(capsys):
    assert main(["normalize", _fixture("contains_a_general.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["read_state"] == "read"
    assert all(rule["move"] in ("L", "R") for rule in doc["delta"])


def test_compile_ngpu_then_run(tmp_path, capsys):
    network = tmp_path / "tiny.ngpu.json"
    assert main(["compile-ngpu", _fixture("tiny_rnn.json"), "-o", str(network)]) == 0
    capsys.readouterr()
    assert main(["run", str(network), "--input", "ab", "--steps", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split(" = ")[0] for line in lines] == ["y_1", "y_2", "y_3", "y_4"]


def test_propinv_majority(capsys):
    assert main(["propinv", "--word", "aabb", "--max-len", "6", "--steps", "3"]) == 0
    assert "aaabbb" in capsys.readouterr().out


def test_propinv_reports_disagreement(tmp_path, capsys):
    network = tmp_path / "ordered.json"
    network.write_text(codec.dump_document(codec.recognizer_to_document(order_sensitive_recognizer())), encoding="utf-8")
    assert main(["propinv", "--word", "ab", "--net", str(network), "--max-len", "2", "--steps", "2", "--tsv"]) == 1
    assert "ba\t2\tFalse\t" in capsys.readouterr().out


def test_bad_spec_exits_with_error(capsys):
    assert main(["compile-tm", _fixture("stay_rule.json")]) == 2
    assert "does not move the head" in capsys.readouterr().err


def test_missing_file_exits_with_error(tmp_path, capsys):
    assert main(["trace", str(tmp_path / "missing.json"), "--input", "1"]) == 2
    assert "error:" in capsys.readouterr().err
