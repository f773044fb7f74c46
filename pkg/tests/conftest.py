"""Pytest fixtures for the workbench."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from formalnets.services.codec import parse_general_tm_spec, parse_rnn_spec, parse_tm_spec

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture()
def fixture_path():
    return lambda name: FIXTURES / name


@pytest.fixture(scope="session")
def even_ones():
    return parse_tm_spec(fixture_text("even_ones.json"))


@pytest.fixture(scope="session")
def anbn():
    return parse_tm_spec(fixture_text("anbn.json"))


@pytest.fixture(scope="session")
def unary_successor():
    return parse_tm_spec(fixture_text("unary_successor.json"))


@pytest.fixture(scope="session")
def scan_to_blank():
    return parse_tm_spec(fixture_text("scan_to_blank.json"))


@pytest.fixture(scope="session")
def fixture_machines(even_ones, anbn, unary_successor):
    return {"even_ones": even_ones, "anbn": anbn, "unary_successor": unary_successor}


@pytest.fixture(scope="session")
def contains_a():
    return parse_general_tm_spec(fixture_text("contains_a_general.json"))


@pytest.fixture(scope="session")
def tiny_rnn():
    return parse_rnn_spec(fixture_text("tiny_rnn.json"))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
