"""Shared fixtures and the acceptance-suite terminal summary."""

import numpy as np
import pytest

from semlink.embed_io import EmbeddingTable

_ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []
_ACCEPTANCE_DOCS: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if "test_acceptance" in item.nodeid and item.obj.__doc__:
            _ACCEPTANCE_DOCS[item.nodeid] = item.obj.__doc__.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS.append(
            (report.nodeid, report.outcome.upper(), _ACCEPTANCE_DOCS.get(report.nodeid, ""))
        )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, outcome, doc in _ACCEPTANCE_RESULTS:
        name = nodeid.split("::")[-1]
        mark = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"[{mark}] {name}: {doc}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def random_table(rng, n, dim, prefix="v", scale=1.0):
    labels = [f"{prefix}{i:05d}" for i in range(n)]
    matrix = (scale * rng.standard_normal((n, dim))).astype(np.float32)
    return EmbeddingTable(dim, labels, matrix)


@pytest.fixture
def make_table(rng):
    def _make(n, dim, prefix="v", scale=1.0):
        return random_table(rng, n, dim, prefix, scale)

    return _make
