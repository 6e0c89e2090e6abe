import numpy as np
import pytest

from clwe.embed_io import EmbeddingSet, Vocabulary

ACCEPTANCE: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): acceptance criterion, reported in the summary"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        ACCEPTANCE[marker.args[0]] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        status = "PASS" if ACCEPTANCE[name] else "FAIL"
        terminalreporter.write_line(f"criterion {name}: {status}")


def make_set(tokens, matrix) -> EmbeddingSet:
    return EmbeddingSet(Vocabulary(list(tokens)), np.asarray(matrix, dtype=np.float64))


@pytest.fixture
def rng():
    return np.random.RandomState(12345)
