import numpy as np
import pytest

from ppgtune import _kernels

KERNELS = ("sosfilt", "match_pairs", "lag_scan", "front_rank", "select_peaks")


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Runs the test once with the compiled kernels and once with the numpy ones."""
    suffix = "_nb" if request.param == "numba" else "_np"
    for name in KERNELS:
        monkeypatch.setattr(_kernels, name, getattr(_kernels, name + suffix))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
