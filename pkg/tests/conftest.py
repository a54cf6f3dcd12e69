from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from coboson.schmidt import make_distribution


@st.composite
def distributions(draw, min_s: int = 1, max_s: int = 8, allow_zeros: bool = False):
    """Random normalized distributions with a mix of flat and spiky shapes."""
    s = draw(st.integers(min_s, max_s))
    lo = 0.0 if allow_zeros else 1e-3
    raw = draw(st.lists(st.floats(lo, 1.0), min_size=s, max_size=s))
    arr = np.array(raw)
    if arr.sum() == 0.0:
        arr[0] = 1.0
    return make_distribution(arr, renormalize=True)


def random_distribution(rng: np.random.Generator, s: int, alpha: float = 1.0):
    return make_distribution(rng.dirichlet(np.full(s, alpha)), renormalize=True)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
