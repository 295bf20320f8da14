from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from tractorforge import conf_tractor as ct
from tractorforge.cr_geometry import manifold_from_name, pseudohermitian, sample_points
from tractorforge.fefferman import fefferman_from_base

SEED = 7
ACCEPTANCE_LINES: list[str] = []


@lru_cache(maxsize=None)
def patch(name: str):
    return manifold_from_name(name)


@lru_cache(maxsize=None)
def points(name: str, count: int = 20, seed: int = SEED) -> tuple[np.ndarray, ...]:
    return tuple(sample_points(patch(name), count, seed))


@lru_cache(maxsize=None)
def base(name: str, i: int, order: int = 7, count: int = 20):
    return pseudohermitian(patch(name), points(name, count)[i], order)


@lru_cache(maxsize=None)
def upstairs(name: str, i: int, order: int = 7, count: int = 20):
    """(PseudohermitianData, FeffermanPointData, ConfData) at sampled point i."""
    d = base(name, i, order, count)
    fp = fefferman_from_base(d)
    return d, fp, ct.conf_data(fp)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
