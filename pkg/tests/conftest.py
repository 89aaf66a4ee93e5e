import functools

import numpy as np
import pytest

from softrelu_newton.instance import choose_weights, generate_instance, plant_optimum

# acceptance lines collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@functools.lru_cache(maxsize=None)
def weighted_instance(seed: int, l: float = 1.0):
    return choose_weights(generate_instance(24, 8, 6, 1.0, seed, 0.6), l)


@functools.lru_cache(maxsize=None)
def planted_instance(seed: int, l: float = 1.0, margin: float = 0.0):
    return plant_optimum(generate_instance(24, 8, 6, 1.0, seed, 0.6), l, margin=margin, seed=seed)


@pytest.fixture
def inst():
    return weighted_instance(0)


@pytest.fixture
def planted():
    return planted_instance(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
