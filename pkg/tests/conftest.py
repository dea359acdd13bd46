import numpy as np
import pytest

from netdesign.network import from_edge_list, gen_erdos_renyi

ACCEPTANCE_LINES = []


@pytest.fixture
def path3():
    return from_edge_list(3, [(0, 1), (1, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_nets(count, n_range=(3, 15), seed=0):
    """Small ER graphs of mixed size and density."""
    rng = np.random.default_rng(seed)
    nets = []
    for _ in range(count):
        n = int(rng.integers(*n_range))
        nets.append(gen_erdos_renyi(n, float(rng.uniform(0.05, 0.7)), rng))
    return nets


def random_assignment(n, rng):
    while True:
        z = rng.integers(0, 2, n)
        if 0 < z.sum() < n:
            return z


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
