import numpy as np
import pytest

from bmapbulk.analysis import solve
from bmapbulk.bmap import validate_bmap
from bmapbulk.config import example
from bmapbulk.service import ServicePolicy, make_exponential, make_phase_type


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the summary prints them all."""
    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def _solved(name):
    spec = example(name)
    return solve(spec.model, spec.policy, nmax=spec.solver.nmax, tail_tol=spec.solver.tail_tol)


@pytest.fixture(scope="session")
def spec1():
    return example("example1")


@pytest.fixture(scope="session")
def spec2():
    return example("example2")


@pytest.fixture(scope="session")
def sol1():
    return _solved("example1")


@pytest.fixture(scope="session")
def sol2():
    return _solved("example2")


@pytest.fixture(scope="session")
def sol_mm1():
    return _solved("mm1")


def poisson_bulk(lam=1.0, a=2, b=4, mu=0.8):
    """Poisson arrivals with exponential bulk service at rate ``mu`` for every
    batch size."""
    model = validate_bmap([[[-lam]], [[lam]]])
    policy = ServicePolicy(a, b, {r: make_exponential(mu) for r in range(a, b + 1)})
    return model, policy


def two_phase_bmap():
    """Small correlated BMAP with batches of size 1 and 2."""
    D0 = np.array([[-2.0, 0.5], [0.2, -0.6]])
    D1 = np.array([[1.0, 0.2], [0.1, 0.2]])
    D2 = np.array([[0.1, 0.2], [0.0, 0.1]])
    return validate_bmap([D0, D1, D2])


def erlang2(mean):
    rate = 2.0 / mean
    return make_phase_type([1.0, 0.0], [[-rate, rate], [0.0, -rate]])
