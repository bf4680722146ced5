import numpy as np
import pytest

from monofock.algebra import AlgebraSpec, CondExpSpec, StateSpec, random_density
from monofock.scenario import load_scenario
from monofock.words import Family, Member


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scalar_scenario():
    return load_scenario("scalar")


@pytest.fixture(scope="session")
def diagonal_scenario():
    return load_scenario("diagonal")


@pytest.fixture(scope="session")
def remark_scenario():
    return load_scenario("remark45")


def state_family(indices, rng, d=2, with_phi=True):
    A = AlgebraSpec.full(d)
    psis = {i: StateSpec(random_density(d, rng)) for i in indices}
    phis = {i: StateSpec(random_density(d, rng)) for i in indices} if with_phi else None
    return Family.from_states({i: A for i in indices}, psis, phis)


def diagonal_family(indices, d=2):
    A = AlgebraSpec.full(d)
    P = CondExpSpec.diagonal_compression(d, A)
    return Family(Member(i, A, P) for i in indices)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
