import numpy as np
import pytest

from compnet.games import CournotGame, QuadraticGame, WganGame
from compnet.topology import paper_cournot_matrices, paper_wgan_matrices, perron_weights

PAPER_COSTS = [5, 3, 3, 5, 3, 3]


@pytest.fixture(scope="session")
def cournot_mats():
    return paper_cournot_matrices()


@pytest.fixture(scope="session")
def cournot_weights(cournot_mats):
    A1, A2, _, _ = cournot_mats
    return perron_weights(A1, A2)


def make_cournot(weights, noise=0.1, oracle="team"):
    return CournotGame(PAPER_COSTS, 5.0, 3.0, noise, 3, weights, oracle=oracle)


@pytest.fixture
def cournot(cournot_weights):
    return make_cournot(cournot_weights)


@pytest.fixture
def cournot_quiet(cournot_weights):
    return make_cournot(cournot_weights, noise=0.0)


@pytest.fixture(scope="session")
def wgan_mats():
    return paper_wgan_matrices()


@pytest.fixture(scope="session")
def wgan(wgan_mats):
    A1, A2, _, _ = wgan_mats
    return WganGame(6, 4, perron_weights(A1, A2))


@pytest.fixture
def zero_sum_quadratic(cournot_weights):
    rng = np.random.default_rng(11)
    return QuadraticGame.random(3, 3, 2, 2, 0.5, cournot_weights, rng, zero_sum=True, noise_std=0.1)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion (printed in the terminal summary)."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
