import numpy as np
import pytest

PAPER_W = np.array([[0.67, 0.07, 0.15], [0.90, 0.42, 0.09], [0.72, 0.91, 0.51]])
PAPER_T = np.array([[0, 1, 0], [1, 1, 1], [0, 0, 1]])


def random_nonsingular(rng, n, max_cond=1e4):
    while True:
        W = rng.standard_normal((n, n))
        if np.linalg.cond(W) < max_cond:
            return W


@pytest.fixture
def paper_W():
    return PAPER_W.copy()


@pytest.fixture
def paper_T():
    return PAPER_T.copy()


@pytest.fixture
def paper_design():
    from reluobs.input_design import design_input, sample_B

    tpl = sample_B(PAPER_T, seed=7)
    return tpl, design_input(PAPER_W, tpl)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
