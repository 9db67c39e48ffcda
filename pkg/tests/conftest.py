import numpy as np
import pytest

from dpbounds.priors import Categorical, ConditionalPriorTable

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mode_heavy_table(n_values: int = 5, mode_mass: float = 0.6) -> ConditionalPriorTable:
    """Conditional prior over one 5-valued attribute given three 5-valued ones.

    Puts ``mode_mass`` on the value equal to the first known attribute and
    spreads the rest evenly.
    """
    rest = (1.0 - mode_mass) / (n_values - 1)
    table = {}
    for a in range(n_values):
        probs = np.full(n_values, rest)
        probs[a] = mode_mass
        dist = Categorical(range(n_values), probs)
        for b in range(n_values):
            for c in range(n_values):
                table[(a, b, c)] = dist
    return ConditionalPriorTable(table)
