import numpy as np
import pytest

from meshlessbif import make_problem, newton_solve

# lines collected by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bratu1d():
    return make_problem("bratu1d", seed=0)


@pytest.fixture(scope="session")
def bratu1d_p3(bratu1d):
    st = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 3.0)
    assert st.converged
    return st
