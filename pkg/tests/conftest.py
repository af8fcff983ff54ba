import numpy as np
import pytest

from lindchord import oracle as orc
from lindchord.systems import damped_oscillator

from .support import BEAT_GAMMAS, BEAT_TIMES, beating_system


@pytest.fixture(scope="session")
def beating_oracle_runs():
    """Oracle density matrices for the beating pair, keyed by gamma; one entry per time in BEAT_TIMES."""
    trunc = orc.FockTruncation.uniform(2, 16)
    rho0 = orc.fock_density(trunc, (0, 1))
    runs = {g: orc.integrate(beating_system(g), trunc, rho0, BEAT_TIMES) for g in BEAT_GAMMAS}
    return trunc, runs


@pytest.fixture(scope="session")
def damped_system():
    return damped_oscillator(1.0, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .support import ACCEPTANCE_RESULTS

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {number:2d} {title}: {detail}")
