import pytest

from delaywave import models, waves
from delaywave.models import BZParams, FisherParams

# criterion lines collected by test_acceptance.py and echoed in the summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


FISHER = FisherParams(c=2.5, tau1=0.004, tau2=0.004, theta=0.5, k=2)
BZ = BZParams(c=3.0, b=2.0, r=0.25, tau1=0.01 / 3, tau2=0.01 / 3, k=2)


@pytest.fixture(scope="session")
def fisher_wave():
    """Converged Fisher wave at c=2.5, r1=r2=0.01 from the neutral-rate upper solution."""
    model, upper, lower = models.fisher(FISHER, upper_rate="neutral")
    phi, report = waves.iterate(model, upper, lower, tol=1e-6)
    return model, upper, lower, phi, report


@pytest.fixture(scope="session")
def bz_wave():
    model, upper, lower = models.bz(BZ, upper="neutral")
    phi, report = waves.iterate(model, upper, lower, tol=1e-6)
    return model, upper, lower, phi, report
