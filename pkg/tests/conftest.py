import functools

import pytest
from hypothesis import HealthCheck, settings

from sharedsteer.simloop import Pulse, Scenario, condition_scenario, simulate

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def condition_log(vision, level, pulse=True):
    base = Scenario(pulse=Pulse() if pulse else None)
    return simulate(condition_scenario(base, vision, level), label=f"{vision}/{level}")


@pytest.fixture(scope="session")
def cond_log():
    return condition_log


# criterion number -> one-line verdict, filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
