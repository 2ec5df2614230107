import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gradcert.fields import catalog_get

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

CATALOG_CASES = [("quadratic", {"dim": 2}), ("cos_example", {}), ("asinh_example", {}),
                 ("dimpled_quadratic", {"dim": 1}), ("dimpled_quadratic", {"dim": 2}),
                 ("staircase_radial", {"dim": 1}), ("staircase_radial", {"dim": 3})]


@pytest.fixture(scope="session")
def cos():
    return catalog_get("cos_example")


@pytest.fixture(scope="session")
def asinh():
    return catalog_get("asinh_example")


@pytest.fixture(scope="session")
def quad2():
    return catalog_get("quadratic", {"dim": 2})


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
