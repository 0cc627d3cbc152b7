import functools

import pytest

from llab.surfaces import make_builtin


@functools.lru_cache(maxsize=None)
def builtin(name, params=()):
    return make_builtin(name, params)


@pytest.fixture(scope="session")
def sphere():
    return builtin("round-sphere")


@pytest.fixture(scope="session")
def flat():
    return builtin("flat-torus")


@pytest.fixture(scope="session")
def bourgain():
    return builtin("bourgain", (0.1,))


@pytest.fixture(scope="session")
def two_bump():
    return builtin("two-bump-sphere")


@pytest.fixture(scope="session")
def liouville():
    return builtin("generic-liouville")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
