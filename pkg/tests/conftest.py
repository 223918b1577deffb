import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log(request):
    """Collects ``(number, name, passed, detail)`` lines printed at the end of the run."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(lines, key=lambda x: (x[0], x[1])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  [{number:2d}] {name}: {detail}")
