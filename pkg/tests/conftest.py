import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from projwalk import ensemble as E  # noqa: E402
from projwalk.projgeom import rotation  # noqa: E402


@pytest.fixture(scope="session")
def two_matrix():
    return E.two_matrix()


@pytest.fixture(scope="session")
def generic2():
    """A d = 2 ensemble with a non-atomic stationary measure (shear plus two rotations)."""
    return E.finite_support([[[1.5, 0.5], [0.0, 1 / 1.5]], rotation(1.0), rotation(-0.3)],
                            [0.4, 0.3, 0.3])


@pytest.fixture(scope="session")
def example1():
    return E.example_one()


@pytest.fixture(scope="session")
def rotations2():
    return E.finite_support([rotation(0.7), rotation(2.1)])


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Criterion number -> (passed, detail); printed in the terminal summary."""
    return request.config.__dict__.setdefault("_acceptance", {})


def pytest_terminal_summary(terminalreporter, config):
    log = getattr(config, "_acceptance", None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(log):
        ok, detail = log[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
