import sys

import numpy as np
import pytest

from splatcodec.gaussian import GaussianSet


def random_set(rng, n, scale=(0.01, 0.1), mu=(0.0, 1.0)):
    return GaussianSet(
        means=rng.uniform(mu[0], mu[1], (n, 2)),
        thetas=rng.uniform(0.0, np.pi, n),
        scales=rng.uniform(scale[0], scale[1], (n, 2)),
        colors=rng.uniform(0.0, 1.0, (n, 3)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
