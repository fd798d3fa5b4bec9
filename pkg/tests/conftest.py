import warnings

import numpy as np
import pytest

from lapshrink import _core
from lapshrink.model import GroupedSample, group_moments


@pytest.fixture(params=sorted(_core.backends()))
def backend(request):
    """Each available kernel module in turn."""
    return _core.backends()[request.param]


def random_moments(seed, p=10, sizes=(30, 30, 30)):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((sum(sizes), p))
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return group_moments(GroupedSample(X, labels, len(sizes)))


def random_spd(rng, p, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    ev = np.exp(rng.uniform(0, np.log(cond), p))
    return (Q * ev) @ Q.T


@pytest.fixture
def quiet_convergence():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


ACCEPTANCE = []


def report(number: int, name: str, passed: bool, detail: str) -> str:
    """Record and print one acceptance line."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({name}): {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
