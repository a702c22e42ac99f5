import math

import numpy as np
import pytest

from rkhs_ame.estimator import Dataset


def simulate(n, rng, p=0, rho_eps_v=0.5, rho_zw=0.8, h0=lambda z: z**2 / math.sqrt(2)):
    """Small independent re-implementation of the simulation design for tests."""
    a = math.sqrt(rho_eps_v**2 / (1 - rho_eps_v**2))
    b = math.sqrt(rho_zw**2 / (1 - rho_zw**2))
    W, V, U = rng.standard_normal((3, n))
    Z = (b * W + V) / math.sqrt(1 + b**2)
    eps = (a * V + U) / math.sqrt(1 + a**2)
    X = rng.standard_normal((n, p))
    Y = h0(Z) + X.sum(axis=1) + eps
    return Dataset(Y, Z, X, W)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    return simulate(40, rng)


@pytest.fixture
def small_data_x(rng):
    return simulate(40, rng, p=2)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, passed, detail, status=None):
        status = status or ("PASS" if passed else "FAIL")
        line = f"ACCEPTANCE {number:>2}: {status}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
