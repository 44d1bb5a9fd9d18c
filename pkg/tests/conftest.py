"""Shared constants, small model factories and the acceptance summary hook."""

import math

import numpy as np
import pytest

from weakseq.measurement import ShotConfig, magic_angle
from weakseq.targets import GaussianQuadrature, QuantumSpins, RandomPhaseAC

NU0 = 2 * math.pi * 2.6795e6
T_C = (40 + 10 / 64) / 2.6795e6
TAU = 1e-6
THETA = magic_angle()

# one "PASS"/"FAIL" line per acceptance criterion, printed at session end
ACCEPTANCE_LINES = {}


def shot(n_shots=1, theta=THETA, tau=TAU, t_c=T_C, t0=0.0):
    return ShotConfig(theta=theta, tau=tau, t_c=t_c, n_shots=n_shots, t0=t0)


def spins(n=1, a_tau=0.4, gamma=0.0, **kw):
    return QuantumSpins(NU0, n_spins=n, a_perp=a_tau / TAU, gamma=gamma, **kw)


def gaussian(s_tau=0.3, gamma=0.0):
    return GaussianQuadrature(NU0, s_tau / TAU, gamma)


def ac(b_tau=0.5, gamma=0.0):
    return RandomPhaseAC(NU0, b_tau / TAU, gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
