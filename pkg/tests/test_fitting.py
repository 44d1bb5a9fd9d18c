import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NU0, T_C, THETA, shot, spins
from weakseq.analysis import MomentTable, fit_moments
from weakseq.correlations import closed_form_moments, predicted_tables
from weakseq.errors import ContractError, FitError


def closed_table(model, pq=24, r=1.0, theta=THETA):
    cfg = shot(theta=theta)
    s2 = np.array([closed_form_moments(model, cfg, p, 1)[0] for p in range(1, pq + 1)])
    s3 = np.array([[closed_form_moments(model, cfg, p, q, r=r)[1] for q in range(1, pq + 1)]
                   for p in range(1, pq + 1)])
    return MomentTable.from_arrays(math.cos(theta), s2, s3, T_C)


def test_closed_forms_recovered():
    model = spins(1, 0.4, gamma=0.01 / T_C)
    fit = fit_moments(closed_table(model), THETA, nu0_hint=NU0)
    assert fit.r == pytest.approx(1.0, abs=1e-6)
    assert fit.nu0_fit == pytest.approx(NU0, rel=1e-9)
    assert fit.gamma_fit == pytest.approx(0.01 / T_C, rel=1e-6)
    assert fit.c0 == pytest.approx(0.04, rel=1e-9)
    assert fit.diagnostics["grad_norm"] <= 1e-8
    doc = json.loads(fit.to_json())
    assert doc["r"] == pytest.approx(fit.r)


def test_classical_part_gives_half():
    model = spins(1, 0.4, gamma=0.01 / T_C)
    mean, s2, s3 = predicted_tables(model, shot(), 24, 24, include_quantum=False)
    fit = fit_moments(MomentTable.from_arrays(mean, s2, s3, T_C), THETA)
    assert fit.r == pytest.approx(0.5, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 0.9), st.floats(0.0, 0.05), st.floats(0.1, 2.0), st.floats(40, 70))
def test_recovers_parameters(a_tau, g_tc, r, theta_deg):
    th = math.radians(theta_deg)
    model = spins(1, a_tau, gamma=g_tc / T_C)
    fit = fit_moments(closed_table(model, 24, r=r, theta=th), th, nu0_hint=NU0)
    assert fit.r == pytest.approx(r, rel=1e-6)
    assert fit.nu0_fit == pytest.approx(NU0, rel=1e-9)
    assert fit.gamma_fit * T_C == pytest.approx(g_tc, abs=1e-8)


def test_folded_frequency_without_hint():
    model = spins(1, 0.4, gamma=0.01 / T_C)
    fit = fit_moments(closed_table(model), THETA)
    w = abs(math.remainder(NU0 * T_C, 2 * math.pi))
    assert fit.nu0_fit == pytest.approx(w / T_C, rel=1e-9)


def test_errors():
    model = spins(1, 0.4)
    t = closed_table(model)
    with pytest.raises(ContractError):
        fit_moments(MomentTable(0.0, t.s2, None, T_C), THETA)
    with pytest.raises(ContractError):
        fit_moments(t, 0.0)
    with pytest.raises(FitError):
        fit_moments(MomentTable.from_arrays(0.0, np.zeros(8), np.zeros((8, 8)), T_C), THETA)


def test_r_std_from_cell_errors():
    model = spins(1, 0.4, gamma=0.01 / T_C)
    t = closed_table(model)
    t.err3 = np.full_like(t.s3, 1e-5)
    fit = fit_moments(t, THETA)
    assert 0 < fit.r_std < 0.1
