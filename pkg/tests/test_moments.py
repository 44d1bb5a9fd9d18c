import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T_C, THETA, shot, spins
from weakseq.analysis import (
    estimate_moments,
    estimate_moments_from_photons,
    fit_moments,
    spectrum2d,
)
from weakseq.correlations import closed_form_moments
from weakseq.errors import ContractError, InsufficientDataError
from weakseq.measurement import MeasurementRecord, ReadoutModel, simulate_ensemble


def brute_force(records, max_p, max_q):
    """Direct loop over every shot triple, pooled about the global mean."""
    mean = np.concatenate(records).mean()
    s2 = np.zeros(max_p)
    n2 = np.zeros(max_p)
    s3 = np.zeros((max_p, max_q))
    n3 = np.zeros((max_p, max_q))
    for r in records:
        d = r - mean
        for i in range(len(d)):
            for p in range(1, max_p + 1):
                if i + p < len(d):
                    s2[p - 1] += d[i] * d[i + p]
                    n2[p - 1] += 1
                for q in range(1, max_q + 1):
                    if i + p + q < len(d):
                        s3[p - 1, q - 1] += d[i] * d[i + p] * d[i + p + q]
                        n3[p - 1, q - 1] += 1
    return mean, s2 / n2, s3 / n3


records_st = st.lists(
    st.lists(st.sampled_from([-1.0, 1.0]), min_size=12, max_size=40).map(np.array),
    min_size=1, max_size=3)


@settings(max_examples=40, deadline=None)
@given(records_st, st.integers(1, 4), st.integers(1, 4), st.integers(1, 9))
def test_matches_brute_force(records, max_p, max_q, block):
    table = estimate_moments(records, max_p, max_q, block=block, n_boot=0)
    mean, s2, s3 = brute_force(records, max_p, max_q)
    assert table.mean_sigma == pytest.approx(mean, abs=1e-12)
    np.testing.assert_allclose(table.s2[:max_p], s2, atol=1e-12)
    np.testing.assert_allclose(table.s3, s3, atol=1e-12)


def test_constant_record():
    table = estimate_moments(np.ones(500), 3, 3, n_boot=20)
    assert table.mean_sigma == 1.0
    assert np.all(table.s2 == 0) and np.all(table.s3 == 0)


def test_fair_coin_is_uncorrelated():
    # 20 cells at 3 sigma fail by chance ~5% of the time, so the per-cell bound
    # is Bonferroni-corrected and the joint statement is a chi-square test
    x = np.where(np.random.default_rng(31).random((250, 4000)) < 0.5, 1, -1)
    table = estimate_moments(x, 4, 4)
    np.testing.assert_allclose(table.err3, 1e-3, rtol=0.15)  # sd of d^3 is 1
    z = np.concatenate([table.s2[:4] / table.err2[:4], (table.s3 / table.err3).ravel()])
    assert np.max(np.abs(z)) <= 3.5
    assert np.sum(z**2) <= 45.3  # chi-square(20) at p = 0.001


def test_sign_flip():
    x = simulate_ensemble(spins(1, 0.4), shot(2000), seed=4, n_traj=20)
    x = np.stack([r.outcomes for r in x])
    a = estimate_moments(x, 6, 6, n_boot=0, t_c=T_C)
    b = estimate_moments(-x, 6, 6, n_boot=0, t_c=T_C)
    np.testing.assert_allclose(b.s2, a.s2, atol=1e-15)
    np.testing.assert_allclose(b.s3, -a.s3, atol=1e-15)
    np.testing.assert_allclose(spectrum2d(b).magnitude, spectrum2d(a).magnitude, atol=1e-12)


def test_errors():
    with pytest.raises(InsufficientDataError):
        estimate_moments(np.ones(5), 3, 3)
    with pytest.raises(ContractError):
        estimate_moments(np.ones(50), 0, 3)
    with pytest.raises(InsufficientDataError):
        estimate_moments([np.ones(4)] * 10, 3, 3)


def test_single_spin_matches_closed_form():
    m = spins(1, 0.2)
    cfg = shot(4000)
    recs = simulate_ensemble(m, cfg, seed=21, n_traj=1000)
    table = estimate_moments(recs, 5, 5, seed=1)
    fit = fit_moments(table, THETA)
    model = spins(1, 0.2, gamma=fit.gamma_fit)
    for p in range(1, 6):
        for q in range(1, 6):
            s3 = closed_form_moments(model, cfg, p, q)[1]
            assert abs(table.s3[p - 1, q - 1] - s3) <= 3 * table.err3[p - 1, q - 1]


def test_noiseless_photon_channel_is_exact():
    ro = ReadoutModel(5.0, 2.0)
    recs = simulate_ensemble(spins(1, 0.4), shot(3000), seed=3, n_traj=10)
    noiseless = [MeasurementRecord(r.outcomes, r.config,
                                   photon_counts=ro.n_bar + ro.d * r.outcomes.astype(float))
                 for r in recs]
    a = estimate_moments(recs, 4, 4, seed=2)
    b = estimate_moments_from_photons(noiseless, ro, 4, 4, seed=2)
    assert b.mean_sigma == pytest.approx(a.mean_sigma, abs=1e-12)
    np.testing.assert_allclose(b.s2, a.s2, atol=1e-12)
    np.testing.assert_allclose(b.s3, a.s3, atol=1e-12)
    np.testing.assert_allclose(b.err3, a.err3, rtol=1e-9)


def test_photon_reconstruction_errors():
    rec = MeasurementRecord(np.ones(100, dtype=np.int8), shot(100))
    with pytest.raises(ContractError):
        estimate_moments_from_photons([rec], ReadoutModel(1, 1), 2, 2)
    with pytest.raises(ContractError):
        estimate_moments_from_photons([rec], ReadoutModel(3, 1), 2, 2)


def test_photon_first_moment():
    ro = ReadoutModel(3.0, 1.0)
    recs = simulate_ensemble(spins(1, 0.4), shot(4000), seed=5, n_traj=100, readout=ro)
    t = estimate_moments_from_photons(recs, ro, 2, 2)
    expect = ro.n_bar + ro.d * math.cos(THETA) * math.cos(0.2)
    assert abs(t.extras["mean_counts"] - expect) <= 3 * t.extras["mean_counts_err"]
