import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NU0, T_C, spins
from weakseq import hilbert
from weakseq.errors import ConfigurationError, ContractError
from weakseq.targets import (
    GaussianQuadrature,
    QuantumSpins,
    RandomPhaseAC,
    apply_dephasing,
    initial_target_state,
    quantum_field,
    sample_classical,
)

IX, IY, IZ = hilbert.spin_half_ops()


def test_model_validation():
    with pytest.raises(ConfigurationError):
        GaussianQuadrature(-1.0, 1.0)
    with pytest.raises(ConfigurationError):
        GaussianQuadrature(NU0, 0.0)
    with pytest.raises(ConfigurationError):
        RandomPhaseAC(NU0, 1.0, gamma=-1.0)
    with pytest.raises(ConfigurationError):
        QuantumSpins(NU0, n_spins=7, a_perp=1.0)
    with pytest.raises(ConfigurationError):
        QuantumSpins(NU0, a_perp=1.0, a_x=5.0)
    with pytest.raises(ConfigurationError):
        QuantumSpins(NU0)


def test_a_perp_from_a_x():
    assert QuantumSpins(NU0, a_x=math.pi).a_perp == pytest.approx(2.0)


def test_ac_zero_amplitude_is_zero(rng):
    tr = sample_classical(RandomPhaseAC(NU0, 0.0), np.arange(5) * T_C, rng)
    assert np.all(tr.values == 0)


def test_sample_classical_rejects_bad_input(rng):
    with pytest.raises(ContractError):
        sample_classical(spins(), [0.0, 1.0], rng)
    with pytest.raises(ContractError):
        sample_classical(GaussianQuadrature(NU0, 1.0), [0.0, 2.0, 1.0], rng)


def test_gaussian_covariance(rng):
    # oracle: X cos + Y sin with independent quadratures has covariance sigma^2 cos(nu0 t_ij)
    model = GaussianQuadrature(NU0, 2.0)
    times = np.array([0.0, 0.3e-6, 1.1e-6])
    n = 100_000
    b = np.stack([sample_classical(model, times, rng).values for _ in range(n)])
    for i, j in ((0, 1), (0, 2), (1, 2)):
        prod = b[:, i] * b[:, j]
        expect = 4.0 * math.cos(NU0 * (times[j] - times[i]))
        assert abs(prod.mean() - expect) <= 3 * prod.std(ddof=1) / math.sqrt(n)


def test_gaussian_ou_stationary_variance(rng):
    model = GaussianQuadrature(NU0, 1.0, gamma=1.0 / T_C)
    times = np.arange(50) * T_C
    b = np.stack([sample_classical(model, times, rng).values for _ in range(4000)])
    np.testing.assert_allclose(b.var(axis=0).mean(), 1.0, rtol=0.05)


def test_quantum_field_examples():
    m = spins(1, 0.4)
    np.testing.assert_allclose(quantum_field(m, 0.0), m.a_perp * IX, atol=1e-9)
    with pytest.raises(ContractError):
        quantum_field(GaussianQuadrature(NU0, 1.0), 0.0)


@given(st.floats(0, 1e-3), st.integers(1, 3))
def test_quantum_field_properties(t, n):
    m = spins(n, 0.4)
    b = quantum_field(m, t)
    assert abs(np.trace(b @ initial_target_state(m))) < 1e-9 * m.a_perp
    if n == 1:
        np.testing.assert_allclose(b @ b, m.a_perp**2 / 4 * np.eye(2), atol=1e-6)


def test_initial_state():
    np.testing.assert_array_equal(initial_target_state(spins(1)), np.eye(2) / 2)
    np.testing.assert_array_equal(initial_target_state(spins(2)), np.eye(4) / 4)
    for n in (1, 3):
        rho = initial_target_state(spins(n))
        assert np.trace(rho @ rho).real == pytest.approx(2.0**-n)


def test_dephasing_examples():
    plus_x = np.full((2, 2), 0.5, dtype=complex)
    m0 = spins(1)
    np.testing.assert_array_equal(apply_dephasing(plus_x, m0, 1e-3), plus_x)
    m = spins(1, gamma_extra=1e4)
    np.testing.assert_array_equal(apply_dephasing(plus_x, m, 0.0), plus_x)
    out = apply_dephasing(plus_x, m, math.log(2) / 1e4)
    assert 2 * np.trace(out @ IX).real == pytest.approx(0.5)
    assert np.trace(out @ IZ).real == pytest.approx(0.0)
    with pytest.raises(ContractError):
        apply_dephasing(np.eye(2), m, 1.0)


@settings(max_examples=30)
@given(st.floats(0, 1e-3))
def test_dephasing_keeps_density(dt):
    m = spins(2, gamma_extra=3e3)
    v = np.arange(1, 5) + 1j * np.array([0, 1, -1, 2])
    rho = np.outer(v, v.conj())
    rho /= np.trace(rho)
    assert hilbert.is_density(apply_dephasing(rho, m, dt), herm_tol=1e-10, trace_tol=1e-10)
