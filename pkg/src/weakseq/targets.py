"""Target models: classical noise fields and uniformly coupled nuclear spins.

All rates and frequencies are angular (rad/s). Conversion from ordinary
frequencies happens only in the configuration loader.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from weakseq import hilbert
from weakseq.errors import ConfigurationError, ContractError

MAX_SPINS = 6


@dataclass(frozen=True)
class GaussianQuadrature:
    """Gaussian field ``X cos(nu0 t) + Y sin(nu0 t)``.

    ``X`` and ``Y`` are independent with variance ``sigma_q**2``; for
    ``gamma > 0`` each quadrature is an Ornstein-Uhlenbeck process with
    relaxation rate ``gamma``.
    """

    nu0: float
    sigma_q: float
    gamma: float = 0.0

    def __post_init__(self):
        _check_common(self.nu0, self.gamma)
        if not self.sigma_q > 0:
            raise ConfigurationError(f"sigma_q must be positive, got {self.sigma_q}")


@dataclass(frozen=True)
class RandomPhaseAC:
    """AC field ``b0 cos(nu0 t + phi)`` with a uniformly random phase per trajectory."""

    nu0: float
    b0: float
    gamma: float = 0.0

    def __post_init__(self):
        _check_common(self.nu0, self.gamma)
        if not self.b0 >= 0:
            raise ConfigurationError(f"b0 must be non-negative, got {self.b0}")


@dataclass(frozen=True)
class QuantumSpins:
    """``n_spins`` spin-1/2 nuclei coupled uniformly through ``a_perp``.

    If the raw hyperfine component ``a_x`` is given, ``a_perp`` defaults to
    ``2 * a_x / pi`` (the effective coupling under dynamical decoupling).
    ``gamma`` is the effective decay rate used by closed-form predictions;
    ``gamma_extra`` is an additional environmental dephasing rate applied by
    the trajectory simulator.
    """

    nu0: float
    n_spins: int = 1
    a_perp: float | None = None
    a_x: float | None = None
    gamma: float = 0.0
    gamma_extra: float = 0.0

    def __post_init__(self):
        _check_common(self.nu0, self.gamma)
        if not (isinstance(self.n_spins, (int, np.integer)) and 1 <= self.n_spins <= MAX_SPINS):
            raise ConfigurationError(f"n_spins must be an integer in 1..{MAX_SPINS}, got {self.n_spins}")
        if self.a_x is not None:
            expected = 2.0 * self.a_x / math.pi
            if self.a_perp is None:
                object.__setattr__(self, "a_perp", expected)
            elif abs(self.a_perp - expected) > 1e-12 * abs(self.a_x):
                raise ConfigurationError(
                    f"a_perp={self.a_perp} inconsistent with a_x={self.a_x} (expected {expected})")
        if self.a_perp is None or not self.a_perp >= 0:
            raise ConfigurationError(f"a_perp must be given and non-negative, got {self.a_perp}")
        if self.gamma_extra < 0:
            raise ConfigurationError(f"gamma_extra must be non-negative, got {self.gamma_extra}")

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    @cached_property
    def collective_ops(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Total spin operators ``(Jx, Jy, Jz)`` on the ``2**n_spins`` register."""
        ops = hilbert.spin_half_ops()
        n = self.n_spins
        return tuple(sum(hilbert.embed(o, k, n) for k in range(n)) for o in ops)

    @cached_property
    def _hamming(self) -> np.ndarray:
        idx = np.arange(self.dim)
        x = idx[:, None] ^ idx[None, :]
        return np.array([[bin(v).count("1") for v in row] for row in x], dtype=float)


TargetModel = Union[GaussianQuadrature, RandomPhaseAC, QuantumSpins]
CLASSICAL_TYPES = (GaussianQuadrature, RandomPhaseAC)


def _check_common(nu0, gamma):
    if not nu0 > 0:
        raise ConfigurationError(f"nu0 must be positive, got {nu0}")
    if not gamma >= 0:
        raise ConfigurationError(f"gamma must be non-negative, got {gamma}")


def is_classical(model: TargetModel) -> bool:
    return isinstance(model, CLASSICAL_TYPES)


def _require_quantum(model) -> QuantumSpins:
    if not isinstance(model, QuantumSpins):
        raise ContractError(f"operation requires a QuantumSpins target, got {type(model).__name__}")
    return model


@dataclass(frozen=True)
class ClassicalTrajectory:
    times: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ContractError("times and values must have equal length")


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ContractError("times must be one-dimensional")
    if np.any(np.diff(times) <= 0):
        raise ContractError("times must be strictly ascending")
    return times


def _ou_path(x0: float, times: np.ndarray, gamma: float, sigma: float, rng) -> np.ndarray:
    """Exact OU update between consecutive sample times, started in equilibrium."""
    x = np.empty(len(times))
    if len(times) == 0:
        return x
    x[0] = x0
    a = np.exp(-gamma * np.diff(times))
    kicks = rng.standard_normal(len(times) - 1) * sigma * np.sqrt(1.0 - a**2)
    for j in range(1, len(times)):
        x[j] = a[j - 1] * x[j - 1] + kicks[j - 1]
    return x


def sample_classical(model: TargetModel, times, rng: np.random.Generator) -> ClassicalTrajectory:
    """Draw one realization of a classical field at the given shot times."""
    if not is_classical(model):
        raise ContractError(f"sample_classical needs a classical target, got {type(model).__name__}")
    times = _check_times(times)
    phase = model.nu0 * times
    if isinstance(model, RandomPhaseAC):
        phi = rng.uniform(0.0, 2.0 * np.pi)
        return ClassicalTrajectory(times, model.b0 * np.cos(phase + phi))
    x0, y0 = rng.normal(0.0, model.sigma_q, size=2)
    if model.gamma == 0.0:
        x = np.full(len(times), x0)
        y = np.full(len(times), y0)
    else:
        x = _ou_path(x0, times, model.gamma, model.sigma_q, rng)
        y = _ou_path(y0, times, model.gamma, model.sigma_q, rng)
    return ClassicalTrajectory(times, x * np.cos(phase) + y * np.sin(phase))


def quantum_field(model: TargetModel, t: float) -> np.ndarray:
    """Interaction-picture field operator ``A_perp (Jx cos nu0 t - Jy sin nu0 t)``."""
    model = _require_quantum(model)
    jx, jy, _ = model.collective_ops
    ph = model.nu0 * t
    return model.a_perp * (jx * np.cos(ph) - jy * np.sin(ph))


def initial_target_state(model: TargetModel) -> np.ndarray:
    """Maximally mixed (infinite temperature) state of the nuclear register."""
    model = _require_quantum(model)
    return np.eye(model.dim, dtype=complex) / model.dim


def dephasing_factors(model: QuantumSpins, dt: float) -> np.ndarray | None:
    """Elementwise multiplier of the z-dephasing channel, or None if it is the identity."""
    if model.gamma_extra == 0.0 or dt == 0.0:
        return None
    return np.exp(-model.gamma_extra * dt) ** model._hamming


def apply_dephasing(rho: np.ndarray, model: TargetModel, dt: float, *, check: bool = True) -> np.ndarray:
    """Independent z-dephasing of every nuclear spin over ``dt``.

    Each spin's coherences decay by ``exp(-gamma_extra * dt)``; accepts a
    single density matrix or a stack of them.
    """
    model = _require_quantum(model)
    if dt < 0:
        raise ContractError(f"dt must be non-negative, got {dt}")
    if check:
        hilbert.check_density(rho, herm_tol=1e-10, trace_tol=1e-10)
    f = dephasing_factors(model, dt)
    return rho if f is None else rho * f
