"""Sequential weak measurement of a sensor spin and the photon readout channel.

Every shot prepares the sensor in ``|x>``, couples it to the target through
``S_z B(t_j)`` for a time ``tau`` and measures ``sigma_theta``. For a
classical field the outcome probability is ``[1 + s cos(theta - B_j tau)]/2``.
For quantum spins the target state is carried across shots and updated by
the measurement back-action.

Trajectories are simulated in vectorized batches. Each trajectory draws from
its own random stream, derived from ``(seed, trajectory_index)``, so results
do not depend on batch size or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from weakseq import hilbert
from weakseq.errors import ConfigurationError, ConsistencyError, ContractError
from weakseq.targets import (
    QuantumSpins,
    TargetModel,
    dephasing_factors,
    initial_target_state,
    is_classical,
    quantum_field,
    sample_classical,
)

NORM_TOL = 1e-9


@dataclass(frozen=True)
class ShotConfig:
    """Per-shot protocol: readout angle, interrogation time, shot period."""

    theta: float
    tau: float
    t_c: float
    n_shots: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if not (0 < self.tau <= self.t_c):
            raise ConfigurationError(f"need 0 < tau <= t_c, got tau={self.tau}, t_c={self.t_c}")
        if int(self.n_shots) != self.n_shots or self.n_shots < 1:
            raise ConfigurationError(f"n_shots must be a positive integer, got {self.n_shots}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.t_c * np.arange(self.n_shots)


@dataclass(frozen=True)
class ReadoutModel:
    """Mean photon numbers (aggregated over readout repetitions) for each outcome."""

    n_plus: float
    n_minus: float

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ConfigurationError("photon means must be non-negative")

    @property
    def n_bar(self) -> float:
        return 0.5 * (self.n_plus + self.n_minus)

    @property
    def d(self) -> float:
        return 0.5 * (self.n_plus - self.n_minus)


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: np.ndarray = field(repr=False)
    config: ShotConfig
    photon_counts: np.ndarray | None = field(default=None, repr=False)
    t0: float = 0.0

    def __post_init__(self):
        out = np.asarray(self.outcomes)
        if out.size and not np.all(np.abs(out) == 1):
            raise ContractError("outcomes must be +1 or -1")
        if self.photon_counts is not None and len(self.photon_counts) != len(out):
            raise ContractError("photon_counts length does not match outcomes")

    def __len__(self):
        return len(self.outcomes)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.config.t_c * np.arange(len(self.outcomes))


def trajectory_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one trajectory, keyed by (seed, index, stream)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), int(stream)]))


# -- classical targets ------------------------------------------------------

def _classical_outcomes(model, cfg: ShotConfig, rng) -> np.ndarray:
    traj = sample_classical(model, cfg.times, rng)
    p_plus = 0.5 * (1.0 + np.cos(cfg.theta - traj.values * cfg.tau))
    return np.where(rng.random(cfg.n_shots) < p_plus, 1, -1).astype(np.int8)


def run_classical(model: TargetModel, cfg: ShotConfig, rng: np.random.Generator) -> MeasurementRecord:
    """One trajectory of outcomes for a classical field sampled once per shot."""
    if not is_classical(model):
        raise ContractError("run_classical needs a classical target")
    return MeasurementRecord(_classical_outcomes(model, cfg, rng), cfg, t0=cfg.t0)


# -- quantum targets --------------------------------------------------------

def sensor_ops(theta: float):
    """Sensor ``S_z`` and readout projectors ``(1 + s sigma_theta)/2`` for ``s = +1, -1``."""
    ix, iy, iz = hilbert.spin_half_ops()
    sig_theta = 2.0 * (ix * np.cos(theta) + iy * np.sin(theta))
    eye = np.eye(2)
    return iz, {s: 0.5 * (eye + s * sig_theta) for s in (1, -1)}


def joint_shot(rho_b: np.ndarray, field_op: np.ndarray, theta: float, tau: float):
    """One shot computed in the full target-sensor space.

    Returns ``{s: (p_s, rho_b_s)}`` with the Born probability and normalized
    conditional target state for each outcome ``s``.
    """
    sz, proj = sensor_ops(theta)
    d = rho_b.shape[0]
    x = np.full((2, 2), 0.5, dtype=complex)
    rho = hilbert.kron(rho_b, x)
    u = hilbert.herm_expm(hilbert.kron(field_op, sz), -tau)
    rho = u @ rho @ hilbert.dagger(u)
    out = {}
    for s, p_s in proj.items():
        big = hilbert.kron(np.eye(d), p_s)
        post = big @ rho @ big
        prob = float(np.real(np.trace(post)))
        reduced = np.trace(post.reshape(d, 2, d, 2), axis1=1, axis2=3)
        out[s] = (prob, reduced / prob if prob > 0 else reduced)
    total = out[1][0] + out[-1][0]
    if abs(total - 1.0) > NORM_TOL:
        raise ConsistencyError(f"outcome probabilities sum to {total}")
    return out


def shot_kraus(field_op: np.ndarray, theta: float, tau: float):
    """Target Kraus operators ``K_s = (U_+ + s e^{-i theta} U_-)/2``, ``U_pm = exp(-+ i tau B/2)``."""
    w, v = np.linalg.eigh(field_op)
    vh = hilbert.dagger(v)
    u_p = (v * np.exp(-0.5j * tau * w)) @ vh
    u_m = (v * np.exp(0.5j * tau * w)) @ vh
    ph = np.exp(-1j * theta)
    return {1: 0.5 * (u_p + ph * u_m), -1: 0.5 * (u_p - ph * u_m)}


def simulate_quantum(model: QuantumSpins, cfg: ShotConfig, uniforms: np.ndarray, *,
                     back_action: bool = True, check_every: int = 0) -> np.ndarray:
    """Vectorized quantum trajectories; ``uniforms`` has shape (n_traj, n_shots).

    Outcome ``+1`` is chosen when the uniform draw falls below ``p(+)``.
    ``back_action=False`` drops the conditional update: the target is reset
    to the maximally mixed state before every shot, so outcomes carry no
    memory. ``check_every`` > 0 validates all target states every that many
    shots.
    """
    if not isinstance(model, QuantumSpins):
        raise ContractError("simulate_quantum needs a QuantumSpins target")
    uniforms = np.atleast_2d(uniforms)
    n_traj, n_shots = uniforms.shape
    rho = np.broadcast_to(initial_target_state(model), (n_traj, model.dim, model.dim)).copy()
    out = np.empty((n_traj, n_shots), dtype=np.int8)
    deph = dephasing_factors(model, cfg.t_c)
    for j in range(n_shots):
        b = quantum_field(model, cfg.t0 + j * cfg.t_c)
        if not back_action:
            rho = np.broadcast_to(initial_target_state(model), rho.shape).copy()
        ks = shot_kraus(b, cfg.theta, cfg.tau)
        kp, km = ks[1], ks[-1]
        post_p = kp @ rho @ hilbert.dagger(kp)
        post_m = km @ rho @ hilbert.dagger(km)
        p_p = np.real(np.trace(post_p, axis1=1, axis2=2))
        p_m = np.real(np.trace(post_m, axis1=1, axis2=2))
        drift = np.max(np.abs(p_p + p_m - 1.0))
        if drift > NORM_TOL:
            raise ConsistencyError(f"shot {j}: probability normalization drift {drift:.2e}")
        plus = uniforms[:, j] < p_p
        out[:, j] = np.where(plus, 1, -1)
        rho = np.where(plus[:, None, None], post_p / p_p[:, None, None],
                       post_m / p_m[:, None, None])
        rho = 0.5 * (rho + hilbert.dagger(rho))
        if deph is not None:
            rho = rho * deph
        if check_every and (j + 1) % check_every == 0:
            hilbert.check_density(rho, herm_tol=1e-10, trace_tol=1e-10)
    return out


def run_quantum(model: QuantumSpins, cfg: ShotConfig, rng: np.random.Generator, *,
                back_action: bool = True) -> MeasurementRecord:
    """One quantum trajectory; target states are validated after every shot."""
    out = simulate_quantum(model, cfg, rng.random((1, cfg.n_shots)), back_action=back_action,
                           check_every=1)
    return MeasurementRecord(out[0], cfg, t0=cfg.t0)


def attach_photon_counts(record: MeasurementRecord, readout: ReadoutModel,
                         rng: np.random.Generator) -> MeasurementRecord:
    """Draw Poisson photon counts with mean ``n_plus`` or ``n_minus`` per outcome."""
    means = np.where(np.asarray(record.outcomes) > 0, readout.n_plus, readout.n_minus)
    return replace(record, photon_counts=rng.poisson(means))


# -- ensembles --------------------------------------------------------------

def _simulate_chunk(args):
    model, cfg, seed, indices, back_action = args
    if is_classical(model):
        return np.stack([_classical_outcomes(model, cfg, trajectory_rng(seed, i)) for i in indices])
    uniforms = np.stack([trajectory_rng(seed, i).random(cfg.n_shots) for i in indices])
    return simulate_quantum(model, cfg, uniforms, back_action=back_action)


def simulate_ensemble(model: TargetModel, cfg: ShotConfig, seed: int, n_traj: int, *,
                      start: int = 0, readout: ReadoutModel | None = None,
                      back_action: bool = True, workers: int = 1,
                      chunk: int = 2048) -> list[MeasurementRecord]:
    """Simulate trajectories ``start .. start + n_traj - 1`` for one seed.

    Trajectory ``i`` uses stream ``(seed, i)``; photon counts, when requested,
    use ``(seed, i, 1)``. Output is identical for any ``workers``/``chunk``.
    """
    if n_traj < 1:
        raise ConfigurationError("n_traj must be positive")
    idx = np.arange(start, start + n_traj)
    jobs = [(model, cfg, seed, idx[k:k + chunk], back_action) for k in range(0, n_traj, chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    else:
        parts = [_simulate_chunk(j) for j in jobs]
    outcomes = np.concatenate(parts, axis=0)
    records = []
    for i, row in zip(idx, outcomes):
        rec = MeasurementRecord(row, cfg, t0=cfg.t0)
        if readout is not None:
            rec = attach_photon_counts(rec, readout, trajectory_rng(seed, i, 1))
        records.append(rec)
    return records


def first_shot_mean(model: QuantumSpins, cfg: ShotConfig) -> float:
    """Exact ``<sigma_1>`` from the target maximally mixed state."""
    b = quantum_field(model, cfg.t0)
    ks = shot_kraus(b, cfg.theta, cfg.tau)
    rho = initial_target_state(model)
    return float(sum(s * np.real(np.trace(k @ rho @ hilbert.dagger(k))) for s, k in ks.items()))


def magic_angle() -> float:
    return math.acos(1.0 / math.sqrt(3.0))
