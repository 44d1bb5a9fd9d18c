"""Analytic correlations of the target field and predicted measurement moments.

Superoperator words are applied earliest-first: the first letter acts on the
target density operator first (innermost). ``+`` is the half anticommutator
``(B A + A B)/2`` and ``-`` is the half commutator ``(B A - A B)/(2i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from weakseq.errors import ConsistencyError, ContractError
from weakseq.measurement import ShotConfig, joint_shot, shot_kraus
from weakseq.targets import (
    GaussianQuadrature,
    QuantumSpins,
    RandomPhaseAC,
    TargetModel,
    apply_dephasing,
    dephasing_factors,
    initial_target_state,
    quantum_field,
)

MAX_WORD = 8
IMAG_TOL = 1e-10


def _sign(s) -> int:
    if s in ("+", "plus", 1):
        return 1
    if s in ("-", "minus", -1):
        return -1
    raise ContractError(f"unknown superoperator sign {s!r}")


def superop_corr(model: TargetModel, word) -> float:
    """``Tr[B_K ... B_1 (rho_B)]`` for a time-ordered word of ``(t, sign)`` letters, at zero decay."""
    if not isinstance(model, QuantumSpins):
        raise ContractError("superop_corr needs a QuantumSpins target")
    word = [(float(t), _sign(s)) for t, s in word]
    if len(word) > MAX_WORD:
        raise ContractError(f"word length {len(word)} exceeds {MAX_WORD}")
    if any(b[0] < a[0] for a, b in zip(word, word[1:])):
        raise ContractError("word times must be non-decreasing")
    rho = initial_target_state(model)
    for t, s in word:
        b = quantum_field(model, t)
        rho = 0.5 * (b @ rho + rho @ b) if s > 0 else (b @ rho - rho @ b) / 2j
    val = np.trace(rho)
    if abs(val.imag) > IMAG_TOL:
        raise ConsistencyError(f"correlation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _decay(model, dt) -> float:
    return math.exp(-model.gamma * abs(dt))


def classical_corr2(model: TargetModel, t1: float, t2: float) -> float:
    """Symmetrized two-time field correlation, including the ``exp(-gamma |t12|)`` decay."""
    dt = t2 - t1
    cos = math.cos(model.nu0 * dt)
    if isinstance(model, GaussianQuadrature):
        return model.sigma_q**2 * cos * _decay(model, dt)
    if isinstance(model, RandomPhaseAC):
        return 0.5 * model.b0**2 * cos
    if isinstance(model, QuantumSpins):
        return superop_corr(model, [(min(t1, t2), 1), (max(t1, t2), 1)]) * _decay(model, dt)
    raise ContractError(f"unsupported target {type(model).__name__}")


def classical_corr4(model: TargetModel, t1: float, t2: float, t3: float, t4: float) -> float:
    """Four-time classical correlation for time-ordered ``t1 <= t2 <= t3 <= t4``.

    Gaussian noise pairs all ways, the random-phase AC field carries half the
    Gaussian pairing sum, and ``N`` uniform spins weight the two crossing
    pairings by ``(N - 1)/N``.
    """
    ts = (t1, t2, t3, t4)
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ContractError("classical_corr4 needs non-decreasing times")
    c = lambda a, b: classical_corr2(model, a, b)  # noqa: E731
    nested = c(t1, t2) * c(t3, t4)
    crossing = c(t1, t3) * c(t2, t4) + c(t1, t4) * c(t2, t3)
    if isinstance(model, GaussianQuadrature):
        return nested + crossing
    if isinstance(model, RandomPhaseAC):
        return 0.5 * (nested + crossing)
    w = (model.n_spins - 1) / model.n_spins
    return nested + w * crossing


def quantum_corr4(model: TargetModel, ti: float, tj: float, tk: float) -> float:
    """Quantum correlation behind the third moment: word ``(ti,+)(tj,-)(tj,-)(tk,+)``."""
    if not isinstance(model, QuantumSpins):
        return 0.0
    val = superop_corr(model, [(ti, 1), (tj, -1), (tj, -1), (tk, 1)])
    return val * _decay(model, tj - ti) * _decay(model, tk - tj)


@dataclass(frozen=True)
class MomentPrediction:
    order: int
    classical: float
    quantum: float

    @property
    def value(self) -> float:
        return self.classical + self.quantum


def moment_predict_times(model: TargetModel, cfg: ShotConfig, times, *,
                         include_quantum: bool = True) -> MomentPrediction:
    """Leading-order perturbative moment for shots at the given (sorted) times."""
    times = tuple(sorted(float(t) for t in times))
    order = len(times)
    th, tau = cfg.theta, cfg.tau
    c2 = lambda a, b: classical_corr2(model, a, b)  # noqa: E731
    c4 = lambda *t: classical_corr4(model, *t)  # noqa: E731
    if order == 1:
        (t,) = times
        return MomentPrediction(1, math.cos(th) * (1.0 - 0.5 * tau**2 * c2(t, t)), 0.0)
    if order == 2:
        return MomentPrediction(2, tau**2 * math.sin(th) ** 2 * c2(*times), 0.0)
    if order == 3:
        ti, tj, tk = times
        pref = -0.5 * tau**4 * math.cos(th) * math.sin(th) ** 2
        classical = (c4(ti, ti, tj, tk) - c2(ti, ti) * c2(tj, tk)
                     + c4(ti, tj, tj, tk) - c2(ti, tk) * c2(tj, tj)
                     + c4(ti, tj, tk, tk) - c2(ti, tj) * c2(tk, tk))
        quantum = quantum_corr4(model, ti, tj, tk) if include_quantum else 0.0
        return MomentPrediction(3, pref * classical, pref * quantum)
    raise ContractError(f"unsupported moment order {order}")


def moment_predict(model: TargetModel, cfg: ShotConfig, lags=(), *,
                   include_quantum: bool = True) -> MomentPrediction:
    """Moment for lag indices: ``()`` first, ``(p,)`` second, ``(p, q)`` third order.

    Shots sit at ``t0``, ``t0 + p t_c`` and ``t0 + (p + q) t_c``.
    """
    lags = tuple(int(x) for x in lags)
    if any(x < 0 for x in lags):
        raise ContractError("lags must be non-negative")
    times = [cfg.t0]
    for x in lags:
        times.append(times[-1] + x * cfg.t_c)
    return moment_predict_times(model, cfg, times, include_quantum=include_quantum)


def predicted_tables(model: TargetModel, cfg: ShotConfig, max_p: int, max_q: int, *,
                     include_quantum: bool = True):
    """Arrays ``(mean, s2[p-1], s3[p-1, q-1])`` of predicted moments."""
    mean = moment_predict(model, cfg, ()).value
    s2 = np.array([moment_predict(model, cfg, (p,)).value for p in range(1, max_p + 1)])
    s3 = np.array([[moment_predict(model, cfg, (p, q), include_quantum=include_quantum).value
                    for q in range(1, max_q + 1)] for p in range(1, max_p + 1)])
    return mean, s2, s3


def c0_amplitude(model: QuantumSpins, cfg: ShotConfig) -> float:
    """Second-moment amplitude ``tau^2 N A_perp^2 / 4``."""
    return cfg.tau**2 * model.n_spins * model.a_perp**2 / 4.0


def closed_form_moments(model: QuantumSpins, cfg: ShotConfig, p: int, q: int, *, r: float = 1.0):
    """Closed-form ``(S2(p), S3(p, q))`` for a single spin-1/2 target."""
    if not isinstance(model, QuantumSpins) or model.n_spins != 1:
        raise ContractError("closed_form_moments applies to a single quantum spin")
    c0 = c0_amplitude(model, cfg)
    w, g, th = model.nu0 * cfg.t_c, model.gamma * cfg.t_c, cfg.theta
    s2 = c0 * math.sin(th) ** 2 * math.cos(w * p) * math.exp(-g * p)
    s3 = (-r * c0**2 * math.sin(th) ** 2 * math.cos(th)
          * math.sin(w * p) * math.sin(w * q) * math.exp(-g * (p + q)))
    return s2, s3


# -- exact oracles ----------------------------------------------------------

@dataclass(frozen=True)
class ExactMoments:
    """Exact joint moments of the first ``n`` shots.

    ``second[i, j]`` and ``third[i, j, k]`` are central moments; entries with
    repeated indices are included for completeness.
    """

    mean: np.ndarray
    second: np.ndarray
    third: np.ndarray
    branch_probs: dict


def enumerate_exact_moments(model: QuantumSpins, cfg: ShotConfig, n_shots: int | None = None,
                            *, max_shots: int = 4, max_spins: int = 2) -> ExactMoments:
    """Exhaustive enumeration of all outcome branches in the joint target-sensor space."""
    if not isinstance(model, QuantumSpins):
        raise ContractError("enumeration needs a QuantumSpins target")
    n = cfg.n_shots if n_shots is None else n_shots
    if n > max_shots or model.n_spins > max_spins:
        raise ContractError(f"oracle limited to {max_shots} shots and {max_spins} spins")
    branches = {(): (1.0, initial_target_state(model))}
    for j in range(n):
        b = quantum_field(model, cfg.t0 + j * cfg.t_c)
        nxt = {}
        for seq, (prob, rho) in branches.items():
            for s, (p_s, post) in joint_shot(rho, b, cfg.theta, cfg.tau).items():
                if p_s > 0:
                    post = apply_dephasing(post, model, cfg.t_c, check=False)
                nxt[seq + (s,)] = (prob * p_s, post)
        branches = nxt
    seqs = np.array(list(branches), dtype=float).reshape(len(branches), n)
    probs = np.array([v[0] for v in branches.values()])
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise ConsistencyError(f"branch probabilities sum to {total}")
    mean = probs @ seqs
    d = seqs - mean
    second = np.einsum("b,bi,bj->ij", probs, d, d)
    third = np.einsum("b,bi,bj,bk->ijk", probs, d, d, d)
    return ExactMoments(mean, second, third, {k: v[0] for k, v in branches.items()})


def _classicalized_weights(field_op, theta, tau):
    """Outcome weights acting elementwise in the eigenbasis of the field.

    Replaces the field in ``[1 + s cos(theta - B tau)]/2`` by its
    anticommutator superoperator, whose eigenvalues on ``|m><n|`` are
    ``(b_m + b_n)/2``. The resulting update heralds polarization but carries
    no commutator terms, so it produces only the classical correlations.
    The weight matrices are not positive semidefinite at finite ``tau``, so
    this is a linear map on operators, not a quantum channel; it is only used
    for exact moments, never for sampling.
    """
    w, v = np.linalg.eigh(field_op)
    bplus = 0.5 * (w[:, None] + w[None, :])
    c = np.cos(theta - tau * bplus)
    return v, {1: 0.5 * (1.0 + c), -1: 0.5 * (1.0 - c)}


def _lab_frame_step(model: QuantumSpins, cfg: ShotConfig, classical_only: bool):
    """Shot maps at ``t0`` followed by free precession over ``t_c``.

    In the rotating frame of the nuclear Zeeman term every shot uses the same
    coupling, so the moment sequence is stationary.
    """
    b0 = quantum_field(model, cfg.t0)
    b1 = quantum_field(model, cfg.t0 + cfg.t_c)
    _, _, jz = model.collective_ops
    # rotation taking the frame of shot j to that of shot j + 1: b1 = R^dag b0 R
    w, v = np.linalg.eigh(jz)
    rot = None
    for sgn in (1.0, -1.0):
        cand = (v * np.exp(1j * sgn * model.nu0 * cfg.t_c * w)) @ v.conj().T
        if np.allclose(cand.conj().T @ b0 @ cand, b1, atol=1e-12 * max(1.0, model.a_perp)):
            rot = cand
            break
    if rot is None:
        raise ConsistencyError("could not identify the free-precession rotation")
    deph = dephasing_factors(model, cfg.t_c)
    rot_h = rot.conj().T
    if not classical_only:
        ks = shot_kraus(b0, cfg.theta, cfg.tau)

        def branch(x, s):
            k = ks[s]
            return k @ x @ k.conj().T
    else:
        vb, g = _classicalized_weights(b0, cfg.theta, cfg.tau)
        vbh = vb.conj().T

        def branch(x, s):
            return vb @ (g[s] * (vbh @ x @ vb)) @ vbh

    def finish(x):
        x = rot_h @ x @ rot
        return x if deph is None else x * deph

    def uncond(x):
        return finish(branch(x, 1) + branch(x, -1))

    def signed(x):
        return finish(branch(x, 1) - branch(x, -1))

    return uncond, signed


def exact_lag_moments(model: QuantumSpins, cfg: ShotConfig, max_p: int, max_q: int, *,
                      classical_only: bool = False):
    """Exact stationary ``(mean, S2[p-1], S3[p-1, q-1])`` of the trajectory model.

    Uses the Kraus maps directly (no sampling, no perturbative expansion).
    ``classical_only`` swaps them for the commutator-free linear maps, which
    keep the classical correlations and drop the quantum ones.
    """
    if not isinstance(model, QuantumSpins):
        raise ContractError("exact_lag_moments needs a QuantumSpins target")
    uncond, signed = _lab_frame_step(model, cfg, classical_only)
    tr = lambda x: np.real(np.trace(x, axis1=-2, axis2=-1))  # noqa: E731
    rho0 = initial_target_state(model)
    mu = float(tr(signed(rho0)))
    n_lag = max_p + max_q
    raw2 = np.empty(n_lag)
    ys = []
    z = signed(rho0)
    for p in range(1, n_lag + 1):
        y = signed(z)
        raw2[p - 1] = tr(y)
        if p <= max_p:
            ys.append(y)
        z = uncond(z)
    y = np.stack(ys)
    raw3 = np.empty((max_p, max_q))
    for q in range(1, max_q + 1):
        raw3[:, q - 1] = tr(signed(y))
        y = uncond(y)
    s2 = raw2 - mu**2
    p_idx = np.arange(1, max_p + 1)[:, None]
    q_idx = np.arange(1, max_q + 1)[None, :]
    s3 = (raw3 - mu * (raw2[p_idx - 1] + raw2[q_idx - 1] + raw2[p_idx + q_idx - 1])
          + 2.0 * mu**3)
    return mu, s2[:max_p], s3
