"""Two-stage fit of the single-spin moment model and the quantumness factor ``r``.

Stage 1 fits ``S2(p) = c0 sin^2(theta) cos(w p) exp(-g p)`` by
Levenberg-Marquardt, restarted around the DFT peak of ``S2``. Stage 2 holds
``(c0, w, g)`` fixed and solves for the amplitude ``r`` in
``S3(p, q) = -r c0^2 sin^2(theta) cos(theta) sin(w p) sin(w q) exp(-g (p + q))``
by linear least squares. Here ``w = nu0 t_c`` and ``g = gamma t_c``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from weakseq.analysis.moments import MomentTable
from weakseq.errors import ContractError, FitError

MAX_ITER = 500
GRAD_TOL = 1e-8


@dataclass
class FitResult:
    c0: float
    nu0_fit: float
    gamma_fit: float
    r: float
    r_std: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=float)


def _s2_model(x, p, s2t):
    c0, w, g = x
    return c0 * s2t * np.cos(w * p) * np.exp(-g * p)


def _s2_jac(x, p, s2t):
    c0, w, g = x
    e = np.exp(-g * p)
    cw, sw = np.cos(w * p), np.sin(w * p)
    return np.stack([s2t * cw * e, -c0 * s2t * p * sw * e, -p * c0 * s2t * cw * e], axis=1)


def _dft_peak(s2: np.ndarray, pad: int = 8) -> float:
    n = pad * (len(s2) + 1)
    buf = np.zeros(n)
    buf[1:len(s2) + 1] = s2
    k = int(np.argmax(np.abs(np.fft.rfft(buf))[1:])) + 1
    return 2 * np.pi * k / n


def _lm(fun, jac, x0):
    return least_squares(fun, x0, jac=jac, method="lm", max_nfev=MAX_ITER,
                         xtol=1e-15, ftol=1e-15, gtol=1e-15)


def _polish(fun, jac, x):
    """Gauss-Newton steps to finish an LM run that stopped on ``xtol``/``ftol``."""
    grad_of = lambda x: float(np.linalg.norm(jac(x).T @ fun(x)))  # noqa: E731
    grad = grad_of(x)
    for _ in range(10):
        if grad <= 1e-3 * GRAD_TOL:
            break
        trial = x + np.linalg.lstsq(jac(x), -fun(x), rcond=None)[0]
        g_trial = grad_of(trial)
        if not (g_trial < grad and np.sum(fun(trial) ** 2) <= np.sum(fun(x) ** 2) * (1 + 1e-12)):
            break
        x, grad = trial, g_trial
    return x, grad


def _stage1(s2, sin2t, starts):
    """LM fit of ``(c0, w, g)``; ``g >= 0`` is enforced by refitting at ``g = 0``
    when the free optimum has negative decay."""
    p = np.arange(1, len(s2) + 1, dtype=float)
    scale = np.max(np.abs(s2))
    if not scale > 0:
        raise FitError("second moment is identically zero")
    y = s2 / scale
    fun = lambda x: _s2_model(x, p, sin2t) - y  # noqa: E731
    jac = lambda x: _s2_jac(x, p, sin2t)  # noqa: E731
    best = None
    for x0 in starts:
        res = _lm(fun, jac, np.array([x0[0] / scale, x0[1], x0[2]]))
        if best is None or res.cost < best.cost:
            best = res
    x, grad = _polish(fun, jac, best.x)
    bounded = x[2] < 0
    if bounded:
        fun0 = lambda z: fun(np.array([z[0], z[1], 0.0]))  # noqa: E731
        jac0 = lambda z: jac(np.array([z[0], z[1], 0.0]))[:, :2]  # noqa: E731
        best = _lm(fun0, jac0, x[:2])
        z, grad = _polish(fun0, jac0, best.x)
        x = np.array([z[0], z[1], 0.0])
    diag = {"cost": float(0.5 * np.sum(fun(x) ** 2) * scale**2), "grad_norm": grad,
            "nfev": int(best.nfev), "status": int(best.status), "message": best.message,
            "gamma_at_bound": bool(bounded)}
    if not grad <= GRAD_TOL:
        raise FitError(f"stage-1 fit did not converge (gradient {grad:.2e})", diag)
    c0, w, g = x
    w = abs(math.remainder(w, 2 * math.pi))
    return np.array([c0 * scale, w, g]), diag


def _stage2(s3, c0, w, g, theta):
    mp, mq = s3.shape
    p = np.arange(1, mp + 1)[:, None]
    q = np.arange(1, mq + 1)[None, :]
    f = (-c0**2 * math.sin(theta) ** 2 * math.cos(theta)
         * np.sin(w * p) * np.sin(w * q) * np.exp(-g * (p + q)))
    den = float(np.sum(f * f))
    if den == 0:
        raise FitError("third-moment template vanishes; r is undetermined")
    return float(np.sum(f * s3) / den), f, den


def _unfold(w: float, t_c: float, hint: float | None) -> float:
    if hint is None:
        return w / t_c
    k = round(hint * t_c / (2 * np.pi))
    cands = [s * w + 2 * np.pi * (k + dk) for s in (1, -1) for dk in (-1, 0, 1)]
    return min(cands, key=lambda c: abs(c - hint * t_c)) / t_c


def fit_moments(table: MomentTable, theta: float, *, n_starts: int = 2,
                nu0_hint: float | None = None) -> FitResult:
    """Fit ``(c0, nu0, gamma)`` to ``S2`` and then ``r`` to ``S3``.

    Sampling only fixes ``nu0`` modulo ``2 pi / t_c`` and up to sign. Without
    ``nu0_hint`` (rad/s) the folded value in ``[0, pi / t_c]`` is reported;
    with it, the alias nearest the hint. ``r_std`` comes from
    refitting the table's bootstrap replicates, or from the cell standard
    errors when no replicates are attached.
    """
    if table.s2 is None or table.s3 is None:
        raise ContractError("table must hold both second and third moments")
    sin2t = math.sin(theta) ** 2
    if sin2t == 0:
        raise ContractError("theta = 0 or pi leaves no second-moment signal")
    s2 = np.asarray(table.s2[: table.max_p], dtype=float)
    w_peak = _dft_peak(s2)
    bin_w = 2 * np.pi / (len(s2) + 1)
    amp0 = np.max(np.abs(s2)) / sin2t
    starts = []
    for k in range(-n_starts, n_starts + 1):
        w0 = min(max(w_peak + k * bin_w, 1e-3), np.pi - 1e-3)
        for g0 in (1.0 / len(s2), 0.1 / len(s2)):
            starts.append((amp0, w0, g0))
    (c0, w, g), diag = _stage1(s2, sin2t, starts)
    r, f, den = _stage2(table.s3, c0, w, g, theta)

    r_reps = []
    if table.n_boot:
        for b in range(table.n_boot):
            rep = table.replicate(b)
            if not (np.all(np.isfinite(rep.s2)) and np.all(np.isfinite(rep.s3))):
                continue
            try:
                (c0b, wb, gb), _ = _stage1(rep.s2[: table.max_p], sin2t, [(c0, w, g)])
                r_reps.append(_stage2(rep.s3, c0b, wb, gb, theta)[0])
            except FitError:
                continue
    if len(r_reps) > 1:
        r_std = float(np.std(r_reps, ddof=1))
        diag["n_boot_fits"] = len(r_reps)
    elif table.err3 is not None:
        r_std = float(np.sqrt(np.sum((f * table.err3) ** 2)) / den)
    else:
        resid = table.s3 - r * f
        r_std = float(np.sqrt(np.mean(resid**2) / den))
    r_std = max(r_std, np.finfo(float).tiny)
    diag["omega_per_shot"] = float(w)
    return FitResult(c0=float(c0), nu0_fit=float(_unfold(w, table.t_c, nu0_hint)),
                     gamma_fit=float(g / table.t_c), r=r, r_std=r_std, diagnostics=diag)
