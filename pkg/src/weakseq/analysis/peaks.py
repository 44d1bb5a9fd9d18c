"""Fingerprint peaks of the third-moment spectrum and the spin count.

Twelve lattice points ``(a nu0, b nu0)`` carry all third-moment peaks of the
single-tone models. Each point gets two numbers:

* ``heights``: the interpolated local maximum of the spectral magnitude near
  the point.
* ``amplitudes``: the complex amplitude of that lattice component, from a
  linear least-squares fit of the lag grid. Each component decays as
  ``exp(-gamma t_c (alpha p + beta q))``, where ``(alpha, beta)`` is fixed by
  the pairing that produces it.

Leakage between neighbouring peaks and unequal decay widths bias
``heights``; ``amplitudes`` are free of both, so the spin count uses them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from weakseq.analysis.spectrum import SpectrumGrid, fold
from weakseq.errors import ContractError, NoiseFloorError

LATTICE = (
    (0, 1), (0, -1), (1, 0), (-1, 0),
    (1, 1), (-1, -1), (1, -1), (-1, 1),
    (1, 2), (-1, -2), (2, 1), (-2, -1),
)
REFERENCE = ((1, -1), (-1, 1))
DIAGONAL = ((1, 1), (-1, -1))
OUTER = tuple(pt for pt in LATTICE if pt not in REFERENCE + DIAGONAL)

RESIDUAL_TOL = 0.15
PRESENT_FRACTION = 0.05


def decay_exponents(point) -> tuple[int, int]:
    a, b = (abs(v) for v in point)
    if (a, b) in ((2, 1), (0, 1)):
        return 2, 1
    if (a, b) in ((1, 2), (1, 0)):
        return 1, 2
    return 1, 1


def lattice_design(shape, omega: float, g: float) -> np.ndarray:
    """Columns ``exp(-g(alpha p + beta q)) exp(i omega (a p + b q))`` over the lag grid."""
    mp, mq = shape
    p = np.arange(1, mp + 1)[:, None]
    q = np.arange(1, mq + 1)[None, :]
    cols = []
    for pt in LATTICE:
        al, be = decay_exponents(pt)
        cols.append((np.exp(-g * (al * p + be * q) + 1j * omega * (pt[0] * p + pt[1] * q))).ravel())
    return np.stack(cols, axis=1)


def _interp_peak(mag: np.ndarray, i: int, j: int) -> float:
    """Parabolic refinement of a local maximum over its 3x3 neighbourhood."""
    n1, n2 = mag.shape
    y0 = mag[i, j]
    out = y0
    for lo, hi in ((mag[(i - 1) % n1, j], mag[(i + 1) % n1, j]),
                   (mag[i, (j - 1) % n2], mag[i, (j + 1) % n2])):
        den = lo - 2 * y0 + hi
        if den < 0:
            delta = 0.5 * (lo - hi) / den
            out += -0.25 * (lo - hi) * delta
    return float(out)


def _local_height(grid: SpectrumGrid, w1: float, w2: float, radius_native: int = 2) -> float:
    mag = grid.magnitude
    n1, n2 = mag.shape
    zp = grid.zero_pad_factor
    c1 = int(round((fold(w1) + np.pi) / (2 * np.pi) * n1)) % n1
    c2 = int(round((fold(w2) + np.pi) / (2 * np.pi) * n2)) % n2
    r = radius_native * zp
    ii = (c1 + np.arange(-r, r + 1)) % n1
    jj = (c2 + np.arange(-r, r + 1)) % n2
    sub = mag[np.ix_(ii, jj)]
    a, b = np.unravel_index(np.argmax(sub), sub.shape)
    return _interp_peak(mag, ii[a], jj[b])


@dataclass
class PeakReport:
    heights: dict
    amplitudes: dict
    eta: float | None
    eta_err: float
    eta_signed: float | None
    eta_heights: float | None
    n_inferred: int | str
    noise_floor: float
    spectral_floor: float
    nu0: float
    floor_factor: float = 3.0
    extras: dict = field(default_factory=dict)

    def relative(self, which: str = "amplitudes") -> dict:
        vals = {k: abs(v) for k, v in getattr(self, which).items()}
        top = max(vals.values())
        return {k: (v / top if top > 0 else 0.0) for k, v in vals.items()}

    def present(self, fraction: float = PRESENT_FRACTION, which: str = "amplitudes") -> list:
        """Lattice points whose peak exceeds ``fraction`` of the largest one.

        For amplitudes the peak must also clear ``floor_factor`` times the
        noise floor, so estimation noise is not counted as a peak.
        """
        rel = self.relative(which)
        keep = [k for k, v in rel.items() if v >= fraction]
        if which == "amplitudes":
            keep = [k for k in keep if abs(self.amplitudes[k]) > self.floor_factor * self.noise_floor]
        return keep

    def to_json(self) -> str:
        key = lambda pt: f"({pt[0]},{pt[1]})"  # noqa: E731
        doc = {
            "nu0_rad_s": self.nu0,
            "heights": {key(k): v for k, v in self.heights.items()},
            "amplitudes": {key(k): {"abs": abs(v), "re": v.real, "im": v.imag}
                           for k, v in self.amplitudes.items()},
            "present": [key(k) for k in self.present()],
            "n_peaks": len(self.present()),
            "eta": self.eta,
            "eta_err": self.eta_err,
            "eta_signed": self.eta_signed,
            "eta_from_heights": self.eta_heights,
            "n_inferred": self.n_inferred,
            "noise_floor": self.noise_floor,
            "spectral_floor": self.spectral_floor,
            **self.extras,
        }
        return json.dumps(doc, indent=2)


def _eta(amps: np.ndarray, idx_outer, idx_ref) -> float:
    return float(np.mean(np.abs(amps[idx_outer])) / np.mean(np.abs(amps[idx_ref])))


def infer_spin_count(eta: float, eta_err: float) -> int | str:
    """``round(1/(1 - eta))`` when it is unambiguous, else ``"indeterminate"``.

    Requires a rounding residual of at most 0.15 and ``eta_err`` below half
    the gap between ``1 - 1/n`` and ``1 - 1/(n + 1)``.
    """
    if eta is None or not (0.0 <= eta < 1.0):
        return "indeterminate"
    x = 1.0 / (1.0 - eta)
    n = int(round(x))
    if n < 1 or abs(x - n) > RESIDUAL_TOL:
        return "indeterminate"
    if eta_err > 0.5 * (1.0 / n - 1.0 / (n + 1)):
        return "indeterminate"
    return n


def peak_report(grid: SpectrumGrid, nu0_expected: float, *, gamma: float = 0.0,
                floor_factor: float = 3.0) -> PeakReport:
    """Heights, lattice amplitudes, ``eta`` and inferred spin number.

    ``nu0_expected`` (rad/s) is folded into the Nyquist band. ``gamma`` (1/s)
    sets the component decay used for the amplitude fit. Raises
    ``NoiseFloorError`` when the reference peaks at ``+-(nu0, -nu0)`` are not
    above ``floor_factor`` times the amplitude noise floor.
    """
    table = grid.table
    if table is None:
        raise ContractError("spectrum grid has no source table")
    t_c = grid.t_c
    omega = float(fold(nu0_expected * t_c))
    g = gamma * t_c

    heights = {pt: _local_height(grid, pt[0] * omega, pt[1] * omega) for pt in LATTICE}

    design = lattice_design(table.s3.shape, omega, g)
    pinv = np.linalg.pinv(design)
    amps = pinv @ table.s3.ravel()
    idx = {pt: k for k, pt in enumerate(LATTICE)}
    i_out = [idx[pt] for pt in OUTER]
    i_ref = [idx[pt] for pt in REFERENCE]

    if table.n_boot:
        boot = table.boot3.reshape(table.n_boot, -1)
        ok = np.all(np.isfinite(boot), axis=1)
        bamps = boot[ok] @ pinv.T
        floor = float(np.sqrt(np.mean(np.var(bamps, axis=0, ddof=1))))
    else:
        bamps = None
        resid = table.s3.ravel() - np.real(design @ amps)
        sig = np.sqrt(np.mean(resid**2))
        floor = float(sig * np.sqrt(np.mean(np.sum(np.abs(pinv) ** 2, axis=1))))

    mag = grid.magnitude
    spectral_floor = float(np.median(mag))
    ref_level = float(np.mean(np.abs(amps[i_ref])))
    if not ref_level > floor_factor * floor:
        raise NoiseFloorError(
            f"reference peaks ({ref_level:.3e}) below {floor_factor} x noise floor ({floor:.3e})")

    eta = _eta(amps, i_out, i_ref)
    if bamps is not None:
        reps = np.mean(np.abs(bamps[:, i_out]), axis=1) / np.mean(np.abs(bamps[:, i_ref]), axis=1)
        eta_err = float(np.std(reps, ddof=1))
    else:
        eta_err = 0.0
    ref_re = np.mean(np.real(amps[i_ref]))
    eta_signed = float(np.mean(np.real(amps[i_out])) / ref_re) if ref_re != 0 else None
    h_ref = np.mean([heights[pt] for pt in REFERENCE])
    eta_h = float(np.mean([heights[pt] for pt in OUTER]) / h_ref) if h_ref > 0 else None

    return PeakReport(
        heights=heights,
        amplitudes={pt: complex(amps[k]) for pt, k in idx.items()},
        eta=eta, eta_err=eta_err, eta_signed=eta_signed, eta_heights=eta_h,
        n_inferred=infer_spin_count(eta, eta_err),
        noise_floor=floor, spectral_floor=spectral_floor,
        nu0=abs(omega) / t_c,
        floor_factor=floor_factor,
        extras={"gamma_used": gamma, "omega_per_shot": omega},
    )


def lattice_frequencies(nu0: float, t_c: float) -> dict:
    """Folded lattice positions (rad/s) for display."""
    omega = float(fold(nu0 * t_c))
    return {pt: (float(fold(pt[0] * omega)) / t_c, float(fold(pt[1] * omega)) / t_c)
            for pt in LATTICE}

