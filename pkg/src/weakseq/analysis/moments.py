"""Lagged second and third moments of outcome records, with block-bootstrap errors.

Moments are computed per contiguous block of the index ``u``. A third-moment
cell ``(p, q)`` collects ``x[u - p] * x[u] * x[u + q]``, which is
``delta_sigma_i delta_sigma_{i+p} delta_sigma_{i+p+q}`` with ``i = u - p``.
Block sums are formed with batched matrix products. Bootstrap replicates
then reuse them by resampling whole blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from weakseq.errors import ContractError, InsufficientDataError
from weakseq.measurement import MeasurementRecord, ReadoutModel

DEFAULT_BOOT = 200
_GROUP = 64


@dataclass
class MomentTable:
    """Lag-indexed moments. ``s2[p - 1]`` and ``s3[p - 1, q - 1]`` hold lags ``p, q >= 1``."""

    mean_sigma: float
    s2: np.ndarray
    s3: np.ndarray
    t_c: float
    count2: np.ndarray | None = None
    count3: np.ndarray | None = None
    err2: np.ndarray | None = None
    err3: np.ndarray | None = None
    mean_err: float | None = None
    boot_mean: np.ndarray | None = field(default=None, repr=False)
    boot2: np.ndarray | None = field(default=None, repr=False)
    boot3: np.ndarray | None = field(default=None, repr=False)
    extras: dict = field(default_factory=dict)

    @property
    def max_p(self) -> int:
        return self.s3.shape[0]

    @property
    def max_q(self) -> int:
        return self.s3.shape[1]

    @classmethod
    def from_arrays(cls, mean, s2, s3, t_c) -> "MomentTable":
        """Wrap noiseless (e.g. predicted) moment arrays."""
        s2 = np.asarray(s2, dtype=float)
        s3 = np.asarray(s3, dtype=float)
        if s3.ndim != 2 or len(s2) < s3.shape[0]:
            raise ContractError("s2 must cover every p of the s3 grid")
        return cls(float(mean), s2, s3, float(t_c))

    def replicate(self, b: int) -> "MomentTable":
        """Bootstrap replicate ``b`` as a table of its own."""
        return MomentTable(float(self.boot_mean[b]), self.boot2[b], self.boot3[b], self.t_c)

    @property
    def n_boot(self) -> int:
        return 0 if self.boot3 is None else self.boot3.shape[0]

    def scaled(self, mean_map, k2: float, k3: float) -> "MomentTable":
        """Table with moments rescaled (used by photon-count reconstruction)."""
        opt = lambda a, k: None if a is None else a * k  # noqa: E731
        return MomentTable(
            mean_map(self.mean_sigma), self.s2 * k2, self.s3 * k3, self.t_c,
            self.count2, self.count3, opt(self.err2, abs(k2)), opt(self.err3, abs(k3)),
            None, None if self.boot_mean is None else mean_map(self.boot_mean),
            opt(self.boot2, k2), opt(self.boot3, k3), dict(self.extras))


def _as_series(records) -> tuple[list[np.ndarray], float | None]:
    """Normalize the accepted record inputs to a list of 1D float arrays."""
    t_c = None
    if isinstance(records, MeasurementRecord):
        records = [records]
    if isinstance(records, np.ndarray):
        arr = np.atleast_2d(records).astype(float)
        return list(arr), None
    series = []
    for r in records:
        if isinstance(r, MeasurementRecord):
            t_c = r.config.t_c
            series.append(np.asarray(r.outcomes, dtype=float))
        else:
            series.append(np.asarray(r, dtype=float))
    return series, t_c


def _chunks(x: np.ndarray, block: int, max_p: int, horizon: int):
    """Windows of ``x`` holding each block of ``u`` plus its lag halo, zero padded."""
    n = len(x)
    nc = -(-n // block)
    xe = np.concatenate([np.zeros(max_p), x, np.zeros(nc * block - n + horizon)])
    win = sliding_window_view(xe, block + max_p + horizon)[::block]
    starts = np.arange(nc) * block
    return win, starts


def _block_sums(x, n, block, max_p, max_q):
    """Per-block sums and counts for lagged products of one centered series."""
    horizon = max(max_p, max_q)
    win, starts = _chunks(x, block, max_p, horizon)
    nc = len(starts)
    p = np.arange(1, max_p + 1)
    q = np.arange(1, max_q + 1)
    sum2 = np.empty((nc, max_p))
    sum3 = np.empty((nc, max_p, max_q))
    lin = np.empty(nc)
    for g in range(0, nc, _GROUP):
        w = win[g:g + _GROUP]
        base = w[:, max_p:max_p + block]
        lagged = sliding_window_view(w[:, :max_p + block], block, axis=1)[:, :max_p][:, ::-1]
        ahead3 = sliding_window_view(w[:, max_p + 1:max_p + block + max_q], max_q, axis=1)
        ahead2 = sliding_window_view(w[:, max_p + 1:max_p + block + max_p], max_p, axis=1)
        y = lagged * base[:, None, :]
        sum3[g:g + _GROUP] = np.matmul(y, np.ascontiguousarray(ahead3))
        sum2[g:g + _GROUP] = np.matmul(base[:, None, :], np.ascontiguousarray(ahead2))[:, 0]
        lin[g:g + _GROUP] = base.sum(axis=1)
    s = starts[:, None]
    e = np.minimum(starts + block, n)[:, None]
    cnt2 = np.clip(np.minimum(n - p[None, :], e) - s, 0, None)
    lo = np.maximum(p[None, :, None], s[:, :, None])
    hi = np.minimum(n - q[None, None, :], e[:, :, None])
    cnt3 = np.clip(hi - lo, 0, None)
    cnt1 = (e - s)[:, 0]
    return lin, cnt1, sum2, cnt2.astype(float), sum3, cnt3.astype(float)


def _estimate(series, max_p, max_q, t_c, block, n_boot, seed) -> MomentTable:
    if max_p < 1 or max_q < 1:
        raise ContractError("max_p and max_q must be at least 1")
    total = sum(len(s) for s in series)
    if total < max_p + max_q + 1:
        raise InsufficientDataError(f"{total} shots cannot fill lags up to p+q={max_p + max_q}")
    if block is None:
        block = 4 * (max_p + max_q)
    raw_sum = sum(float(np.sum(s)) for s in series)
    mean = raw_sum / total

    parts = [_block_sums(s - mean, len(s), block, max_p, max_q) for s in series]
    lin, c1, s2, c2, s3, c3 = (np.concatenate([pt[k] for pt in parts]) for k in range(6))
    lin = lin + mean * c1
    count2, count3 = c2.sum(0), c3.sum(0)
    if np.any(count2 == 0) or np.any(count3 == 0):
        raise InsufficientDataError("some lag cells have no samples; records too short")
    table = MomentTable(mean, s2.sum(0) / count2, s3.sum(0) / count3, t_c, count2, count3)

    nb = len(lin)
    if n_boot and nb > 1:
        rng = np.random.default_rng(seed)
        w = rng.multinomial(nb, np.full(nb, 1.0 / nb), size=n_boot).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            table.boot_mean = (w @ lin) / (w @ c1)
            table.boot2 = (w @ s2) / (w @ c2)
            table.boot3 = ((w @ s3.reshape(nb, -1)) / (w @ c3.reshape(nb, -1))).reshape(
                n_boot, max_p, max_q)
        table.mean_err = float(np.nanstd(table.boot_mean, ddof=1))
        table.err2 = np.nanstd(table.boot2, axis=0, ddof=1)
        table.err3 = np.nanstd(table.boot3, axis=0, ddof=1)
    table.extras.update(n_blocks=nb, block=block, n_shots=total)
    return table


def estimate_moments(records, max_p: int, max_q: int, *, t_c: float | None = None,
                     block: int | None = None, n_boot: int = DEFAULT_BOOT,
                     seed: int = 0) -> MomentTable:
    """Pooled lagged moments of one or more outcome records.

    ``records`` may be a ``MeasurementRecord``, a list of records or 1D
    arrays, or a 2D array with one trajectory per row. Fluctuations are
    taken about the pooled mean. Standard errors come from a bootstrap over
    non-overlapping blocks of ``block`` shots (default ``4 (max_p + max_q)``).
    """
    series, rec_tc = _as_series(records)
    return _estimate(series, max_p, max_q, t_c or rec_tc or 1.0, block, n_boot, seed)


def estimate_moments_from_photons(records, readout: ReadoutModel, max_p: int, max_q: int, *,
                                  t_c: float | None = None, block: int | None = None,
                                  n_boot: int = DEFAULT_BOOT, seed: int = 0) -> MomentTable:
    """Spin moments reconstructed from photon counts.

    Count fluctuations at distinct shots relate to spin fluctuations by the
    contrast ``d``: second moments scale by ``d**2`` and third by ``d**3``.
    """
    d = readout.d
    if d == 0:
        raise ContractError("photon contrast d = 0 makes the reconstruction singular")
    if isinstance(records, MeasurementRecord):
        records = [records]
    series, rec_tc = [], None
    for r in records:
        if isinstance(r, MeasurementRecord):
            if r.photon_counts is None:
                raise ContractError("record has no photon counts")
            rec_tc = r.config.t_c
            series.append(np.asarray(r.photon_counts, dtype=float))
        else:
            series.append(np.asarray(r, dtype=float))
    counts = _estimate(series, max_p, max_q, t_c or rec_tc or 1.0, block, n_boot, seed)
    table = counts.scaled(lambda n: (n - readout.n_bar) / d, 1.0 / d**2, 1.0 / d**3)
    table.mean_err = None if counts.mean_err is None else counts.mean_err / abs(d)
    table.extras["mean_counts"] = counts.mean_sigma
    table.extras["mean_counts_err"] = counts.mean_err
    return table
