"""2D discrete Fourier spectrum of the third-moment lag grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from weakseq.analysis.moments import MomentTable
from weakseq.errors import ContractError


@dataclass
class SpectrumGrid:
    """Complex spectrum on fftshifted axes (rad/s, folded into the Nyquist band).

    Axis 0 is the frequency conjugate to ``p`` (``t_ij``), axis 1 the one
    conjugate to ``q`` (``t_jk``).
    """

    values: np.ndarray
    nu_ij: np.ndarray
    nu_jk: np.ndarray
    t_c: float
    zero_pad_factor: int
    table: MomentTable | None = field(default=None, repr=False)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def native_shape(self) -> tuple[int, int]:
        return self.table.s3.shape if self.table is not None else tuple(
            n // self.zero_pad_factor for n in self.values.shape)


def spectrum2d(table: MomentTable, zero_pad_factor: int = 4) -> SpectrumGrid:
    """Rectangular-window 2D DFT of ``S(p, q)``, zero padded by ``zero_pad_factor``.

    Cell ``(p, q)`` is placed at array index ``(p, q)`` so that spectral
    phases refer to zero lag; magnitudes do not depend on this choice.
    """
    s3 = np.asarray(table.s3)
    if s3.ndim != 2 or s3.size == 0 or not np.all(np.isfinite(s3)):
        raise ContractError("third-moment grid must be a complete finite rectangle")
    if zero_pad_factor < 1:
        raise ContractError("zero_pad_factor must be >= 1")
    mp, mq = s3.shape
    n1, n2 = zero_pad_factor * (mp + 1), zero_pad_factor * (mq + 1)
    buf = np.zeros((n1, n2))
    buf[1:mp + 1, 1:mq + 1] = s3
    vals = np.fft.fftshift(np.fft.fft2(buf))
    ax = lambda n: 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(n, d=table.t_c))  # noqa: E731
    return SpectrumGrid(vals, ax(n1), ax(n2), table.t_c, zero_pad_factor, table)


def fold(omega):
    """Fold an angle per shot into ``[-pi, pi)``."""
    return (np.asarray(omega) + np.pi) % (2 * np.pi) - np.pi
