"""Estimation, spectra, peak fingerprints and fits for outcome records."""

from weakseq.analysis.fitting import FitResult, fit_moments
from weakseq.analysis.moments import MomentTable, estimate_moments, estimate_moments_from_photons
from weakseq.analysis.peaks import (
    LATTICE,
    PeakReport,
    infer_spin_count,
    lattice_frequencies,
    peak_report,
)
from weakseq.analysis.spectrum import SpectrumGrid, fold, spectrum2d

__all__ = [
    "FitResult", "fit_moments", "MomentTable", "estimate_moments",
    "estimate_moments_from_photons", "LATTICE", "PeakReport", "infer_spin_count",
    "lattice_frequencies", "peak_report", "SpectrumGrid", "fold", "spectrum2d",
]
