"""Sequential weak-measurement simulation and higher-order correlation analysis."""

__version__ = "0.1.0"
