"""Toolkit for the energy-fraction correction to the measured muon
magnetic anomaly: relativistic angular-momentum bookkeeping, spin
precession, polarized-decay Monte Carlo, window-averaged corrections,
and synthetic wiggle fits."""

__version__ = "0.1.0"

from .constants import ConstantsTable, coefficient_C, default_constants, load_constants

__all__ = [
    "ConstantsTable",
    "coefficient_C",
    "default_constants",
    "load_constants",
    "__version__",
]
