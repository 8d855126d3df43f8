"""Resonance fluorescence of a driven two-level emitter.

Closed-form Mollow spectra and photon correlations, a master-equation
oracle that checks them, instrument models, least-squares estimators and
a quantum-jump photon stream simulator with a time-tag correlator.

Internal units are nanoseconds and rad/ns.  Public constructors take
picoseconds and cyclic GHz and convert at the boundary.
"""

from .errors import (
    CascadeAmbiguity,
    ConfigError,
    DegenerateData,
    FitError,
    MollowError,
    NoSidebands,
    UnderdampedDomain,
)
from .params import BlochState, DriveParams, EmitterParams
from .traces import CorrelationKind, CorrelationTrace, SpectrumMode, SpectrumTrace

__version__ = "0.1.0"

__all__ = [
    "BlochState",
    "CascadeAmbiguity",
    "ConfigError",
    "CorrelationKind",
    "CorrelationTrace",
    "DegenerateData",
    "DriveParams",
    "EmitterParams",
    "FitError",
    "MollowError",
    "NoSidebands",
    "SpectrumMode",
    "SpectrumTrace",
    "UnderdampedDomain",
]
