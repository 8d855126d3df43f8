"""Sampled correlation and spectrum curves."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class CorrelationKind(str, enum.Enum):
    G1_INCOH = "g1_incoh"
    G2 = "g2"
    CROSS = "cross"
    VISIBILITY = "visibility"


class SpectrumMode(str, enum.Enum):
    LITERAL = "literal"
    STANDARD = "standard"
    ORACLE = "oracle"


@dataclass(frozen=True)
class CorrelationTrace:
    """Correlation values on a delay grid.

    ``taus`` are in ns and strictly increasing.
    """

    taus: np.ndarray
    values: np.ndarray
    kind: CorrelationKind

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.ndim != 1 or taus.shape != values.shape:
            raise ValueError("taus and values must be 1-d arrays of equal length")
        if taus.size > 1 and np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("correlation values must be finite")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", CorrelationKind(self.kind))

    @property
    def taus_ps(self) -> np.ndarray:
        return self.taus * 1e3

    def is_uniform(self, rtol: float = 1e-6) -> bool:
        if self.taus.size < 3:
            return True
        d = np.diff(self.taus)
        return bool(np.all(np.abs(d - d.mean()) <= rtol * abs(d.mean())))

    def with_values(self, values) -> CorrelationTrace:
        return CorrelationTrace(self.taus, values, self.kind)


@dataclass(frozen=True)
class SpectrumTrace:
    """Incoherent emission spectrum against offset from the laser.

    ``offsets`` are angular frequencies in rad/ns and ``intensities`` a
    spectral density per rad/ns.  Integrating over the offset gives the
    incoherently scattered excited-state population.
    """

    offsets: np.ndarray
    intensities: np.ndarray
    mode: SpectrumMode
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        intensities = np.asarray(self.intensities, dtype=float)
        if offsets.shape != intensities.shape or offsets.ndim != 1:
            raise ValueError("offsets and intensities must be 1-d and equal length")
        if not np.all(np.isfinite(intensities)):
            raise ValueError("spectrum intensities must be finite")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "intensities", intensities)
        object.__setattr__(self, "mode", SpectrumMode(self.mode))

    @property
    def offsets_ghz(self) -> np.ndarray:
        return self.offsets / (2 * np.pi)

    @property
    def ok(self) -> bool:
        return not self.warnings

    def total_power(self) -> float:
        return float(np.trapezoid(self.intensities, self.offsets))
