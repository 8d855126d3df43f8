"""Physical parameters of the emitter and the drive.

All stored values use ns and rad/ns.  Use the ``from_*`` constructors
to build parameters from the ps/GHz numbers usually quoted for quantum
dots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Slack for t2 <= 2 t1 so round-tripped ps values are not rejected.
_T2_SLACK = 1e-12


def ps_to_ns(x):
    return np.asarray(x, dtype=float) * 1e-3 if np.ndim(x) else float(x) * 1e-3


def ns_to_ps(x):
    return np.asarray(x, dtype=float) * 1e3 if np.ndim(x) else float(x) * 1e3


def ghz_to_angular(f):
    """Cyclic GHz to rad/ns."""
    return TWO_PI * np.asarray(f, dtype=float) if np.ndim(f) else TWO_PI * float(f)


def angular_to_ghz(w):
    """rad/ns to cyclic GHz."""
    return np.asarray(w, dtype=float) / TWO_PI if np.ndim(w) else float(w) / TWO_PI


@dataclass(frozen=True)
class EmitterParams:
    """Radiative lifetime ``t1`` and coherence time ``t2``, both in ns."""

    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError(f"t1 and t2 must be positive, got {self.t1}, {self.t2}")
        if self.t2 > 2 * self.t1 * (1 + _T2_SLACK):
            raise ValueError(
                f"t2 = {self.t2} ns exceeds 2*t1 = {2 * self.t1} ns "
                "(negative pure dephasing)"
            )

    @classmethod
    def from_ps(cls, t1_ps: float, t2_ps: float) -> EmitterParams:
        return cls(t1_ps * 1e-3, t2_ps * 1e-3)

    @property
    def gamma1(self) -> float:
        """Population decay rate 1/t1 (1/ns)."""
        return 1.0 / self.t1

    @property
    def gamma2(self) -> float:
        """Coherence decay rate 1/t2 (1/ns)."""
        return 1.0 / self.t2

    @property
    def pure_dephasing(self) -> float:
        return max(self.gamma2 - 0.5 * self.gamma1, 0.0)

    @property
    def eta(self) -> float:
        """Damping of the Rabi oscillation, (1/t1 + 1/t2)/2."""
        return 0.5 * (self.gamma1 + self.gamma2)

    @property
    def damping_offset(self) -> float:
        """(1/t1 - 1/t2)/2; the drive must exceed this to oscillate."""
        return 0.5 * (self.gamma1 - self.gamma2)


@dataclass(frozen=True)
class DriveParams:
    """Rabi frequency and laser detuning, both in rad/ns.

    ``detuning`` is laser minus emitter frequency, so positive means
    blue detuning.
    """

    rabi: float
    detuning: float = 0.0

    def __post_init__(self):
        if not self.rabi >= 0:
            raise ValueError(f"rabi must be >= 0, got {self.rabi}")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")

    @classmethod
    def from_ghz(cls, rabi_ghz: float, detuning_ghz: float = 0.0) -> DriveParams:
        return cls(TWO_PI * rabi_ghz, TWO_PI * detuning_ghz)

    @property
    def rabi_ghz(self) -> float:
        return self.rabi / TWO_PI

    @property
    def detuning_ghz(self) -> float:
        return self.detuning / TWO_PI

    @property
    def generalized_rabi(self) -> float:
        return math.hypot(self.rabi, self.detuning)


def mu_squared(emitter: EmitterParams, drive: DriveParams) -> float:
    """Omega**2 - ((1/t1 - 1/t2)/2)**2; positive on the oscillatory branch."""
    return drive.rabi**2 - emitter.damping_offset**2


@dataclass(frozen=True)
class BlochState:
    """Bloch vector (u, v, w); w = -1 is the ground state.

    u + iv = 2 rho_eg with rho_eg = <e|rho|g> in the laser frame.
    """

    u: float
    v: float
    w: float

    @classmethod
    def ground(cls) -> BlochState:
        return cls(0.0, 0.0, -1.0)

    @classmethod
    def excited(cls) -> BlochState:
        return cls(0.0, 0.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])

    @property
    def population(self) -> float:
        """Excited-state population (1 + w)/2."""
        return 0.5 * (1.0 + self.w)

    @property
    def length(self) -> float:
        return math.sqrt(self.u**2 + self.v**2 + self.w**2)
