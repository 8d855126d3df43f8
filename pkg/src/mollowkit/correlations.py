"""Closed-form photon correlation functions.

g2 of an ideally resonant two-level emitter, the incoherent first-order
coherence, first-order interference visibility, and a phenomenological
two-exponential model for cascaded sideband cross-correlations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import UnderdampedDomain
from .params import DriveParams, EmitterParams, mu_squared
from .traces import CorrelationKind, CorrelationTrace


def _require_oscillatory(emitter, drive) -> float:
    m2 = mu_squared(emitter, drive)
    if m2 <= 0:
        raise UnderdampedDomain(
            f"rabi = {drive.rabi:.4g} rad/ns does not exceed "
            f"|1/t1 - 1/t2|/2 = {abs(emitter.damping_offset):.4g} rad/ns"
        )
    return math.sqrt(m2)


def _sorted_trace(taus, values, kind) -> CorrelationTrace:
    return CorrelationTrace(np.asarray(taus, dtype=float), values, kind)


def g2_values(emitter: EmitterParams, drive: DriveParams, taus) -> np.ndarray:
    """1 - exp(-eta|tau|) [cos(mu|tau|) + eta/mu sin(mu|tau|)], tau in ns.

    Oscillatory branch only; see :func:`g2_continued_values` for the rest.
    """
    mu = _require_oscillatory(emitter, drive)
    eta = emitter.eta
    t = np.abs(np.asarray(taus, dtype=float))
    return 1.0 - np.exp(-eta * t) * (np.cos(mu * t) + eta / mu * np.sin(mu * t))


def g2_closed(emitter: EmitterParams, drive: DriveParams, taus) -> CorrelationTrace:
    """Resonant g2(tau) on increasing delays ``taus`` (ns).

    Raises
    ------
    UnderdampedDomain
        When the drive is below the oscillation threshold.
    """
    return _sorted_trace(taus, g2_values(emitter, drive, taus), CorrelationKind.G2)


def g2_continued_values(emitter: EmitterParams, drive: DriveParams, taus) -> np.ndarray:
    """Resonant g2 on either side of the oscillation threshold.

    Below threshold the trigonometric terms continue to cosh/sinh, and at
    threshold to the critically damped limit ``1 - exp(-eta t)(1 + eta t)``.
    """
    eta = emitter.eta
    t = np.abs(np.asarray(taus, dtype=float))
    m2 = mu_squared(emitter, drive)
    scale = max(drive.rabi, abs(emitter.damping_offset), 1e-300) ** 2
    if m2 > 1e-12 * scale:
        mu = math.sqrt(m2)
        osc = np.cos(mu * t) + eta / mu * np.sin(mu * t)
    elif m2 < -1e-12 * scale:
        kappa = math.sqrt(-m2)
        # exp(-eta t)(cosh + eta/kappa sinh) with the exponents combined
        return 1.0 - (
            0.5 * (1 + eta / kappa) * np.exp(-(eta - kappa) * t)
            + 0.5 * (1 - eta / kappa) * np.exp(-(eta + kappa) * t)
        )
    else:
        osc = 1.0 + eta * t
    return 1.0 - np.exp(-eta * t) * osc


def g2_continued(emitter: EmitterParams, drive: DriveParams, taus) -> CorrelationTrace:
    return _sorted_trace(taus, g2_continued_values(emitter, drive, taus), CorrelationKind.G2)


def g1_incoh_values(
    emitter: EmitterParams, drive: DriveParams, taus, normalize: bool = True
) -> np.ndarray:
    """Incoherent first-order coherence from rates g1 = 1/t1 and g2 = 1/t2.

    Unnormalized, the value at tau = 0 is the incoherently scattered
    population.
    """
    mu = _require_oscillatory(emitter, drive)
    g1, g2 = emitter.gamma1, emitter.gamma2
    om2 = drive.rabi**2
    t = np.abs(np.asarray(taus, dtype=float))
    d = om2 + g1 * g2
    pref = om2 / (2 * d)
    cos_w = 0.5 * (d - g1**2) / d
    sin_w = -(om2 * (g2 - 3 * g1) + g1 * (g2 - g1) ** 2) / (4 * mu * d)
    val = pref * (
        0.5 * np.exp(-g2 * t)
        + np.exp(-0.5 * (g1 + g2) * t) * (cos_w * np.cos(mu * t) + sin_w * np.sin(mu * t))
    )
    if normalize:
        val = val / (pref * (0.5 + cos_w))
    return val


def g1_incoh_closed(
    emitter: EmitterParams, drive: DriveParams, taus, normalize: bool = True
) -> CorrelationTrace:
    return _sorted_trace(
        taus, g1_incoh_values(emitter, drive, taus, normalize), CorrelationKind.G1_INCOH
    )


@dataclass(frozen=True)
class VisibilityModel:
    """Two-component interference visibility.

    A slow coherent part (laser coherence) with weight ``coherent_fraction``
    and the fast incoherent emitter part.  ``laser_coherence_time`` is in ns.
    """

    coherent_fraction: float
    laser_coherence_time: float
    emitter: EmitterParams
    drive: DriveParams

    def __post_init__(self):
        if not 0.0 <= self.coherent_fraction <= 1.0:
            raise ValueError("coherent_fraction must lie in [0, 1]")
        if not self.laser_coherence_time > 0:
            raise ValueError("laser_coherence_time must be positive")


def visibility_values(model: VisibilityModel, delays) -> np.ndarray:
    t = np.abs(np.asarray(delays, dtype=float))
    c = model.coherent_fraction
    slow = np.exp(-t / model.laser_coherence_time)
    if c == 1.0:
        return slow
    fast = g1_incoh_values(model.emitter, model.drive, t)
    return c * slow + (1 - c) * fast


def visibility(model: VisibilityModel, delays) -> CorrelationTrace:
    """V(tau) = c exp(-|tau|/tau_laser) + (1 - c) g1_incoh(tau); V(0) = 1."""
    return _sorted_trace(delays, visibility_values(model, delays), CorrelationKind.VISIBILITY)


class CascadeOrder(str, enum.Enum):
    T_HERALDS_F = "t_heralds_f"
    F_HERALDS_T = "f_heralds_t"


@dataclass(frozen=True)
class CascadeModel:
    """Asymmetric bunching between opposite Mollow sidebands.

    Time constants are in ps to match how they are quoted.
    """

    tau_rise: float
    tau_fall: float
    amplitude: float
    order: CascadeOrder = CascadeOrder.T_HERALDS_F
    baseline: float = 1.0

    def __post_init__(self):
        if not (self.tau_rise > 0 and self.tau_fall > 0 and self.amplitude > 0):
            raise ValueError("tau_rise, tau_fall and amplitude must be positive")
        object.__setattr__(self, "order", CascadeOrder(self.order))


def _rise_fall(t, rise, fall):
    return (1.0 - np.exp(-t / rise)) * np.exp(-t / fall)


def cascade_values(model: CascadeModel, taus_ps) -> np.ndarray:
    """Cross-correlation with the start photon of the heralding line at tau = 0.

    On the heralded side ``1 + A (1 - exp(-t/rise)) exp(-t/fall)``; the other
    side mirrors it with rise and fall exchanged.  The trace is continuous
    with value 1 at zero delay and returns to 1 on both sides.
    """
    tau = np.asarray(taus_ps, dtype=float)
    if model.order is CascadeOrder.F_HERALDS_T:
        tau = -tau
    pos = tau > 0
    out = np.empty_like(tau)
    out[pos] = _rise_fall(tau[pos], model.tau_rise, model.tau_fall)
    out[~pos] = _rise_fall(-tau[~pos], model.tau_fall, model.tau_rise)
    return model.baseline + model.amplitude * out


def cascade_cross_correlation(model: CascadeModel, taus) -> CorrelationTrace:
    """Trace of :func:`cascade_values` on delays ``taus`` given in ns."""
    taus = np.asarray(taus, dtype=float)
    return _sorted_trace(taus, cascade_values(model, taus * 1e3), CorrelationKind.CROSS)


def cascade_peak_delay(model: CascadeModel) -> float:
    """Delay (ps) of the heralded-side maximum, signed by the emission order."""
    r, f = model.tau_rise, model.tau_fall
    t = r * math.log((r + f) / r)
    return t if model.order is CascadeOrder.T_HERALDS_F else -t
