"""Closed-form Mollow triplet spectrum and sideband geometry.

Two flavours of the resonant closed form are provided:

``STANDARD``
    steady-state population evaluated at the laser detuning and sideband
    weight ``A = rabi**2 - (1/t1 - 1/t2)/t1``.  This agrees with the
    regression-theorem spectrum of :func:`mollowkit.dynamics.oracle_spectrum`.
``LITERAL``
    the expression exactly as it is usually printed: the population
    prefactor carries the spectral offset and ``A = rabi**2 + (1/t1 -
    1/t2)/t1``.

The two differ mostly near zero offset and at weak drive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import UnderdampedDomain
from .params import DriveParams, EmitterParams, mu_squared
from .traces import SpectrumMode, SpectrumTrace


@dataclass(frozen=True)
class MollowCoefficients:
    a_coef: float
    b_coef: float
    eta: float
    mu: float
    n_inf: float


def steady_population(emitter: EmitterParams, drive: DriveParams, detuning=None):
    """Excited population (rabi^2 t1/t2) / (2 (detuning^2 + 1/t2^2 + rabi^2 t1/t2)).

    ``detuning`` defaults to the laser detuning and may be an array.
    """
    d = drive.detuning if detuning is None else np.asarray(detuning, dtype=float)
    x = drive.rabi**2 * emitter.t1 / emitter.t2
    return x / (2.0 * (d**2 + emitter.gamma2**2 + x))


def coefficients(
    emitter: EmitterParams,
    drive: DriveParams,
    mode: SpectrumMode | str = SpectrumMode.STANDARD,
) -> MollowCoefficients:
    """Coefficients of the closed-form spectrum.

    Raises
    ------
    UnderdampedDomain
        If rabi <= |1/t1 - 1/t2|/2 so that mu is not real.
    """
    mode = SpectrumMode(mode)
    m2 = mu_squared(emitter, drive)
    if m2 <= 0:
        raise UnderdampedDomain(
            f"rabi = {drive.rabi:.4g} rad/ns is below the oscillation threshold "
            f"{abs(emitter.damping_offset):.4g} rad/ns"
        )
    g1, g2 = emitter.gamma1, emitter.gamma2
    om2 = drive.rabi**2
    sign = 1.0 if mode is SpectrumMode.LITERAL else -1.0
    a = om2 + sign * (g1 - g2) * g1
    b = 2 * om2 * (3 * g1 - g2) - 2 * (g1 - g2) ** 2 * g1
    return MollowCoefficients(
        a_coef=a,
        b_coef=b,
        eta=emitter.eta,
        mu=math.sqrt(m2),
        n_inf=float(steady_population(emitter, drive)),
    )


def spectrum_closed(
    emitter: EmitterParams,
    drive: DriveParams,
    freq_grid,
    mode: SpectrumMode | str = SpectrumMode.STANDARD,
) -> SpectrumTrace:
    """Evaluate the closed-form Mollow spectrum at offsets ``freq_grid`` (rad/ns)."""
    mode = SpectrumMode(mode)
    if mode is SpectrumMode.ORACLE:
        raise ValueError("use dynamics.oracle_spectrum for the oracle mode")
    c = coefficients(emitter, drive, mode)
    dw = np.asarray(freq_grid, dtype=float)
    g2 = emitter.gamma2
    if mode is SpectrumMode.LITERAL:
        n = steady_population(emitter, drive, detuning=dw)
    else:
        n = c.n_inf
    mu, eta = c.mu, c.eta
    center = 0.5 * g2 / (dw**2 + g2**2)
    lower = (c.a_coef * eta / 2 - c.b_coef * (dw - mu) / (8 * mu)) / ((dw - mu) ** 2 + eta**2)
    upper = (c.a_coef * eta / 2 + c.b_coef * (dw + mu) / (8 * mu)) / ((dw + mu) ** 2 + eta**2)
    s = n / np.pi * (center + n / drive.rabi**2 * (lower + upper))
    return SpectrumTrace(dw, np.broadcast_to(s, dw.shape).copy(), mode)


def generalized_rabi(drive: DriveParams) -> float:
    """sqrt(rabi**2 + detuning**2) in rad/ns."""
    return drive.generalized_rabi


def sideband_positions(drive: DriveParams) -> tuple[float, float, float]:
    """(lower, upper, rayleigh) line offsets from the bare emitter, in GHz.

    The Rayleigh line follows the laser; the sidebands sit at
    detuning -/+ generalized Rabi frequency.
    """
    om_g = drive.generalized_rabi
    two_pi = 2 * math.pi
    return (
        (drive.detuning - om_g) / two_pi,
        (drive.detuning + om_g) / two_pi,
        drive.detuning / two_pi,
    )


def rabi_from_flux(k: float, n_bar):
    """Rabi frequency in GHz for a square-root flux law, k * sqrt(n_bar)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    n_bar = np.asarray(n_bar, dtype=float)
    if np.any(n_bar < 0):
        raise ValueError("n_bar must be >= 0")
    out = k * np.sqrt(n_bar)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    index: int


def find_spectral_peaks(x, y, min_prominence: float = 0.01) -> list[Peak]:
    """Local maxima refined by a parabola through the three nearest samples.

    Peaks with prominence below ``min_prominence`` times the global maximum
    are dropped.  Sorted by position.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ymax = float(np.max(y))
    if ymax <= 0:
        return []
    idx, _ = find_peaks(y, prominence=min_prominence * ymax)
    peaks = []
    for i in idx:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        shift = min(max(shift, -0.5), 0.5)
        h = x[i + 1] - x[i] if shift >= 0 else x[i] - x[i - 1]
        height = y1 - 0.25 * (y0 - y2) * shift
        peaks.append(Peak(float(x[i] + shift * h), float(height), int(i)))
    return peaks


def triplet_peaks(trace: SpectrumTrace, min_prominence: float = 0.01):
    """The three strongest peaks of a spectrum, sorted by offset, or None."""
    peaks = find_spectral_peaks(trace.offsets, trace.intensities, min_prominence)
    if len(peaks) < 3:
        return None
    top = sorted(peaks, key=lambda p: p.height, reverse=True)[:3]
    return sorted(top, key=lambda p: p.position)


def sideband_splitting(trace: SpectrumTrace, min_prominence: float = 0.01) -> float | None:
    """Separation between the outer two triplet peaks (rad/ns), or None."""
    peaks = triplet_peaks(trace, min_prominence)
    if peaks is None:
        return None
    return peaks[2].position - peaks[0].position


def triplet_areas(trace: SpectrumTrace) -> tuple[float, float, float]:
    """Integrated (lower, center, upper) areas, split midway between peaks.

    Raises ValueError when the triplet is not resolved.
    """
    peaks = triplet_peaks(trace)
    if peaks is None:
        raise ValueError("spectrum does not show three resolved peaks")
    x, y = trace.offsets, trace.intensities
    cut1 = 0.5 * (peaks[0].position + peaks[1].position)
    cut2 = 0.5 * (peaks[1].position + peaks[2].position)
    areas = []
    for lo, hi in ((x[0], cut1), (cut1, cut2), (cut2, x[-1])):
        sel = (x >= lo) & (x <= hi)
        areas.append(float(np.trapezoid(y[sel], x[sel])))
    return tuple(areas)
