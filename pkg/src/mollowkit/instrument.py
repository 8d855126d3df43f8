"""Instrument chain between the ideal emitter and recorded counts.

Flux calibration, the saturation law with a linear laser background,
Gaussian IRF (de)convolution, Poissonian background in g2, the scanning
Fabry-Perot response, telegraph blinking and the efficiency budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.special import ndtr

from .rng import make_rng
from .traces import CorrelationKind, CorrelationTrace, SpectrumTrace

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

_EVEN_KINDS = (CorrelationKind.G2, CorrelationKind.G1_INCOH, CorrelationKind.VISIBILITY)


@dataclass(frozen=True)
class FluxCalibration:
    wavelength_nm: float
    t1_ps: float

    def __post_init__(self):
        if not (self.wavelength_nm > 0 and self.t1_ps > 0):
            raise ValueError("wavelength and t1 must be positive")

    @property
    def photon_energy(self) -> float:
        """h*c/lambda in joule."""
        return constants.h * constants.c / (self.wavelength_nm * 1e-9)


def flux_from_power(cal: FluxCalibration, power_nw):
    """Incident photons per lifetime, n_bar = P t1 / (h nu)."""
    p = np.asarray(power_nw, dtype=float)
    if np.any(p < 0):
        raise ValueError("power must be >= 0")
    n = p * 1e-9 * cal.t1_ps * 1e-12 / cal.photon_energy
    return float(n) if n.ndim == 0 else n


def power_from_flux(cal: FluxCalibration, n_bar):
    """Inverse of :func:`flux_from_power`, in nW."""
    n = np.asarray(n_bar, dtype=float)
    p = n * cal.photon_energy / (cal.t1_ps * 1e-12) * 1e9
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class SaturationParams:
    """Saturated scattering rate ``s_sat`` (GHz), saturation flux ``n0`` and
    overall responsivity ``eta_sys``."""

    s_sat: float
    n0: float
    eta_sys: float

    def __post_init__(self):
        if not (self.s_sat > 0 and self.n0 > 0 and 0 < self.eta_sys <= 1):
            raise ValueError("need s_sat > 0, n0 > 0 and eta_sys in (0, 1]")

    @property
    def plateau_mhz(self) -> float:
        return self.eta_sys * self.s_sat * 1e3


def saturation_counts(p: SaturationParams, n_bar):
    """Detected emitter count rate in MHz, eta_sys s_sat n/(n + n0)."""
    n = np.asarray(n_bar, dtype=float)
    if np.any(n < 0):
        raise ValueError("n_bar must be >= 0")
    c = p.plateau_mhz * n / (n + p.n0)
    return float(c) if c.ndim == 0 else c


@dataclass(frozen=True)
class InstrumentModel:
    """Detection chain constants.

    irf_fwhm in ps, fp_linewidth in MHz, grating_bandwidth in GHz.
    ``background_slope`` (MHz per unit n_bar) overrides the value derived
    from the cavity reflectivity when given.
    """

    irf_fwhm: float = 40.0
    fp_linewidth: float = 15.0
    grating_bandwidth: float = 8.0
    background_reflectivity: float = 0.0089
    detection_efficiency: float = 0.03
    background_slope: float | None = None

    def __post_init__(self):
        for name in ("irf_fwhm", "fp_linewidth", "grating_bandwidth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.background_reflectivity <= 1:
            raise ValueError("background_reflectivity must lie in [0, 1]")
        if not 0 <= self.detection_efficiency <= 1:
            raise ValueError("detection_efficiency must lie in [0, 1]")
        if self.background_slope is not None and self.background_slope < 0:
            raise ValueError("background_slope must be >= 0")


def background_slope(instr: InstrumentModel, cal: FluxCalibration) -> float:
    """Laser background in MHz per unit n_bar.

    Reflected photons arrive at R_min * n_bar / t1 and are detected with
    the same responsivity as the emitter signal.
    """
    if instr.background_slope is not None:
        return instr.background_slope
    return instr.background_reflectivity * instr.detection_efficiency / (cal.t1_ps * 1e-12) * 1e-6


def detected_counts(p: SaturationParams, instr: InstrumentModel, n_bar, cal: FluxCalibration):
    """(total, background, emitter) detected rates in MHz."""
    n = np.asarray(n_bar, dtype=float)
    qd = np.asarray(saturation_counts(p, n))
    bg = background_slope(instr, cal) * n
    total = qd + bg
    if total.ndim == 0:
        return float(total), float(bg), float(qd)
    return total, bg, qd


def crossover_flux(p: SaturationParams, instr: InstrumentModel, cal: FluxCalibration) -> float:
    """n_bar at which the laser background equals the emitter signal.

    Returns inf when the background never catches up.
    """
    beta = background_slope(instr, cal)
    if beta <= 0:
        return math.inf
    n = p.plateau_mhz / beta - p.n0
    return n if n > 0 else 0.0


def gaussian_kernel(fwhm: float, step: float) -> np.ndarray:
    """Unit-sum Gaussian weights integrated over grid cells of width ``step``."""
    sigma = fwhm / FWHM_PER_SIGMA
    if sigma <= 0:
        return np.ones(1)
    half = int(math.ceil(8 * sigma / step)) + 1
    edges = (np.arange(-half, half + 2) - 0.5) * step
    w = np.diff(ndtr(edges / sigma))
    return w / w.sum()


def _padded(trace: CorrelationTrace, half: int) -> np.ndarray:
    y = trace.values
    n = y.size
    mirror = trace.kind in _EVEN_KINDS and trace.taus[0] == 0.0
    if mirror:
        idx = np.abs(np.arange(-half, 0))
        left = y[np.minimum(idx, n - 1)]
    else:
        left = np.full(half, y[0])
    right = np.full(half, y[-1])
    return np.concatenate([left, y, right])


def _require_uniform(trace: CorrelationTrace) -> float:
    if trace.taus.size < 2 or not trace.is_uniform():
        raise ValueError("trace must be sampled on a uniform grid")
    return float(trace.taus[1] - trace.taus[0])


def convolve_irf(trace: CorrelationTrace, irf_fwhm: float) -> CorrelationTrace:
    """Convolve with a unit-area Gaussian IRF of FWHM ``irf_fwhm`` (ps).

    Beyond the grid the trace is continued by its end values; a trace of an
    even function that starts at tau = 0 is mirrored instead.
    """
    step = _require_uniform(trace)
    k = gaussian_kernel(irf_fwhm * 1e-3, step)
    half = k.size // 2
    if half == 0:
        return trace.with_values(trace.values.copy())
    y = np.convolve(_padded(trace, half), k, mode="valid")
    return trace.with_values(y)


def deconvolve_irf(
    trace: CorrelationTrace, irf_fwhm: float, epsilon: float = 1e-3
) -> CorrelationTrace:
    """Tikhonov-regularized inverse of :func:`convolve_irf`.

    Frequency-domain division Y K* / (|K|^2 + lam) with
    lam = epsilon * max|K|^2.  The baseline (mean of the two end samples) is
    removed before the transform and restored after.
    """
    step = _require_uniform(trace)
    k = gaussian_kernel(irf_fwhm * 1e-3, step)
    half = k.size // 2
    if half == 0:
        return trace.with_values(trace.values.copy())
    y = trace.values
    mirror = trace.kind in _EVEN_KINDS and trace.taus[0] == 0.0
    if mirror:
        y = np.concatenate([y[:0:-1], y])
    base = 0.5 * (y[0] + y[-1])
    n = y.size
    nfft = 1 << int(math.ceil(math.log2(n + 2 * k.size)))
    pad = np.zeros(nfft)
    pad[:n] = y - base
    kern = np.zeros(nfft)
    kern[: half + 1] = k[half:]
    kern[-half:] = k[:half]
    yf = np.fft.rfft(pad)
    kf = np.fft.rfft(kern)
    lam = epsilon * np.max(np.abs(kf)) ** 2
    x = np.fft.irfft(yf * np.conj(kf) / (np.abs(kf) ** 2 + lam), nfft)[:n] + base
    if mirror:
        x = x[trace.values.size - 1 :]
    return trace.with_values(x)


def add_background_g2(trace: CorrelationTrace, signal_fraction: float) -> CorrelationTrace:
    """Mix in uncorrelated (g2 = 1) counts: 1 + rho**2 (g2 - 1).

    ``signal_fraction`` rho is the share of counts coming from the emitter.
    """
    rho = float(signal_fraction)
    if not 0.0 <= rho <= 1.0:
        raise ValueError("signal_fraction must lie in [0, 1]")
    return trace.with_values(1.0 + rho**2 * (trace.values - 1.0))


def remove_background_g2(trace: CorrelationTrace, signal_fraction: float) -> CorrelationTrace:
    """Inverse of :func:`add_background_g2`."""
    rho = float(signal_fraction)
    if not 0.0 < rho <= 1.0:
        raise ValueError("background removal needs signal_fraction in (0, 1]")
    return trace.with_values(1.0 + (trace.values - 1.0) / rho**2)


def signal_fraction_from_ratio(signal_to_background: float) -> float:
    return signal_to_background / (1.0 + signal_to_background)


def lorentzian_kernel(fwhm: float, step: float, max_half: int) -> np.ndarray:
    """Unit-sum Lorentzian weights integrated over grid cells."""
    half = int(min(max_half, math.ceil(2000 * fwhm / step) + 1))
    edges = (np.arange(-half, half + 2) - 0.5) * step
    w = np.diff(np.arctan(2 * edges / fwhm)) / np.pi
    return w / w.sum()


def fp_filter_spectrum(
    spec: SpectrumTrace, fp_linewidth: float, coherent_weight: float | None = None
) -> SpectrumTrace:
    """Spectrum as recorded through a scanning cavity of FWHM ``fp_linewidth`` MHz.

    Convolution with a unit-area Lorentzian (edges reflected, so the
    integrated power is unchanged).  ``coherent_weight`` adds the elastic
    peak at the laser frequency as a Lorentzian of the instrument width
    carrying that much power.
    """
    x = spec.offsets
    y = spec.intensities
    if x.size < 3:
        raise ValueError("spectrum grid too short")
    step = float(x[1] - x[0])
    if not np.allclose(np.diff(x), step, rtol=1e-6):
        raise ValueError("spectrum must be on a uniform grid")
    gamma = 2 * math.pi * fp_linewidth * 1e-3  # rad/ns
    if gamma > 0 and step > gamma / 2:
        raise ValueError(
            f"grid step {step / (2 * math.pi) * 1e3:.3g} MHz is coarser than half "
            f"the {fp_linewidth} MHz filter linewidth"
        )
    if gamma > 0:
        k = lorentzian_kernel(gamma, step, max_half=x.size - 1)
        half = k.size // 2
        padded = np.concatenate([y[half - 1 :: -1] if half else y[:0], y, y[: -half - 1 : -1]])
        out = np.convolve(padded, k, mode="valid")
    else:
        out = y.copy()
    if coherent_weight:
        if gamma > 0:
            out = out + coherent_weight * (gamma / (2 * math.pi)) / (x**2 + (gamma / 2) ** 2)
        else:
            i = int(np.argmin(np.abs(x)))
            out = out.copy()
            out[i] += coherent_weight / step
    return SpectrumTrace(x, out, spec.mode, spec.warnings)


@dataclass(frozen=True)
class BlinkingModel:
    """Two-state telegraph.  Rates in 1/ms, ``bright_rate`` in counts per bin."""

    rate_on_to_off: float
    rate_off_to_on: float
    bright_rate: float = 48.3

    def __post_init__(self):
        if not (self.rate_on_to_off > 0 and self.rate_off_to_on > 0):
            raise ValueError("telegraph rates must be positive")
        if self.bright_rate < 0:
            raise ValueError("bright_rate must be >= 0")

    @property
    def duty_bright(self) -> float:
        return self.rate_off_to_on / (self.rate_on_to_off + self.rate_off_to_on)

    @classmethod
    def from_duty(cls, duty: float, dwell_ms: float = 1.0, bright_rate: float = 48.3):
        """Telegraph with bright fraction ``duty`` and correlation time ``dwell_ms``."""
        if not 0 < duty < 1:
            raise ValueError("duty must lie in (0, 1)")
        total = 1.0 / dwell_ms
        return cls(total * (1 - duty), total * duty, bright_rate)

    @classmethod
    def from_ratio(cls, bright_to_mean: float, dwell_ms: float = 1.0, bright_rate: float = 48.3):
        """Telegraph whose bright count rate exceeds the mean by ``bright_to_mean``."""
        return cls.from_duty(1.0 / bright_to_mean, dwell_ms, bright_rate)


def telegraph_intervals(model: BlinkingModel, duration_ms: float, rng) -> np.ndarray:
    """Bright intervals as an (n, 2) array of [start, stop) times in ms.

    The initial state is drawn from the stationary distribution.
    """
    state_on = rng.random() < model.duty_bright
    t = 0.0
    starts, stops = [], []
    mean_cycle = 1 / model.rate_on_to_off + 1 / model.rate_off_to_on
    while t < duration_ms:
        # draw dwell times in blocks
        n = int(2 * duration_ms / mean_cycle) + 16
        on = rng.exponential(1 / model.rate_on_to_off, n)
        off = rng.exponential(1 / model.rate_off_to_on, n)
        if state_on:
            seq = np.column_stack([on, off]).ravel()
        else:
            seq = np.column_stack([off, on]).ravel()
        edges = t + np.concatenate([[0.0], np.cumsum(seq)])
        first_on = 0 if state_on else 1
        starts.append(edges[first_on:-1:2])
        stops.append(edges[first_on + 1 :: 2])
        t = edges[-1]
    starts = np.concatenate(starts)
    stops = np.concatenate(stops)
    m = min(starts.size, stops.size)
    iv = np.column_stack([starts[:m], stops[:m]])
    iv = iv[iv[:, 0] < duration_ms]
    iv[:, 1] = np.minimum(iv[:, 1], duration_ms)
    return iv


def bright_time(intervals: np.ndarray, t) -> np.ndarray:
    """Cumulative bright time up to each time in ``t``."""
    if intervals.size == 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    lengths = intervals[:, 1] - intervals[:, 0]
    knots_t = intervals.ravel()
    cum_at_stop = np.cumsum(lengths)
    knots_v = np.column_stack([cum_at_stop - lengths, cum_at_stop]).ravel()
    return np.interp(t, knots_t, knots_v, left=0.0, right=cum_at_stop[-1])


def blinking_trace(model: BlinkingModel, duration: float, bin_ms: float, seed) -> np.ndarray:
    """Counts per bin for a blinking emitter observed for ``duration`` seconds."""
    rng = make_rng(seed)
    duration_ms = duration * 1e3
    nbins = int(duration_ms / bin_ms)
    if nbins < 1:
        raise ValueError("duration shorter than one bin")
    iv = telegraph_intervals(model, nbins * bin_ms, rng)
    edges = np.arange(nbins + 1) * bin_ms
    frac = np.clip(np.diff(bright_time(iv, edges)) / bin_ms, 0.0, 1.0)
    return rng.poisson(model.bright_rate * frac)


def efficiency_budget(
    measured_responsivity: float, path_transmission: float, blinking_ratio: float
) -> float:
    """Responsivity corrected for optical losses and blinking."""
    if not (0 < measured_responsivity <= 1 and 0 < path_transmission <= 1):
        raise ValueError("responsivity and transmission must lie in (0, 1]")
    if blinking_ratio < 1:
        raise ValueError("blinking_ratio must be >= 1")
    return measured_responsivity * blinking_ratio / path_transmission


def purcell_factor(tau_on: float, tau_off: float) -> float:
    """Cavity-added decay rate over the free rate, tau_off/tau_on - 1."""
    if not 0 < tau_on <= tau_off:
        raise ValueError("need 0 < tau_on <= tau_off")
    return tau_off / tau_on - 1.0
