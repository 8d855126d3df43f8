"""Synthetic datasets with counting noise for round-trip tests and demos.

Every generator scales its noiseless model so the largest expected bin
holds ``peak_counts`` counts, draws Poisson counts and rescales back.
Error bars are sqrt(expected counts), i.e. the true noise level the data
were drawn with.  ``peak_counts=None`` returns noiseless data with unit
error bars.
"""

from __future__ import annotations

import numpy as np

from .correlations import CascadeModel, CascadeOrder, VisibilityModel, cascade_values, visibility_values
from .estimation import DataSeries, exgauss_decay, g2_instrumented
from .instrument import SaturationParams, saturation_counts
from .params import DriveParams, EmitterParams
from .rng import make_rng
from .spectra import spectrum_closed
from .traces import SpectrumMode, SpectrumTrace

DEFAULT_EMITTER = EmitterParams.from_ps(56.8, 103.5)
DEFAULT_SATURATION = SaturationParams(s_sat=2.716, n0=0.125, eta_sys=0.03)
PEAK_COUNTS = 1e4


def _noisy(model, rng, peak_counts):
    model = np.asarray(model, dtype=float)
    if peak_counts is None:
        return model.copy(), np.ones_like(model)
    scale = peak_counts / np.max(np.abs(model))
    lam = np.maximum(model * scale, 0.0)
    counts = rng.poisson(lam)
    return counts / scale, np.sqrt(np.maximum(lam, 1.0)) / scale


def saturation_data(params: SaturationParams = DEFAULT_SATURATION, n_bar=None, seed=0,
                    peak_counts=PEAK_COUNTS) -> DataSeries:
    """Count rate (MHz) against flux over both the linear and the plateau region."""
    x = np.geomspace(0.01, 10.0, 25) if n_bar is None else np.asarray(n_bar, dtype=float)
    y, e = _noisy(saturation_counts(params, x), make_rng(seed), peak_counts)
    return DataSeries(x, y, e, "n_bar", "MHz")


def lifetime_data(t1_ps: float = 56.8, irf_fwhm: float = 40.0, t0: float = 100.0,
                  bin_ps: float = 4.0, span_t1: float = 10.0, seed=0,
                  peak_counts=PEAK_COUNTS) -> DataSeries:
    """Decay histogram (ps, counts) starting one IRF width before the onset."""
    x = np.arange(t0 - 2.5 * irf_fwhm - 20, t0 + span_t1 * t1_ps, bin_ps)
    y, e = _noisy(exgauss_decay(x, t1_ps, 1.0, t0, irf_fwhm), make_rng(seed), peak_counts)
    return DataSeries(x, y, e, "ps", "counts")


def spectrum_data(rabi_ghz: float = 4.0, emitter: EmitterParams = DEFAULT_EMITTER,
                  span_ghz: float = 20.0, n_points: int = 801, seed=0,
                  peak_counts=PEAK_COUNTS) -> tuple[SpectrumTrace, np.ndarray]:
    """Noisy resonant spectrum and its error bars (same arbitrary units)."""
    grid = np.linspace(-1, 1, n_points) * span_ghz * 2 * np.pi
    clean = spectrum_closed(emitter, DriveParams.from_ghz(rabi_ghz), grid, SpectrumMode.STANDARD)
    y, e = _noisy(clean.intensities, make_rng(seed), peak_counts)
    return SpectrumTrace(grid, y, SpectrumMode.STANDARD), e


def g2_data(rabi_ghz: float = 4.0, signal_fraction: float = 0.9, irf_fwhm: float = 40.0,
            emitter: EmitterParams = DEFAULT_EMITTER, max_tau: float = 600.0, bin_ps: float = 4.0,
            seed=0, peak_counts=PEAK_COUNTS) -> DataSeries:
    """Normalized g2 histogram (ps, g2) with a Poissonian background."""
    x = np.arange(-max_tau, max_tau + bin_ps / 2, bin_ps)
    model = g2_instrumented(emitter, DriveParams.from_ghz(rabi_ghz), x, signal_fraction, irf_fwhm)
    y, e = _noisy(model, make_rng(seed), peak_counts)
    return DataSeries(x, y, e, "ps", "g2")


def visibility_template(t2_ps: float = 103.5, coherent_fraction: float = 0.35,
                        laser_coherence_ns: float = 5.0, rabi_ghz: float = 4.0,
                        t1_ps: float = 56.8) -> VisibilityModel:
    return VisibilityModel(coherent_fraction, laser_coherence_ns,
                           EmitterParams.from_ps(t1_ps, t2_ps), DriveParams.from_ghz(rabi_ghz))


def visibility_data(model: VisibilityModel | None = None, max_delay: float = 800.0,
                    step_ps: float = 5.0, seed=0, peak_counts=PEAK_COUNTS) -> DataSeries:
    """Visibility against delay (ps), noise from fringe counts of the same peak size."""
    model = visibility_template() if model is None else model
    x = np.arange(0.0, max_delay + step_ps / 2, step_ps)
    y, e = _noisy(visibility_values(model, x * 1e-3), make_rng(seed), peak_counts)
    return DataSeries(x, y, e, "ps", "visibility")


def cascade_data(tau_rise: float = 57.8, tau_fall: float = 91.8, amplitude: float = 1.0,
                 order=CascadeOrder.T_HERALDS_F, max_tau: float = 1000.0, bin_ps: float = 8.0,
                 seed=0, peak_counts=PEAK_COUNTS) -> DataSeries:
    """Normalized sideband cross-correlation (ps, g)."""
    x = np.arange(-max_tau, max_tau + bin_ps / 2, bin_ps)
    model = cascade_values(CascadeModel(tau_rise, tau_fall, amplitude, order), x)
    y, e = _noisy(model, make_rng(seed), peak_counts)
    return DataSeries(x, y, e, "ps", "g")
