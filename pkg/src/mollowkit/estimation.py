"""Least-squares estimators for every measured quantity.

Each ``fit_*`` takes a :class:`DataSeries` in the units the quantity is
usually recorded in and returns a :class:`FitResult` whose parameters use
the same public units (ps, GHz, MHz).

Initial guesses are deterministic:

* saturation: plateau from the largest rate, n0 from the median of
  ``x (C_inf/y - 1)``;
* lifetime: onset at the half-rise point, t1 from a log-linear fit of the
  tail, amplitude from its intercept;
* spectrum: half the outer peak separation (curvature peaks when the
  sidebands are only shoulders), corrected for damping;
* g2: grid search over the Rabi frequency with the signal fraction from the
  dip depth;
* visibility: grid search over t2, coherent fraction from the long-delay
  plateau;
* cascade: order from the sign of the peak delay, then a coarse grid over
  the two time constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import erfc, erfcx

from . import instrument
from .correlations import (
    CascadeModel,
    CascadeOrder,
    VisibilityModel,
    cascade_values,
    g2_continued_values,
    visibility_values,
)
from .errors import CascadeAmbiguity, DegenerateData, FitError, NoSidebands
from .lm import covariance, levenberg_marquardt
from .params import TWO_PI, DriveParams, EmitterParams, mu_squared
from .spectra import find_spectral_peaks, spectrum_closed
from .traces import CorrelationKind, CorrelationTrace, SpectrumTrace


@dataclass(frozen=True)
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray | None = None
    x_unit: str = ""
    y_unit: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.y_err is not None:
            e = np.asarray(self.y_err, dtype=float)
            if e.shape != y.shape:
                raise ValueError("y_err must match y in length")
            if np.any(e <= 0):
                raise ValueError("y_err must be positive")
            object.__setattr__(self, "y_err", e)

    def __len__(self):
        return self.x.size


@dataclass
class FitResult:
    params: dict[str, float]
    std_errors: dict[str, float] | None
    residual_norm: float
    n_iterations: int
    converged: bool
    grad_norm: float = 0.0
    flags: list[str] = field(default_factory=list)
    extras: dict[str, object] = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "std_errors": None
            if self.std_errors is None
            else {k: float(v) for k, v in self.std_errors.items()},
            "residual_norm": float(self.residual_norm),
            "n_iterations": int(self.n_iterations),
            "converged": bool(self.converged),
            "grad_norm": float(self.grad_norm),
            "flags": list(self.flags),
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if hasattr(v, "value"):
        return v.value
    return v


def _poisson_sigma(y):
    return np.sqrt(np.maximum(y, 1.0))


def _run(names, residual, x0, lower, upper, absolute_sigma, transform=None, **lm_kw):
    """Run LM and package a FitResult.

    ``transform`` maps the optimizer vector to public parameter values and
    must be linear per component (a scale factor), so errors scale alike.
    """
    res = levenberg_marquardt(residual, x0, lower=lower, upper=upper, **lm_kw)
    if not np.all(np.isfinite(res.residuals)):
        raise FitError("model evaluation failed at the solution")
    cov = covariance(res.jacobian, res.residuals, absolute_sigma)
    scale = np.ones(len(names)) if transform is None else np.asarray(transform, dtype=float)
    params = {k: float(v * s) for k, v, s in zip(names, res.x, scale)}
    errs = None
    if cov is not None:
        errs = {k: float(math.sqrt(max(cov[i, i], 0.0)) * abs(scale[i])) for i, k in enumerate(names)}
    return (
        FitResult(
            params=params,
            std_errors=errs,
            residual_norm=res.residual_norm,
            n_iterations=res.n_iterations,
            converged=res.converged,
            grad_norm=res.grad_norm,
            history=res.history,
        ),
        res,
        cov,
    )


# --------------------------------------------------------------------------
# saturation


def fit_saturation(data: DataSeries, eta_sys: float = 0.03) -> FitResult:
    """Fit C = eta_sys s_sat n/(n + n0) to count rates (MHz) against n_bar.

    ``eta_sys`` cannot be separated from ``s_sat`` and is held fixed.
    Weighted by ``y_err`` when present, otherwise by sqrt(rate).
    """
    x, y = data.x, data.y
    if len(data) < 5:
        raise DegenerateData(f"saturation fit needs >= 5 points, got {len(data)}")
    if np.any(x < 0):
        raise DegenerateData("flux values must be >= 0")
    sigma = data.y_err if data.y_err is not None else _poisson_sigma(y)
    c_inf = 1.1 * float(np.max(y))
    sel = (y > 0) & (y < c_inf)
    n0 = float(np.median(x[sel] * (c_inf / y[sel] - 1))) if np.any(sel) else float(np.median(x))
    n0 = max(n0, 1e-6)
    s0 = c_inf / (eta_sys * 1e3)

    def resid(p):
        s_sat, n_0 = p
        return (eta_sys * s_sat * 1e3 * x / (x + n_0) - y) / sigma

    fit, _, cov = _run(
        ["s_sat", "n0"], resid, [s0, n0], [1e-12, 1e-12], [np.inf, np.inf], True
    )
    fit.params["plateau"] = eta_sys * 1e3 * fit.params["s_sat"]
    if fit.std_errors is not None:
        fit.std_errors["plateau"] = eta_sys * 1e3 * fit.std_errors["s_sat"]
    fit.extras.update(eta_sys=eta_sys, units="s_sat GHz, plateau MHz")
    n0_fit = fit.params["n0"]
    if np.max(x) < 2 * n0_fit or fit.std_errors is None or (
        fit.std_errors["n0"] > 0.5 * n0_fit
    ):
        fit.flags.append("linear_region_only")
    return fit


# --------------------------------------------------------------------------
# lifetime


def exgauss_decay(t, t1, amplitude, t0, irf_fwhm):
    """Single exponential from ``t0`` convolved with a Gaussian IRF (all ps).

    The tail approaches amplitude * exp(-(t - t0)/t1) * exp(sigma^2/(2 t1^2)).
    """
    x = np.asarray(t, dtype=float) - t0
    sigma = irf_fwhm / instrument.FWHM_PER_SIGMA
    if sigma <= 0:
        return np.where(x >= 0, amplitude * np.exp(-np.maximum(x, 0) / t1), 0.0)
    z = (sigma / t1 - x / sigma) / math.sqrt(2)
    out = np.empty_like(x)
    pos = z > 0
    out[pos] = 0.5 * erfcx(z[pos]) * np.exp(-0.5 * (x[pos] / sigma) ** 2)
    neg = ~pos
    out[neg] = 0.5 * np.exp(0.5 * (sigma / t1) ** 2 - x[neg] / t1) * erfc(z[neg])
    return amplitude * out


def fit_lifetime(data: DataSeries, irf_fwhm: float, t0: float | None = None) -> FitResult:
    """Fit an IRF-convolved single-exponential decay to a histogram (ps, counts).

    With ``irf_fwhm`` = 0 the onset is not identifiable separately from the
    amplitude and is fixed at ``t0`` (default 0).
    """
    x, y = data.x, data.y
    if len(data) < 5:
        raise DegenerateData("lifetime fit needs >= 5 points")
    sigma = data.y_err if data.y_err is not None else _poisson_sigma(y)
    ipk = int(np.argmax(y))
    ymax = float(y[ipk])
    if ymax <= 0:
        raise DegenerateData("histogram has no counts")
    if t0 is None and irf_fwhm > 0:
        rise = np.nonzero(y[: ipk + 1] >= 0.5 * ymax)[0]
        t0_guess = float(x[rise[0]]) if rise.size else float(x[ipk])
    else:
        t0_guess = 0.0 if t0 is None else float(t0)
    tail = (x > x[ipk] + 1.5 * irf_fwhm) & (y > max(0.02 * ymax, 5.0))
    if np.count_nonzero(tail) >= 3:
        slope, icpt = np.polyfit(x[tail] - t0_guess, np.log(y[tail]), 1)
        t1_guess = -1.0 / slope if slope < 0 else (x[-1] - x[0]) / 3
        a_guess = math.exp(icpt)
    else:
        t1_guess = (x[-1] - x[0]) / 10
        a_guess = ymax
    t1_guess = float(np.clip(t1_guess, 1e-3, 1e6))
    if irf_fwhm > 0:
        a_guess *= math.exp(-0.5 * (irf_fwhm / instrument.FWHM_PER_SIGMA / t1_guess) ** 2)

        def resid(p):
            return (exgauss_decay(x, p[0], p[1], p[2], irf_fwhm) - y) / sigma

        fit, _, _ = _run(
            ["t1", "amplitude", "t0"],
            resid,
            [t1_guess, a_guess, t0_guess],
            [1e-6, 0.0, -np.inf],
            [np.inf, np.inf, np.inf],
            True,
        )
    else:

        def resid(p):
            return (exgauss_decay(x, p[0], p[1], t0_guess, 0.0) - y) / sigma

        fit, _, _ = _run(
            ["t1", "amplitude"], resid, [t1_guess, a_guess], [1e-6, 0.0], [np.inf, np.inf], True
        )
        fit.params["t0"] = t0_guess
        if fit.std_errors is not None:
            fit.std_errors["t0"] = 0.0
        fit.flags.append("t0_fixed")
    fit.extras.update(irf_fwhm_ps=irf_fwhm, units="ps")
    if x[-1] - fit.params["t0"] < 3 * fit.params["t1"]:
        fit.flags.append("tail_shorter_than_3_t1")
    return fit


# --------------------------------------------------------------------------
# spectrum


def _curvature_peaks(x, y, min_prominence=0.01):
    curv = -np.gradient(np.gradient(y, x), x)
    return find_spectral_peaks(x, curv, min_prominence)


def sideband_estimate(spec: SpectrumTrace, min_prominence: float = 0.01):
    """Half the outer peak separation (rad/ns) and the method that found it.

    Uses local maxima when three are resolved and curvature maxima
    (shoulders) otherwise; raises NoSidebands when neither shows a triplet.
    """
    for method, finder in (("maxima", find_spectral_peaks), ("curvature", _curvature_peaks)):
        peaks = finder(spec.offsets, spec.intensities, min_prominence)
        if len(peaks) >= 3:
            top = sorted(sorted(peaks, key=lambda p: -p.height)[:3], key=lambda p: p.position)
            return 0.5 * (top[2].position - top[0].position), method
    raise NoSidebands("spectrum shows fewer than three resolvable components")


def fit_spectrum_rabi(
    spec: SpectrumTrace, emitter: EmitterParams, y_err=None, detuning: float = 0.0
) -> FitResult:
    """Rabi frequency (GHz) from a Mollow spectrum with t1 and t2 held fixed.

    The spectrum may carry an arbitrary overall ``scale``, which is fitted
    too.  ``detuning`` is in rad/ns.  The sideband search runs on a copy
    smoothed over a quarter of the 1/t2 linewidth, and a coarse scan over
    the Rabi frequency guards against a poor peak-based start.
    """
    x, y = spec.offsets, spec.intensities
    step = float(np.min(np.diff(x)))
    width = 0.25 * emitter.gamma2 / step
    smooth = gaussian_filter1d(y, width, mode="nearest") if width > 0.5 else y
    half_split, method = sideband_estimate(SpectrumTrace(x, smooth, spec.mode))
    off = abs(emitter.damping_offset)
    sigma = np.ones_like(y) if y_err is None else np.asarray(y_err, dtype=float)
    rabi_min = off * (1 + 1e-6) + 1e-9

    def model(rabi):
        return spectrum_closed(emitter, DriveParams(rabi, detuning), x).intensities

    def best_scale(m):
        return float(np.dot(m, y / sigma**2) / max(np.dot(m, m / sigma**2), 1e-300))

    def scan_cost(rabi):
        m = model(rabi)
        return float(np.sum(((best_scale(m) * m - y) / sigma) ** 2))

    peak_rabi = math.hypot(half_split, off)
    candidates = np.maximum(peak_rabi * np.geomspace(0.5, 2.0, 41), rabi_min * 1.01)
    rabi0 = float(candidates[int(np.argmin([scan_cost(c) for c in candidates]))])
    scale0 = best_scale(model(rabi0))

    def resid(p):
        return (p[1] * model(p[0]) - y) / sigma

    fit, _, _ = _run(
        ["rabi", "scale"],
        resid,
        [rabi0, scale0],
        [rabi_min, 0.0],
        [np.inf, np.inf],
        y_err is not None,
        transform=[1 / TWO_PI, 1.0],
    )
    fit.extras.update(initial_rabi_ghz=peak_rabi / TWO_PI, peak_method=method, units="rabi GHz")
    return fit


# --------------------------------------------------------------------------
# g2


def _uniform_model_grid(x_ns, irf_ns):
    step = np.min(np.diff(x_ns)) if x_ns.size > 1 else 1e-3
    if irf_ns > 0:
        step = min(step, irf_ns / 10)
    lo = min(0.0, x_ns[0])
    hi = max(abs(x_ns[0]), abs(x_ns[-1]), 4 * irf_ns, 10 * step)
    n = int(math.ceil(hi / step))
    return np.arange(0, n + 1) * step, lo


def g2_instrumented(emitter: EmitterParams, drive: DriveParams, taus_ps, signal_fraction,
                    irf_fwhm_ps: float = 0.0) -> np.ndarray:
    """Resonant g2 blurred by a Gaussian IRF and diluted by Poissonian background."""
    x = np.asarray(taus_ps, dtype=float) * 1e-3
    if irf_fwhm_ps > 0:
        grid, _ = _uniform_model_grid(np.sort(x), irf_fwhm_ps * 1e-3)
        tr = CorrelationTrace(grid, g2_continued_values(emitter, drive, grid), CorrelationKind.G2)
        tr = instrument.convolve_irf(tr, irf_fwhm_ps)
        g = np.interp(np.abs(x), tr.taus, tr.values)
    else:
        g = g2_continued_values(emitter, drive, x)
    return 1.0 + signal_fraction**2 * (g - 1.0)


def fit_g2(
    data: DataSeries,
    emitter: EmitterParams,
    irf_fwhm: float = 0.0,
    fit_irf: bool = False,
    detuning: float = 0.0,
) -> FitResult:
    """Fit the instrumented resonant g2 to (ps, g2) data.

    Free parameters: ``rabi`` (GHz) and ``signal_fraction``; ``irf_fwhm``
    (ps) too when ``fit_irf`` is set, starting from the given value.
    """
    x, y = data.x, data.y
    sigma = data.y_err if data.y_err is not None else np.ones_like(y)
    absolute = data.y_err is not None
    if len(data) < 5:
        raise DegenerateData("g2 fit needs >= 5 points")
    span = np.max(np.abs(x)) * 1e-3
    if span < 3 / emitter.eta:
        raise DegenerateData("delay range shorter than 3 damping times")
    dip = float(np.min(y[np.argsort(np.abs(x))[:3]]))
    rho0 = float(np.clip(math.sqrt(max(1 - dip, 0.0)), 0.3, 0.999))
    off = abs(emitter.damping_offset)
    irf0 = irf_fwhm if irf_fwhm > 0 else 20.0

    def model(p):
        rabi, rho = p[0], p[1]
        irf = p[2] if fit_irf else irf_fwhm
        return g2_instrumented(emitter, DriveParams(rabi, detuning), x, rho, irf)

    candidates = np.geomspace(max(0.05 * off, 0.5), 30 * max(off, emitter.eta), 60)
    p_extra = [irf0] if fit_irf else []
    costs = [np.sum(((model([c, rho0, *p_extra]) - y) / sigma) ** 2) for c in candidates]
    rabi0 = float(candidates[int(np.argmin(costs))])

    names = ["rabi", "signal_fraction"] + (["irf_fwhm"] if fit_irf else [])
    lower = [1e-6, 1e-3] + ([0.0] if fit_irf else [])
    upper = [np.inf, 1.0] + ([np.inf] if fit_irf else [])
    fit, _, _ = _run(
        names,
        lambda p: (model(p) - y) / sigma,
        [rabi0, rho0, *p_extra],
        lower,
        upper,
        absolute,
        transform=[1 / TWO_PI, 1.0] + ([1.0] if fit_irf else []),
    )
    rabi = fit.params["rabi"] * TWO_PI
    drive = DriveParams(rabi, detuning)
    irf_used = fit.params.get("irf_fwhm", irf_fwhm)
    fit.extras.update(
        g2_zero=float(g2_instrumented(emitter, drive, [0.0], fit.params["signal_fraction"], irf_used)[0]),
        units="rabi GHz, irf ps",
    )
    rel = None if fit.std_errors is None else fit.std_errors["rabi"] / max(fit.params["rabi"], 1e-300)
    if mu_squared(emitter, drive) <= 0 or rel is None or rel > 0.2:
        fit.flags.append("rabi_underconstrained")
    return fit


# --------------------------------------------------------------------------
# visibility


def fit_visibility(data: DataSeries, template: VisibilityModel) -> FitResult:
    """Fit t2 (ps) and the coherent fraction to visibility against delay (ps).

    t1, the Rabi frequency and the laser coherence time come from ``template``.
    """
    x, y = data.x * 1e-3, data.y
    sigma = data.y_err if data.y_err is not None else np.ones_like(y)
    t1 = template.emitter.t1
    rabi = template.drive.rabi
    # t2 must keep mu real: |1/t1 - 1/t2|/2 < rabi
    t2_min = 1.0 / (1.0 / t1 + 2 * rabi) * (1 + 1e-6)
    t2_max = 2 * t1
    if 1.0 / t1 - 2 * rabi > 0:
        t2_max = min(t2_max, 1.0 / (1.0 / t1 - 2 * rabi) * (1 - 1e-6))

    def model(p):
        t2, c = p
        em = EmitterParams(t1, t2)
        m = VisibilityModel(c, template.laser_coherence_time, em, template.drive)
        return visibility_values(m, x)

    far = np.abs(x) >= 0.8 * np.max(np.abs(x))
    c0 = float(np.clip(np.mean(y[far] / np.exp(-np.abs(x[far]) / template.laser_coherence_time)), 0.0, 0.99))
    grid = np.linspace(t2_min, t2_max, 40)[1:-1]
    costs = [np.sum(((model([t, c0]) - y) / sigma) ** 2) for t in grid]
    t20 = float(grid[int(np.argmin(costs))])
    fit, _, _ = _run(
        ["t2", "coherent_fraction"],
        lambda p: (model(p) - y) / sigma,
        [t20, c0],
        [t2_min, 0.0],
        [t2_max, 1.0],
        data.y_err is not None,
        transform=[1e3, 1.0],
    )
    fit.extras.update(units="t2 ps")
    return fit


# --------------------------------------------------------------------------
# cascade


def _cascade_noise(x, y, y_err):
    if y_err is not None:
        return float(np.median(y_err))
    far = np.abs(x) >= 0.7 * np.max(np.abs(x))
    return float(np.std(y[far])) if np.count_nonzero(far) > 3 else float(np.std(y))


def cascade_order_from_data(x, y, y_err=None) -> CascadeOrder:
    """Emission order from the sign of the (smoothed) bunching peak delay.

    Raises CascadeAmbiguity when there is no significant bunching or when
    the two delay signs carry the same excess within noise.
    """
    excess = np.asarray(y, dtype=float) - 1.0
    noise = max(_cascade_noise(x, y, y_err), 1e-12)
    smooth = np.convolve(excess, np.ones(5) / 5, mode="same") if excess.size >= 5 else excess
    i = int(np.argmax(smooth))
    if smooth[i] < 5 * noise / math.sqrt(min(5, excess.size)):
        raise CascadeAmbiguity("no significant bunching in the cross-correlation")
    pos = excess[x > 0].sum()
    neg = excess[x < 0].sum()
    n_side = max(np.count_nonzero(x > 0), 1)
    if abs(pos - neg) < 3 * noise * math.sqrt(2 * n_side):
        raise CascadeAmbiguity("cross-correlation is symmetric about zero delay")
    if x[i] == 0:
        return CascadeOrder.T_HERALDS_F if pos > neg else CascadeOrder.F_HERALDS_T
    return CascadeOrder.T_HERALDS_F if x[i] > 0 else CascadeOrder.F_HERALDS_T


def fit_cascade(data: DataSeries) -> FitResult:
    """Fit tau_rise, tau_fall (ps) and amplitude of the cascade model.

    The order is fixed beforehand from the sign of the peak delay.
    """
    x, y = data.x, data.y
    sigma = data.y_err if data.y_err is not None else np.ones_like(y)
    order = cascade_order_from_data(x, y, data.y_err)

    def model(p):
        return cascade_values(CascadeModel(p[0], p[1], p[2], order), x)

    excess_max = float(np.max(y) - 1.0)
    best = None
    for r in np.geomspace(5, 500, 12):
        for f in np.geomspace(5, 500, 12):
            unit = cascade_values(CascadeModel(r, f, 1.0, order), x) - 1.0
            a = float(np.dot(unit, (y - 1) / sigma**2) / max(np.dot(unit, unit / sigma**2), 1e-300))
            if a <= 0:
                continue
            c = np.sum(((1 + a * unit - y) / sigma) ** 2)
            if best is None or c < best[0]:
                best = (c, r, f, a)
    if best is None:
        best = (None, 50.0, 100.0, max(excess_max, 1e-3) * 3)
    _, r0, f0, a0 = best
    fit, _, _ = _run(
        ["tau_rise", "tau_fall", "amplitude"],
        lambda p: (model(p) - y) / sigma,
        [r0, f0, a0],
        [1e-3, 1e-3, 1e-9],
        [np.inf, np.inf, np.inf],
        data.y_err is not None,
    )
    fit.extras.update(order=order.value, units="ps")
    return fit


FIT_KINDS = ("saturation", "lifetime", "spectrum", "g2", "visibility", "cascade")
