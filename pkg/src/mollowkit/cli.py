"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 domain error
(e.g. drive below the oscillation threshold), 3 fit did not converge.
Errors other than usage are also written to stderr as one JSON line.

All frequencies on the command line and in files are cyclic (GHz);
delays are ps.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import estimation as est
from . import instrument as ins
from . import synthetic
from .correlations import (
    CascadeModel,
    CascadeOrder,
    VisibilityModel,
    cascade_cross_correlation,
    g1_incoh_closed,
    g2_closed,
    g1_incoh_values,
    g2_continued,
    visibility_values,
)
from .dynamics import coherent_power, oracle_g2, oracle_spectrum
from .errors import ConfigError, MollowError
from .params import TWO_PI, DriveParams
from .qjmc import CorrelogramConfig, correlogram, read_tags, simulate_stream, write_tags
from .scenario import RABI_PER_SQRT_FLUX, Scenario, load_scenario
from .spectra import coefficients, rabi_from_flux, sideband_positions, spectrum_closed
from .tables import TableError, read_table, write_table
from .traces import CorrelationKind, CorrelationTrace, SpectrumMode, SpectrumTrace

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NOT_CONVERGED = 0, 1, 2, 3
FIGURES = ("fig2", "fig3a", "fig3d", "fig4a", "fig4b", "figS2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _report(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def _scenario(args) -> Scenario:
    return load_scenario(args.config) if getattr(args, "config", None) else Scenario()


def _header(sc: Scenario) -> list[str]:
    return [
        f"mollowkit {__version__}",
        "frequencies are cyclic (GHz), delays ps",
        "scenario " + json.dumps(sc.as_dict(), sort_keys=True),
    ]


# --------------------------------------------------------------------------
# spectrum


def _spectrum_grid(span_ghz: float, points: int) -> np.ndarray:
    if points < 5 or span_ghz <= 0:
        raise UsageError("--points must be >= 5 and --span positive")
    if points % 2 == 0:
        points += 1
    return np.linspace(-span_ghz, span_ghz, points) * TWO_PI


def cmd_spectrum(args) -> int:
    sc = _scenario(args)
    grid = _spectrum_grid(args.span, args.points)
    mode = SpectrumMode(args.mode)
    if mode is SpectrumMode.ORACLE:
        spec = oracle_spectrum(sc.emitter, sc.drive, grid)
    else:
        spec = spectrum_closed(sc.emitter, sc.drive, grid, mode)
    if args.fp_filter:
        try:
            spec = ins.fp_filter_spectrum(
                spec, sc.instrument.fp_linewidth, coherent_power(sc.emitter, sc.drive)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = Path(args.out)
    comments = _header(sc) + [f"mode {mode.value}", "intensity per rad/ns, integrates to the incoherent population"]
    comments += [f"warning {w}" for w in spec.warnings]
    write_table(out, {"offset_GHz": spec.offsets_ghz, "intensity": spec.intensities}, comments)
    sidecar = out.with_name(out.stem + ".coeffs.jsonl")
    lines = []
    for m in (SpectrumMode.STANDARD, SpectrumMode.LITERAL):
        c = coefficients(sc.emitter, sc.drive, m)
        lines.append(json.dumps({
            "mode": m.value,
            "a_coef": c.a_coef,
            "b_coef": c.b_coef,
            "eta": c.eta,
            "mu": c.mu,
            "n_inf": c.n_inf,
            "units": "a rad^2/ns^2, b rad^3/ns^3, eta 1/ns, mu rad/ns",
        }, sort_keys=True))
    sidecar.write_text("\n".join(lines) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# correlation traces


def _tau_grid(max_tau: float, step: float) -> np.ndarray:
    if step <= 0 or max_tau < 10 * step:
        raise UsageError("need --step > 0 and --max-tau >= 10 steps")
    n = int(round(max_tau / step))
    return np.arange(-n, n + 1) * step * 1e-3


def _write_trace(args, sc, trace: CorrelationTrace, note: str) -> int:
    write_table(args.out, {"tau_ps": trace.taus_ps, "value": trace.values},
                _header(sc) + [note])
    return EXIT_OK


def cmd_g2(args) -> int:
    sc = _scenario(args)
    taus = _tau_grid(args.max_tau, args.step)
    if args.model == "oracle":
        half = oracle_g2(sc.emitter, sc.drive, taus[taus >= 0])
        vals = np.interp(np.abs(taus), half.taus, half.values)
        trace = CorrelationTrace(taus, vals, CorrelationKind.G2)
    elif args.model == "continued":
        trace = g2_continued(sc.emitter, sc.drive, taus)
    else:
        trace = g2_closed(sc.emitter, sc.drive, taus)
    note = f"g2 model {args.model}, raw"
    if args.instrumented:
        rho = ins.signal_fraction_from_ratio(sc.signal_to_background)
        trace = ins.add_background_g2(ins.convolve_irf(trace, sc.instrument.irf_fwhm), rho)
        note = (f"g2 model {args.model}, IRF {sc.instrument.irf_fwhm} ps, "
                f"signal:background {sc.signal_to_background}")
    return _write_trace(args, sc, trace, note)


def cmd_g1(args) -> int:
    sc = _scenario(args)
    trace = g1_incoh_closed(sc.emitter, sc.drive, _tau_grid(args.max_tau, args.step))
    note = "incoherent g1, normalized at zero delay"
    if args.instrumented:
        trace = ins.convolve_irf(trace, sc.instrument.irf_fwhm)
        note += f", IRF {sc.instrument.irf_fwhm} ps"
    return _write_trace(args, sc, trace, note)


def cmd_cascade(args) -> int:
    sc = _scenario(args)
    trace = cascade_cross_correlation(sc.cascade, _tau_grid(args.max_tau, args.step))
    m = sc.cascade
    note = f"cascade rise {m.tau_rise} ps, fall {m.tau_fall} ps, amplitude {m.amplitude}, order {m.order.value}"
    if args.instrumented:
        trace = ins.convolve_irf(trace, sc.instrument.irf_fwhm)
        note += f", IRF {sc.instrument.irf_fwhm} ps"
    return _write_trace(args, sc, trace, note)


# --------------------------------------------------------------------------
# fits


def _series(path, x_unit, y_unit) -> est.DataSeries:
    cols, _ = read_table(path)
    arrays = list(cols.values())
    if len(arrays) < 2:
        raise TableError(f"{path}: need at least two columns")
    y_err = arrays[2] if len(arrays) > 2 else None
    try:
        return est.DataSeries(arrays[0], arrays[1], y_err, x_unit, y_unit)
    except ValueError as exc:
        raise TableError(f"{path}: {exc}") from None


def cmd_fit(args) -> int:
    sc = _scenario(args)
    kind = args.kind
    if kind == "saturation":
        res = est.fit_saturation(_series(args.data, "n_bar", "MHz"), eta_sys=sc.saturation.eta_sys)
    elif kind == "lifetime":
        irf = sc.instrument.irf_fwhm if args.irf is None else args.irf
        res = est.fit_lifetime(_series(args.data, "ps", "counts"), irf)
    elif kind == "spectrum":
        d = _series(args.data, "GHz", "a.u.")
        spec_trace = _spectrum_from_series(d)
        res = est.fit_spectrum_rabi(spec_trace, sc.emitter, d.y_err, sc.drive.detuning)
    elif kind == "g2":
        irf = 0.0 if args.irf is None else args.irf
        res = est.fit_g2(_series(args.data, "ps", "g2"), sc.emitter, irf, args.fit_irf, sc.drive.detuning)
    elif kind == "visibility":
        tmpl = VisibilityModel(sc.coherent_fraction, sc.laser_coherence_ns, sc.emitter, sc.drive)
        res = est.fit_visibility(_series(args.data, "ps", "visibility"), tmpl)
    else:
        res = est.fit_cascade(_series(args.data, "ps", "g"))
    payload = {"kind": kind, **res.to_dict()}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not res.converged:
        return _report("NotConverged", f"{kind} fit did not converge (gradient {res.grad_norm:.3g})",
                       EXIT_NOT_CONVERGED)
    return EXIT_OK


def _spectrum_from_series(d: est.DataSeries):
    try:
        return SpectrumTrace(d.x * TWO_PI, d.y, SpectrumMode.STANDARD)
    except ValueError as exc:
        raise TableError(str(exc)) from None


# --------------------------------------------------------------------------
# Monte Carlo and correlation


def cmd_mc(args) -> int:
    sc = _scenario(args)
    if args.duration <= 0:
        raise UsageError("--duration must be positive")
    if not 0 < args.efficiency <= 1:
        raise UsageError("--efficiency must lie in (0, 1]")
    stream = simulate_stream(sc.emitter, sc.drive, args.duration * 1e9, args.efficiency,
                             args.seed, args.segments)
    write_tags(args.tags, stream)
    print(json.dumps({"tags": len(stream), "duration_ps": stream.total_duration,
                      "rate_mhz": stream.rate * 1e6, "seed": args.seed}))
    return EXIT_OK


def cmd_correlate(args) -> int:
    streams = []
    for p in args.tags:
        try:
            streams.append(read_tags(p))
        except (OSError, ValueError) as exc:
            raise UsageError(f"{p}: cannot read tags ({exc})") from None
    try:
        cfg = CorrelogramConfig(args.bin, args.max_tau, args.normalization)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if any(len(s) == 0 for s in streams):
        raise UsageError("cannot correlate an empty stream")
    cg = correlogram(streams[0], cfg, streams[1] if len(streams) > 1 else None)
    tr = cg.trace()
    # Poisson error of each bin in the same normalization as the values
    if cfg.normalization.value == "baseline":
        err = np.sqrt(np.maximum(cg.counts, 1)) / cg.expected_flat
    else:
        err = np.sqrt(np.maximum(cg.counts, 1)).astype(float)
    write_table(
        args.out,
        {"tau_ps": tr.taus_ps, "value": tr.values, "value_err": err},
        [f"mollowkit {__version__}", f"{'auto' if cg.auto else 'cross'} correlation, "
         f"bin {args.bin} ps, normalization {cfg.normalization.value}",
         f"tags {cg.n_a} x {cg.n_b}, duration {cg.duration} ps"],
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# figure data


def _fig2(sc, out, seed):
    n = np.geomspace(0.01, 100, 101)
    total, bg, qd = ins.detected_counts(sc.saturation, sc.instrument, n, sc.calibration)
    write_table(out / "fig2.csv", {"n_bar": n, "total_MHz": total, "qd_MHz": qd},
                _header(sc) + ["background = total - qd is linear in n_bar"])
    return [{
        "file": "fig2.csv",
        "parameters": {
            "s_sat_ghz": sc.saturation.s_sat,
            "n0": sc.saturation.n0,
            "eta_sys": sc.saturation.eta_sys,
            "plateau_mhz": sc.saturation.plateau_mhz,
            "background_slope_mhz": ins.background_slope(sc.instrument, sc.calibration),
            "crossover_n_bar": ins.crossover_flux(sc.saturation, sc.instrument, sc.calibration),
        },
        "provenance": {"qd_MHz": "saturation law", "total_MHz": "saturation law + linear background"},
    }]


def _fig3a(sc, out, seed):
    fluxes = [0.6, 1.2, 2.4, 4.8, 7.2, 9.6]
    grid = _spectrum_grid(20.0, 801)
    cols = {"offset_GHz": grid / TWO_PI}
    for nb in fluxes:
        drive = DriveParams.from_ghz(rabi_from_flux(RABI_PER_SQRT_FLUX, nb))
        cols[f"n_bar_{nb:g}"] = spectrum_closed(sc.emitter, drive, grid).intensities
    write_table(out / "fig3a.csv", cols, _header(sc) + ["closed-form spectra, standard mode"])
    rows = {"n_bar": [], "sqrt_n_bar": [], "rabi_GHz": [], "rabi_err_GHz": []}
    for i, nb in enumerate([2.4, 4.8, 7.2, 9.6]):
        rabi = rabi_from_flux(RABI_PER_SQRT_FLUX, nb)
        spec, err = synthetic.spectrum_data(rabi, sc.emitter, seed=seed + i)
        res = est.fit_spectrum_rabi(spec, sc.emitter, err)
        rows["n_bar"].append(nb)
        rows["sqrt_n_bar"].append(math.sqrt(nb))
        rows["rabi_GHz"].append(res.params["rabi"])
        rows["rabi_err_GHz"].append(res.std_errors["rabi"])
    x, y, e = (np.asarray(rows[k]) for k in ("sqrt_n_bar", "rabi_GHz", "rabi_err_GHz"))
    (slope, icpt), cov = np.polyfit(x, y, 1, w=1 / e, cov="unscaled")
    write_table(out / "fig3b.csv", rows, _header(sc) + ["Rabi frequencies fitted to synthetic spectra"])
    return [
        {"file": "fig3a.csv", "parameters": {"n_bar": fluxes, "rabi_per_sqrt_flux_ghz": RABI_PER_SQRT_FLUX},
         "provenance": "closed-form spectrum"},
        {"file": "fig3b.csv", "parameters": {"seed": seed, "slope_ghz": slope, "intercept_ghz": icpt,
                                              "slope_err": math.sqrt(cov[0, 0]),
                                              "intercept_err": math.sqrt(cov[1, 1])},
         "provenance": "fits to synthetic Poisson spectra"},
    ]


def _fig3d(sc, out, seed):
    fluxes = [1.2, 2.4, 4.8, 7.2]
    taus = np.arange(-500, 501, 1.0) * 1e-3
    ideal = {"tau_ps": taus * 1e3}
    raw = {"tau_ps": taus * 1e3}
    rho = ins.signal_fraction_from_ratio(sc.signal_to_background)
    for nb in fluxes:
        drive = DriveParams.from_ghz(rabi_from_flux(RABI_PER_SQRT_FLUX, nb))
        tr = g2_continued(sc.emitter, drive, taus)
        ideal[f"n_bar_{nb:g}"] = tr.values
        raw[f"n_bar_{nb:g}"] = ins.add_background_g2(ins.convolve_irf(tr, sc.instrument.irf_fwhm), rho).values
    write_table(out / "fig3d.csv", ideal, _header(sc) + ["ideal g2 (background removed, IRF deconvolved)"])
    write_table(out / "fig3c.csv", raw, _header(sc) + [
        f"g2 with IRF {sc.instrument.irf_fwhm} ps and signal:background {sc.signal_to_background}"])
    return [
        {"file": "fig3d.csv", "parameters": {"n_bar": fluxes}, "provenance": "closed-form g2"},
        {"file": "fig3c.csv", "parameters": {"n_bar": fluxes, "irf_fwhm_ps": sc.instrument.irf_fwhm,
                                              "signal_to_background": sc.signal_to_background},
         "provenance": "closed-form g2 through the instrument chain"},
    ]


def _fig4a(sc, out, seed):
    rabi = 4.0
    det = np.round(np.arange(-8.0, 8.0 + 1e-9, 0.1), 1)
    rows = np.array([sideband_positions(DriveParams.from_ghz(rabi, d)) for d in det])
    write_table(out / "fig4a.csv",
                {"detuning_GHz": det, "lower_GHz": rows[:, 0], "upper_GHz": rows[:, 1], "rayleigh_GHz": rows[:, 2]},
                _header(sc) + [f"Rabi frequency {rabi} GHz"])
    return [{"file": "fig4a.csv", "parameters": {"rabi_ghz": rabi}, "provenance": "arithmetic"}]


def _fig4b(sc, out, seed):
    taus = np.arange(-500, 501, 2.0)
    blue = CascadeModel(57.8, 91.8, 1.0, CascadeOrder.T_HERALDS_F)
    red = CascadeModel(42.9, 95.1, 1.0, CascadeOrder.F_HERALDS_T)
    cols = {"tau_ps": taus}
    for name, m in (("blue_detuned", blue), ("red_detuned", red)):
        cols[name] = cascade_cross_correlation(m, taus * 1e-3).values
    write_table(out / "fig4b.csv", cols, _header(sc) + ["two-exponential cascade model"])
    return [{"file": "fig4b.csv",
             "parameters": {"blue_detuned": [57.8, 91.8, blue.order.value],
                            "red_detuned": [42.9, 95.1, red.order.value]},
             "provenance": "phenomenological model"}]


def _figS2(sc, out, seed):
    delays = np.arange(0, 1001, 2.0)
    model = VisibilityModel(sc.coherent_fraction, sc.laser_coherence_ns, sc.emitter, sc.drive)
    t = delays * 1e-3
    write_table(out / "figS2.csv", {
        "delay_ps": delays,
        "visibility": visibility_values(model, t),
        "incoherent_g1": g1_incoh_values(sc.emitter, sc.drive, t),
    }, _header(sc) + [f"coherent fraction {sc.coherent_fraction}, laser coherence {sc.laser_coherence_ns} ns"])
    return [{"file": "figS2.csv",
             "parameters": {"coherent_fraction": sc.coherent_fraction,
                            "laser_coherence_ns": sc.laser_coherence_ns},
             "provenance": "closed-form visibility"}]


_FIGS = {"fig2": _fig2, "fig3a": _fig3a, "fig3d": _fig3d, "fig4a": _fig4a, "fig4b": _fig4b, "figS2": _figS2}


def cmd_reproduce(args) -> int:
    if args.figure not in _FIGS:
        raise UsageError(f"unknown figure {args.figure!r}; choose from {', '.join(FIGURES)}")
    sc = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = _FIGS[args.figure](sc, out, args.seed)
    manifest = {
        "figure": args.figure,
        "version": __version__,
        "scenario": sc.as_dict(),
        "seed": args.seed,
        "curves": curves,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mollowkit", description="Resonance fluorescence simulation and fitting.")
    p.add_argument("--version", action="version", version=f"mollowkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_arg(sp):
        sp.add_argument("--config", help="scenario file (INI); built-in defaults when omitted")

    sp = sub.add_parser("spectrum", help="incoherent emission spectrum")
    scenario_arg(sp)
    sp.add_argument("--mode", choices=[m.value for m in SpectrumMode], default="standard")
    sp.add_argument("--span", type=float, default=20.0, help="half-width of the grid (GHz)")
    sp.add_argument("--points", type=int, default=801)
    sp.add_argument("--fp-filter", action="store_true",
                    help="apply the scanning-cavity response and the elastic peak")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_spectrum)

    for name, func, helptext in (
        ("g2", cmd_g2, "second-order correlation"),
        ("g1", cmd_g1, "incoherent first-order coherence"),
        ("cascade", cmd_cascade, "sideband cross-correlation model"),
    ):
        sp = sub.add_parser(name, help=helptext)
        scenario_arg(sp)
        grp = sp.add_mutually_exclusive_group()
        grp.add_argument("--raw", dest="instrumented", action="store_false", default=False)
        grp.add_argument("--instrumented", dest="instrumented", action="store_true")
        sp.add_argument("--max-tau", type=float, default=500.0, help="ps")
        sp.add_argument("--step", type=float, default=1.0, help="ps")
        sp.add_argument("--out", required=True)
        if name == "g2":
            sp.add_argument("--model", choices=["closed", "continued", "oracle"], default="closed")
        sp.set_defaults(func=func)

    sp = sub.add_parser("fit", help="fit a model to a CSV dataset")
    scenario_arg(sp)
    sp.add_argument("kind", choices=est.FIT_KINDS)
    sp.add_argument("--data", required=True, help="CSV with x, y and optional y_err columns")
    sp.add_argument("--out", help="JSON output (stdout when omitted)")
    sp.add_argument("--irf", type=float, help="IRF FWHM in ps (lifetime, g2)")
    sp.add_argument("--fit-irf", action="store_true", help="g2: fit the IRF width too")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("mc", help="Monte Carlo photon time tags")
    scenario_arg(sp)
    sp.add_argument("--duration", type=float, required=True, help="ms")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--efficiency", type=float, default=1.0)
    sp.add_argument("--segments", type=int, default=1)
    sp.add_argument("--tags", required=True, help="output .bin or .csv")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("correlate", help="histogram delays from tag files")
    sp.add_argument("--tags", nargs="+", required=True, help="one file (auto) or two (cross)")
    sp.add_argument("--bin", type=float, default=4.0, help="ps")
    sp.add_argument("--max-tau", type=float, default=500.0, help="ps")
    sp.add_argument("--normalization", choices=["baseline", "raw"], default="baseline")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("reproduce", help="regenerate the data behind a figure")
    scenario_arg(sp)
    sp.add_argument("figure", help=", ".join(FIGURES))
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "tags", None) and args.command == "correlate" and len(args.tags) > 2:
        parser.error("correlate takes one or two tag files")
    try:
        return args.func(args)
    except (ConfigError, TableError, UsageError) as exc:
        return _report(type(exc).__name__, str(exc), EXIT_USAGE)
    except MollowError as exc:
        return _report(type(exc).__name__, str(exc), EXIT_DOMAIN)
    except OSError as exc:
        return _report("OSError", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
