"""Scenario files: INI sections of ``key = value`` pairs.

All frequencies are cyclic (GHz, MHz), durations ps unless the key says
otherwise.  Schema (every section optional except where noted)::

    [emitter]              ; required when a file is given
    t1_ps = 56.8
    t2_ps = 103.5

    [drive]                ; exactly one of rabi_ghz, n_bar, power_nw
    rabi_ghz = 4.0
    n_bar = 2.4
    power_nw = 9.3
    rabi_per_sqrt_flux_ghz = 2.582
    wavelength_nm = 911.55
    detuning_ghz = 0.0

    [instrument]
    irf_fwhm_ps = 40
    fp_linewidth_mhz = 15
    grating_bandwidth_ghz = 8
    background_reflectivity = 0.0089
    detection_efficiency = 0.03
    background_slope_mhz = ...   ; override of the derived value
    signal_to_background = 50

    [saturation]
    s_sat_ghz = 2.716
    n0 = 0.125
    eta_sys = 0.03

    [blinking]
    rate_on_to_off_per_ms = 0.254
    rate_off_to_on_per_ms = 0.746
    bright_rate = 48.3

    [cascade]
    tau_rise_ps = 57.8
    tau_fall_ps = 91.8
    amplitude = 1.0
    order = t_heralds_f

    [visibility]
    coherent_fraction = 0.35
    laser_coherence_ns = 5.0

Unknown sections or keys are rejected with the line they appear on.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .correlations import CascadeModel, CascadeOrder
from .errors import ConfigError
from .instrument import BlinkingModel, FluxCalibration, InstrumentModel, SaturationParams, flux_from_power
from .params import DriveParams, EmitterParams
from .spectra import rabi_from_flux

WAVELENGTH_NM = 911.55
RABI_PER_SQRT_FLUX = 2.582

SCHEMA = {
    "emitter": ("t1_ps", "t2_ps"),
    "drive": ("rabi_ghz", "n_bar", "power_nw", "rabi_per_sqrt_flux_ghz", "wavelength_nm", "detuning_ghz"),
    "instrument": (
        "irf_fwhm_ps",
        "fp_linewidth_mhz",
        "grating_bandwidth_ghz",
        "background_reflectivity",
        "detection_efficiency",
        "background_slope_mhz",
        "signal_to_background",
    ),
    "saturation": ("s_sat_ghz", "n0", "eta_sys"),
    "blinking": ("rate_on_to_off_per_ms", "rate_off_to_on_per_ms", "bright_rate"),
    "cascade": ("tau_rise_ps", "tau_fall_ps", "amplitude", "order"),
    "visibility": ("coherent_fraction", "laser_coherence_ns"),
}


@dataclass
class Scenario:
    emitter: EmitterParams = field(default_factory=lambda: EmitterParams.from_ps(56.8, 103.5))
    drive: DriveParams = field(default_factory=lambda: DriveParams.from_ghz(4.0))
    n_bar: float | None = 2.4
    calibration: FluxCalibration = field(default_factory=lambda: FluxCalibration(WAVELENGTH_NM, 56.8))
    instrument: InstrumentModel = field(default_factory=InstrumentModel)
    signal_to_background: float = 50.0
    saturation: SaturationParams = field(default_factory=lambda: SaturationParams(2.716, 0.125, 0.03))
    blinking: BlinkingModel = field(default_factory=lambda: BlinkingModel.from_ratio(1.34))
    cascade: CascadeModel = field(default_factory=lambda: CascadeModel(57.8, 91.8, 1.0))
    coherent_fraction: float = 0.35
    laser_coherence_ns: float = 5.0

    def as_dict(self) -> dict:
        return {
            "t1_ps": self.emitter.t1 * 1e3,
            "t2_ps": self.emitter.t2 * 1e3,
            "rabi_ghz": self.drive.rabi_ghz,
            "detuning_ghz": self.drive.detuning_ghz,
            "n_bar": self.n_bar,
            "irf_fwhm_ps": self.instrument.irf_fwhm,
            "signal_to_background": self.signal_to_background,
        }


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section:
            m = re.match(r"\s*([^=:#;\s]+)\s*[=:]", line)
            if m and m.group(1).strip().lower() == key:
                return i
    return None


def _where(path, text, section, key=None) -> str:
    line = _line_of(text, section, key)
    return f"{path}:{line}" if line else str(path)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; raises ConfigError on any problem."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_scenario(text, str(path))


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None

    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{_where(source, text, sec)}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{_where(source, text, sec, key)}: unknown key '{key}' in [{sec}]")

    def num(sec, key, default=None, required=False):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                return float(raw)
            except ValueError:
                raise ConfigError(
                    f"{_where(source, text, sec, key)}: [{sec}] {key} = {raw!r} is not a number"
                ) from None
        if required:
            raise ConfigError(f"{source}: missing required field [{sec}] {key}")
        return default

    def build(sec, factory, *args, **kw):
        try:
            return factory(*args, **kw)
        except ValueError as exc:
            raise ConfigError(f"{_where(source, text, sec)}: [{sec}] {exc}") from None

    sc = Scenario()
    if not cp.has_section("emitter"):
        raise ConfigError(f"{source}: missing required section [emitter]")
    t1 = num("emitter", "t1_ps", required=True)
    t2 = num("emitter", "t2_ps", required=True)
    sc.emitter = build("emitter", EmitterParams.from_ps, t1, t2)

    wavelength = num("drive", "wavelength_nm", WAVELENGTH_NM)
    sc.calibration = build("drive", FluxCalibration, wavelength, t1)
    given = [k for k in ("rabi_ghz", "n_bar", "power_nw") if cp.has_option("drive", k)]
    if len(given) > 1:
        raise ConfigError(f"{_where(source, text, 'drive')}: give only one of {', '.join(given)}")
    detuning = num("drive", "detuning_ghz", 0.0)
    k = num("drive", "rabi_per_sqrt_flux_ghz", RABI_PER_SQRT_FLUX)
    if given == ["rabi_ghz"]:
        rabi = num("drive", "rabi_ghz")
        sc.n_bar = None
    else:
        if given == ["power_nw"]:
            p = num("drive", "power_nw")
            if p < 0:
                raise ConfigError(f"{_where(source, text, 'drive', 'power_nw')}: power_nw must be >= 0")
            sc.n_bar = flux_from_power(sc.calibration, p)
        elif given == ["n_bar"]:
            sc.n_bar = num("drive", "n_bar")
        if sc.n_bar < 0 or k < 0:
            raise ConfigError(f"{_where(source, text, 'drive')}: n_bar and rabi_per_sqrt_flux_ghz must be >= 0")
        rabi = rabi_from_flux(k, sc.n_bar)
    sc.drive = build("drive", DriveParams.from_ghz, rabi, detuning)

    d = InstrumentModel()
    sc.instrument = build(
        "instrument",
        InstrumentModel,
        irf_fwhm=num("instrument", "irf_fwhm_ps", d.irf_fwhm),
        fp_linewidth=num("instrument", "fp_linewidth_mhz", d.fp_linewidth),
        grating_bandwidth=num("instrument", "grating_bandwidth_ghz", d.grating_bandwidth),
        background_reflectivity=num("instrument", "background_reflectivity", d.background_reflectivity),
        detection_efficiency=num("instrument", "detection_efficiency", d.detection_efficiency),
        background_slope=num("instrument", "background_slope_mhz", None),
    )
    sc.signal_to_background = num("instrument", "signal_to_background", sc.signal_to_background)
    if sc.signal_to_background <= 0:
        raise ConfigError(f"{_where(source, text, 'instrument', 'signal_to_background')}: must be > 0")

    s = sc.saturation
    sc.saturation = build(
        "saturation",
        SaturationParams,
        num("saturation", "s_sat_ghz", s.s_sat),
        num("saturation", "n0", s.n0),
        num("saturation", "eta_sys", s.eta_sys),
    )
    b = sc.blinking
    sc.blinking = build(
        "blinking",
        BlinkingModel,
        num("blinking", "rate_on_to_off_per_ms", b.rate_on_to_off),
        num("blinking", "rate_off_to_on_per_ms", b.rate_off_to_on),
        num("blinking", "bright_rate", b.bright_rate),
    )
    c = sc.cascade
    order = cp.get("cascade", "order", fallback=c.order.value).strip().lower()
    if order not in {o.value for o in CascadeOrder}:
        raise ConfigError(f"{_where(source, text, 'cascade', 'order')}: unknown order {order!r}")
    sc.cascade = build(
        "cascade",
        CascadeModel,
        num("cascade", "tau_rise_ps", c.tau_rise),
        num("cascade", "tau_fall_ps", c.tau_fall),
        num("cascade", "amplitude", c.amplitude),
        CascadeOrder(order),
    )
    sc.coherent_fraction = num("visibility", "coherent_fraction", sc.coherent_fraction)
    sc.laser_coherence_ns = num("visibility", "laser_coherence_ns", sc.laser_coherence_ns)
    if not 0 <= sc.coherent_fraction <= 1 or sc.laser_coherence_ns <= 0:
        raise ConfigError(f"{_where(source, text, 'visibility')}: need coherent_fraction in [0, 1] "
                          "and laser_coherence_ns > 0")
    return sc
