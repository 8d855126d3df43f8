"""Quantum-jump photon streams and a time-tag correlator.

Every detected photon leaves the emitter in its ground state, so emission
times form a renewal process: waiting times are independent draws from
the survival function S(tau) of the no-photon evolution.  Dephasing jumps
emit nothing, so they are averaged into that evolution exactly.
:func:`simulate_stream` samples the waiting times by inverting a
tabulated S(tau) with cubic Hermite refinement.  :func:`simulate_trajectory`
runs the explicit pure-state unraveling (dephasing as a sigma_z jump
channel) for cross-checks on short records.

Tag times are in ps.  Random numbers come from the counter-based Philox
generator; segments get independent child seeds via ``SeedSequence.spawn``.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from . import instrument
from .dynamics import liouvillian
from .params import DriveParams, EmitterParams
from .rng import make_rng
from .traces import CorrelationKind, CorrelationTrace

TAG_MAGIC = b"QJMC"
TAG_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class PhotonStream:
    """Sorted photon arrival times ``tags`` (ps) within [0, total_duration]."""

    tags: np.ndarray
    total_duration: float
    seed: int | None = None

    def __post_init__(self):
        tags = np.asarray(self.tags, dtype=float)
        if tags.ndim != 1:
            raise ValueError("tags must be 1-d")
        if tags.size and (tags[0] < 0 or tags[-1] > self.total_duration):
            raise ValueError("tags must lie within [0, total_duration]")
        if tags.size > 1 and np.any(np.diff(tags) < 0):
            raise ValueError("tags must be sorted")
        object.__setattr__(self, "tags", tags)

    def __len__(self):
        return self.tags.size

    @property
    def rate(self) -> float:
        """Mean count rate in 1/ps."""
        return self.tags.size / self.total_duration


# --------------------------------------------------------------------------
# waiting-time distribution


# inverse lookup on v = (1 - u)**(1/3), smooth because 1 - S ~ tau**3 at
# short times; below _U_TAIL the exact inverter is used
_N_INVERSE = 1 << 16
_U_TAIL = 0.05


@dataclass(frozen=True)
class WaitingTimeTable:
    """Survival S and emission density W on a uniform grid of ``step`` ns."""

    taus: np.ndarray
    survival: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        v_max = (1.0 - _U_TAIL) ** (1 / 3)
        v = np.linspace(0.0, v_max, _N_INVERSE)
        object.__setattr__(self, "_v_step", v_max / (_N_INVERSE - 1))
        object.__setattr__(self, "_tau_of_v", self.invert(1.0 - v**3))

    @property
    def step(self) -> float:
        return float(self.taus[1] - self.taus[0])

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Waiting times (ns) with S(tau) = u, for u uniform on (0, 1)."""
        u = np.asarray(u, dtype=float)
        pos = np.cbrt(1.0 - u) / self._v_step
        k = np.minimum(pos.astype(np.int64), _N_INVERSE - 2)
        frac = pos - k
        tv = self._tau_of_v
        out = tv[k] + frac * (tv[k + 1] - tv[k])
        tail = u < _U_TAIL
        if np.any(tail):
            out[tail] = self.invert(u[tail])
        return out

    def invert(self, u: np.ndarray) -> np.ndarray:
        """Exact inverse of the Hermite-interpolated survival function."""
        s = self.survival
        # s decreases; search on -s
        i = np.searchsorted(-s, -u, side="left") - 1
        i = np.clip(i, 0, s.size - 2)
        h = self.step
        s0, s1 = s[i], s[i + 1]
        d0, d1 = -self.density[i] * h, -self.density[i + 1] * h
        span = s0 - s1
        frac = np.where(span > 0, (s0 - u) / np.where(span > 0, span, 1.0), 0.0)
        for _ in range(4):
            f2, f3 = frac**2, frac**3
            h00 = 2 * f3 - 3 * f2 + 1
            h10 = f3 - 2 * f2 + frac
            h01 = -2 * f3 + 3 * f2
            h11 = f3 - f2
            val = h00 * s0 + h10 * d0 + h01 * s1 + h11 * d1 - u
            dh00 = 6 * f2 - 6 * frac
            dh10 = 3 * f2 - 4 * frac + 1
            dh11 = 3 * f2 - 2 * frac
            der = dh00 * s0 + dh10 * d0 - dh00 * s1 + dh11 * d1
            ok = der < 0
            frac = np.where(ok, frac - val / np.where(ok, der, -1.0), frac)
            frac = np.clip(frac, 0.0, 1.0)
        return self.taus[i] + frac * h


def _conditional_generator(emitter: EmitterParams, drive: DriveParams) -> np.ndarray:
    """Liouvillian without the photon-emission jump term."""
    gen = liouvillian(emitter, drive).copy()
    # jump term gamma1 sigma- rho sigma+ maps rho_ee (0) into rho_gg (3)
    gen[3, 0] -= emitter.gamma1
    return gen


@lru_cache(maxsize=64)
def waiting_time_table(emitter: EmitterParams, drive: DriveParams,
                       points_per_t1: int = 400, tail: float = 1e-17) -> WaitingTimeTable:
    """Tabulate survival and emission density after a photon emission."""
    if drive.rabi == 0:
        raise ValueError("no emission without drive")
    gen = _conditional_generator(emitter, drive)
    fastest = max(emitter.gamma1, drive.generalized_rabi, emitter.gamma2)
    step = min(emitter.t1, 1.0 / fastest) / points_per_t1 * 4
    prop = expm(gen * step)
    x = np.array([0, 0, 0, 1], dtype=complex)  # ground state
    surv, dens = [], []
    for _ in range(50_000_000):
        s = (x[0] + x[3]).real
        surv.append(s)
        dens.append(emitter.gamma1 * x[0].real)
        if s < tail:
            break
        x = prop @ x
    taus = np.arange(len(surv)) * step
    return WaitingTimeTable(taus, np.array(surv), np.array(dens))


def _segment_tags(table, duration_ns, burn_ns, efficiency, rng, expected_rate):
    chunk = int(min(max(expected_rate * (duration_ns + burn_ns) * 0.25, 1e4), 2e6))
    t = -burn_ns
    out = []
    while t < duration_ns:
        w = table.sample(rng.random(chunk))
        times = t + np.cumsum(w)
        t = times[-1]
        if efficiency < 1.0:
            times = times[rng.random(chunk) < efficiency]
        out.append(times[(times >= 0) & (times <= duration_ns)])
    return np.concatenate(out) if out else np.empty(0)


def simulate_stream(
    emitter: EmitterParams,
    drive: DriveParams,
    duration: float,
    efficiency: float = 1.0,
    seed: int = 0,
    n_segments: int = 1,
    burn_in_t1: float = 10.0,
) -> PhotonStream:
    """Detected photon arrival times over ``duration`` ps.

    Each of ``n_segments`` segments starts from the ground state ``burn_in_t1``
    lifetimes before its window and uses its own child seed, so segments
    are independent and may be generated in any order.
    """
    if not 0 < efficiency <= 1:
        raise ValueError("efficiency must lie in (0, 1]")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if drive.rabi == 0:
        return PhotonStream(np.empty(0), duration, seed)
    table = waiting_time_table(emitter, drive)
    mean_wait = float(np.trapezoid(table.survival, table.taus))
    seg_ns = duration * 1e-3 / n_segments
    burn = burn_in_t1 * emitter.t1
    parts = []
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(n_segments)):
        rng = make_rng(child)
        tags = _segment_tags(table, seg_ns, burn, efficiency, rng, 1.0 / mean_wait)
        parts.append((tags + k * seg_ns) * 1e3)
    tags = np.concatenate(parts)
    return PhotonStream(np.clip(tags, 0.0, duration), duration, seed)


def emission_rate(emitter: EmitterParams, drive: DriveParams) -> float:
    """Mean photon emission rate (1/ns) from the mean waiting time."""
    table = waiting_time_table(emitter, drive)
    return 1.0 / float(np.trapezoid(table.survival, table.taus))


def simulate_trajectory(
    emitter: EmitterParams, drive: DriveParams, n_photons: int, seed: int = 0
) -> tuple[np.ndarray, int]:
    """Explicit pure-state unraveling; returns (emission times in ps, dephasing jumps).

    The non-Hermitian evolution runs until the squared norm falls to a
    uniform draw; the jump channel is then chosen by its rate.  Photon jumps
    reset to the ground state, dephasing jumps apply sigma_z.
    """
    rng = make_rng(seed)
    g1, kappa = emitter.gamma1, 0.5 * emitter.pure_dephasing
    om, de = drive.rabi, drive.detuning
    # basis (e, g)
    h_eff = np.array(
        [[-de - 0.5j * g1 - 0.5j * kappa, 0.5 * om], [0.5 * om, -0.5j * kappa]], dtype=complex
    )
    lam, vec = np.linalg.eig(h_eff)
    vinv = np.linalg.inv(vec)

    def propagate(psi, t):
        return vec @ (np.exp(-1j * lam * t) * (vinv @ psi))

    def norm2(psi, t):
        p = propagate(psi, t)
        return float(np.vdot(p, p).real)

    psi = np.array([0, 1], dtype=complex)
    t_now = 0.0
    times = []
    n_dephase = 0
    scale = 1.0 / max(g1, kappa, 1e-12)
    while len(times) < n_photons:
        r = rng.random()
        hi = scale
        while norm2(psi, hi) > r:
            hi *= 2
            if hi > 1e6 * scale:
                raise RuntimeError("trajectory never jumps")
        dt = brentq(lambda t: norm2(psi, t) - r, 0.0, hi, xtol=1e-15, rtol=1e-14)
        p = propagate(psi, dt)
        p = p / math.sqrt(np.vdot(p, p).real)
        t_now += dt
        rate_photon = g1 * abs(p[0]) ** 2
        if rng.random() * (rate_photon + kappa) < rate_photon:
            times.append(t_now)
            psi = np.array([0, 1], dtype=complex)
        else:
            n_dephase += 1
            psi = np.array([p[0], -p[1]])
    return np.array(times) * 1e3, n_dephase


# --------------------------------------------------------------------------
# correlator


class Normalization(str, enum.Enum):
    RAW = "raw"
    BASELINE = "baseline"


@dataclass(frozen=True)
class CorrelogramConfig:
    """Bin width and delay range in ps."""

    bin_width: float
    max_tau: float
    normalization: Normalization = Normalization.BASELINE

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if self.max_tau < 10 * self.bin_width:
            raise ValueError("max_tau must be at least 10 bin widths")
        object.__setattr__(self, "normalization", Normalization(self.normalization))

    @property
    def half_bins(self) -> int:
        return int(round(self.max_tau / self.bin_width))

    @property
    def centers(self) -> np.ndarray:
        k = self.half_bins
        return np.arange(-k, k + 1) * self.bin_width


@dataclass
class Correlogram:
    """Raw pair counts with what is needed to normalize and merge them."""

    counts: np.ndarray
    config: CorrelogramConfig
    n_a: int
    n_b: int
    duration: float
    auto: bool = True

    @property
    def expected_flat(self) -> float:
        """Uncorrelated pairs per bin, N_a N_b bin_width / duration."""
        return self.n_a * self.n_b * self.config.bin_width / self.duration

    def merge(self, other: Correlogram) -> Correlogram:
        if other.config != self.config:
            raise ValueError("cannot merge correlograms with different binning")
        return Correlogram(
            self.counts + other.counts,
            self.config,
            self.n_a + other.n_a,
            self.n_b + other.n_b,
            self.duration + other.duration,
            self.auto,
        )

    def trace(self) -> CorrelationTrace:
        taus = self.config.centers * 1e-3
        if self.config.normalization is Normalization.RAW:
            vals = self.counts.astype(float)
        else:
            vals = self.counts / self.expected_flat
        kind = CorrelationKind.G2 if self.auto else CorrelationKind.CROSS
        return CorrelationTrace(taus, vals, kind)


def _bin_index(d, bw, k):
    return np.floor(d / bw + 0.5).astype(np.int64) + k


def auto_pair_counts(tags: np.ndarray, bin_width: float, half_bins: int,
                     block: int = 1 << 12) -> np.ndarray:
    """Histogram of delays between distinct tags, both orderings, centered bins.

    Start tags are taken in cache-sized blocks.  Within a block the s-th
    successor delay is a contiguous difference, and s runs up to the
    longest in-window run of the block.
    """
    k = half_bins
    reach = (k + 0.5) * bin_width
    n = tags.size
    one_sided = np.zeros(k + 1, dtype=np.int64)
    runs = np.searchsorted(tags, tags + reach, side="left") - np.arange(n) - 1
    for lo in range(0, n - 1, block):
        hi = min(lo + block, n - 1)
        smax = int(runs[lo:hi].max())
        t = np.concatenate([tags[lo : hi + smax], np.full(smax + 1, np.inf)])
        m = hi - lo
        base = t[:m]
        parts = []
        for s in range(1, smax + 1):
            d = t[s : s + m] - base
            parts.append(d[d < reach])
        if parts:
            d = np.concatenate(parts)
            # d >= 0, so truncation is floor
            one_sided += np.bincount((d / bin_width + 0.5).astype(np.int64), minlength=k + 1)[: k + 1]
    counts = np.zeros(2 * k + 1, dtype=np.int64)
    counts[k:] += one_sided
    counts[: k + 1] += one_sided[::-1]
    return counts


def cross_pair_counts(a: np.ndarray, b: np.ndarray, bin_width: float, half_bins: int) -> np.ndarray:
    """Histogram of delays b_j - a_i within the centered bin range."""
    k = half_bins
    reach = (k + 0.5) * bin_width
    counts = np.zeros(2 * k + 1, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return counts
    ia = np.arange(a.size)
    jb = np.searchsorted(b, a - reach, side="left")
    while ia.size:
        ok = jb < b.size
        ia, jb = ia[ok], jb[ok]
        d = b[jb] - a[ia]
        keep = d < reach
        ia, jb, d = ia[keep], jb[keep], d[keep]
        if d.size:
            bins = _bin_index(d, bin_width, k)
            valid = bins >= 0
            counts += np.bincount(bins[valid], minlength=2 * k + 1)[: 2 * k + 1]
        jb = jb + 1
    return counts


def correlogram(stream: PhotonStream, cfg: CorrelogramConfig,
                other: PhotonStream | None = None) -> Correlogram:
    if len(stream) == 0 or (other is not None and len(other) == 0):
        raise ValueError("cannot correlate an empty stream")
    if other is None:
        counts = auto_pair_counts(stream.tags, cfg.bin_width, cfg.half_bins)
        return Correlogram(counts, cfg, len(stream), len(stream), stream.total_duration)
    counts = cross_pair_counts(stream.tags, other.tags, cfg.bin_width, cfg.half_bins)
    duration = max(stream.total_duration, other.total_duration)
    return Correlogram(counts, cfg, len(stream), len(other), duration, auto=False)


def correlate(stream: PhotonStream, cfg: CorrelogramConfig,
              other: PhotonStream | None = None) -> CorrelationTrace:
    """Start-multistop delay histogram, auto or cross.

    Bins are centered on multiples of ``bin_width``.  BASELINE divides by
    the uncorrelated expectation N_a N_b bin_width / duration; the
    autocorrelation leaves out each tag paired with itself.
    """
    return correlogram(stream, cfg, other).trace()


def split_stream(stream: PhotonStream, n: int) -> list[PhotonStream]:
    """Cut a stream into ``n`` equal-duration segments re-based at zero."""
    edges = np.linspace(0.0, stream.total_duration, n + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (stream.tags >= lo) & ((stream.tags < hi) | (hi == edges[-1]))
        out.append(PhotonStream(stream.tags[sel] - lo, hi - lo, stream.seed))
    return out


def boundary_pair_counts(stream: PhotonStream, n: int, cfg: CorrelogramConfig) -> np.ndarray:
    """Pairs straddling the cuts of :func:`split_stream`, as a correction term."""
    edges = np.linspace(0.0, stream.total_duration, n + 1)[1:-1]
    reach = (cfg.half_bins + 0.5) * cfg.bin_width
    total = np.zeros(2 * cfg.half_bins + 1, dtype=np.int64)
    t = stream.tags
    for e in edges:
        left = t[(t >= e - reach) & (t < e)]
        right = t[(t >= e) & (t < e + reach)]
        c = cross_pair_counts(left, right, cfg.bin_width, cfg.half_bins)
        total += c + c[::-1]
    return total


# --------------------------------------------------------------------------
# blinking


def blinking_modulated_stream(
    stream: PhotonStream, blinking: instrument.BlinkingModel, seed
) -> PhotonStream:
    """Keep only tags that fall in bright periods of a telegraph process."""
    rng = make_rng(seed)
    duration_ms = stream.total_duration * 1e-9
    iv = instrument.telegraph_intervals(blinking, duration_ms, rng)
    t_ms = stream.tags * 1e-9
    if iv.size == 0:
        return PhotonStream(np.empty(0), stream.total_duration, stream.seed)
    i = np.searchsorted(iv[:, 0], t_ms, side="right") - 1
    keep = (i >= 0) & (t_ms < iv[np.maximum(i, 0), 1])
    return PhotonStream(stream.tags[keep], stream.total_duration, stream.seed)


def poisson_stream(rate_per_ps: float, duration: float, seed) -> PhotonStream:
    """Uncorrelated (coherent-light) stream for calibration."""
    rng = make_rng(seed)
    n = rng.poisson(rate_per_ps * duration)
    return PhotonStream(np.sort(rng.uniform(0.0, duration, n)), duration, None)


# --------------------------------------------------------------------------
# tag files


def write_tags(path, stream: PhotonStream) -> None:
    """Binary ``.bin`` (header + little-endian u64 ps) or ``.csv`` by suffix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open("w") as fh:
            fh.write(f"# duration_ps={stream.total_duration!r}\n")
            if stream.seed is not None:
                fh.write(f"# seed={stream.seed}\n")
            fh.write("tag_ps\n")
            np.savetxt(fh, stream.tags, fmt="%.17g")
        return
    tags = np.rint(stream.tags).astype("<u8")
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(TAG_MAGIC, TAG_VERSION, int(round(stream.total_duration)), tags.size))
        fh.write(tags.tobytes())


def read_tags(path) -> PhotonStream:
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == TAG_MAGIC:
        raw = path.read_bytes()
        magic, version, duration, count = _HEADER.unpack_from(raw, 0)
        if version != TAG_VERSION:
            raise ValueError(f"unsupported tag file version {version}")
        tags = np.frombuffer(raw, dtype="<u8", count=count, offset=_HEADER.size)
        return PhotonStream(tags.astype(float), float(duration))
    duration = None
    seed = None
    with path.open() as fh:
        lines = fh.read().splitlines()
    values = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "duration_ps":
                duration = float(val)
            elif key.strip() == "seed":
                seed = int(val)
            continue
        try:
            values.append(float(line.split(",")[0]))
        except ValueError:
            if values:
                raise ValueError(f"malformed tag line: {line!r}") from None
    tags = np.array(values, dtype=float)
    if duration is None:
        duration = float(tags[-1]) if tags.size else 0.0
    return PhotonStream(tags, duration, seed)
