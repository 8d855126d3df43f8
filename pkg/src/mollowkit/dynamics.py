"""Optical Bloch equations and quantum-regression oracles.

Everything here is computed by integrating ODEs, never from the closed
forms in :mod:`mollowkit.spectra` or :mod:`mollowkit.correlations`, so the
two can be checked against each other.

Conventions: rotating frame of the laser, H = -detuning |e><e| +
(rabi/2)(sigma+ + sigma-), population decay 1/t1 and coherence decay 1/t2.
The Bloch equations read::

    du/dt = -u/t2 - detuning * v
    dv/dt = detuning * u - v/t2 + rabi * w
    dw/dt = -rabi * v - (w + 1)/t1
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .params import BlochState, DriveParams, EmitterParams
from .traces import CorrelationKind, CorrelationTrace, SpectrumMode, SpectrumTrace


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "DOP853"
    atol: float = 1e-10
    rtol: float = 1e-8


DEFAULT_INTEGRATOR = IntegratorConfig()


def bloch_matrix(emitter: EmitterParams, drive: DriveParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (M, b) with d(u, v, w)/dt = M @ (u, v, w) + b."""
    g1, g2 = emitter.gamma1, emitter.gamma2
    om, de = drive.rabi, drive.detuning
    m = np.array(
        [
            [-g2, -de, 0.0],
            [de, -g2, om],
            [0.0, -om, -g1],
        ]
    )
    b = np.array([0.0, 0.0, -g1])
    return m, b


def steady_state(emitter: EmitterParams, drive: DriveParams) -> tuple[BlochState, float]:
    """Fixed point of the Bloch equations and its excited population."""
    m, b = bloch_matrix(emitter, drive)
    u, v, w = np.linalg.solve(m, -b)
    state = BlochState(float(u), float(v), float(w))
    return state, state.population


def coherent_power(emitter: EmitterParams, drive: DriveParams) -> float:
    """|<sigma->|**2 in steady state, the weight of the elastic peak."""
    s, _ = steady_state(emitter, drive)
    return 0.25 * (s.u**2 + s.v**2)


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-d array")
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _integrate_linear(matrix, offset, y0, t, cfg: IntegratorConfig) -> np.ndarray:
    """Integrate dy/dt = matrix @ y + offset, returning shape (len(t), len(y0))."""
    y0 = np.asarray(y0)
    if t.size == 1:
        return y0[None, :].copy()

    def rhs(_, y):
        return matrix @ y + offset

    sol = solve_ivp(
        rhs,
        (t[0], t[-1]),
        y0,
        method=cfg.method,
        t_eval=t,
        atol=cfg.atol,
        rtol=cfg.rtol,
    )
    if not sol.success:
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    y = sol.y.T
    # t_eval reproduces the initial point up to rounding; pin it exactly.
    y[0] = y0
    return y


def evolve_array(
    emitter: EmitterParams,
    drive: DriveParams,
    initial: BlochState,
    t_grid,
    config: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> np.ndarray:
    """Like :func:`evolve` but returns an (N, 3) array of (u, v, w)."""
    t = _check_grid(t_grid)
    m, b = bloch_matrix(emitter, drive)
    return _integrate_linear(m, b, initial.as_array(), t, config)


def evolve(
    emitter: EmitterParams,
    drive: DriveParams,
    initial: BlochState,
    t_grid,
    config: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> list[BlochState]:
    """Integrate the Bloch equations from ``initial`` over ``t_grid`` (ns).

    Raises ``ValueError`` when the grid is not strictly increasing from 0.
    """
    y = evolve_array(emitter, drive, initial, t_grid, config)
    return [BlochState(*row) for row in y]


def oracle_g2(
    emitter: EmitterParams,
    drive: DriveParams,
    t_grid,
    config: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> CorrelationTrace:
    """g2(tau) from the regression theorem.

    After a detected photon the emitter is in the ground state, so g2 is the
    excited population evolved from the ground state over its steady-state
    value.  Valid on both sides of the over-damped boundary.
    """
    t = _check_grid(t_grid)
    _, p_inf = steady_state(emitter, drive)
    if p_inf == 0.0:
        # No drive: no photons, g2 undefined; report the uncorrelated value.
        return CorrelationTrace(t, np.ones_like(t), CorrelationKind.G2)
    y = evolve_array(emitter, drive, BlochState.ground(), t, config)
    g2 = 0.5 * (1.0 + y[:, 2]) / p_inf
    g2[0] = 0.0
    return CorrelationTrace(t, g2, CorrelationKind.G2)


def liouvillian(emitter: EmitterParams, drive: DriveParams) -> np.ndarray:
    """4x4 Lindblad generator acting on vec(rho) = (rho_ee, rho_eg, rho_ge, rho_gg).

    Works for any 2x2 operator, not only density matrices, which is what the
    regression theorem needs.
    """
    g1, gphi = emitter.gamma1, emitter.pure_dephasing
    om, de = drive.rabi, drive.detuning
    sp = np.array([[0, 1], [0, 0]], dtype=complex)  # |e><g|, e is index 0
    sm = sp.T.copy()
    h = -de * (sp @ sm) + 0.5 * om * (sp + sm)
    eye = np.eye(2)

    def left(a):
        return np.kron(a, eye)

    def right(a):
        return np.kron(eye, a.T)

    gen = -1j * (left(h) - right(h))
    # dephasing operator sqrt(gphi/2) sigma_z damps coherences at gphi
    for c in (np.sqrt(g1) * sm, np.sqrt(gphi / 2) * np.diag([1.0, -1.0]).astype(complex)):
        cd = c.conj().T
        gen += left(c) @ right(cd) - 0.5 * left(cd @ c) - 0.5 * right(cd @ c)
    return gen


def _steady_rho(emitter, drive) -> np.ndarray:
    s, p = steady_state(emitter, drive)
    rho_eg = 0.5 * (s.u + 1j * s.v)
    return np.array([[p, rho_eg], [np.conj(rho_eg), 1 - p]])


def _g1_incoh_raw(emitter, drive, t, config) -> np.ndarray:
    """Unnormalized <sigma+(tau) sigma-(0)> - |<sigma->|**2 (complex)."""
    rho = _steady_rho(emitter, drive)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = sp.T
    x0 = (sm @ rho).reshape(-1)
    gen = liouvillian(emitter, drive)
    x = _integrate_linear(gen, np.zeros(4, dtype=complex), x0, t, config)
    # Tr(sigma+ X) = X[g, e] -> flat index 2 in (ee, eg, ge, gg)
    g1 = x[:, 2]
    return g1 - abs(rho[0, 1]) ** 2


def oracle_g1_incoh(
    emitter: EmitterParams,
    drive: DriveParams,
    t_grid,
    config: IntegratorConfig = DEFAULT_INTEGRATOR,
    normalize: bool = True,
) -> CorrelationTrace:
    """Incoherent part of the first-order coherence, Re part, from the
    regression theorem.  Normalized to 1 at tau = 0 unless ``normalize`` is
    False; identically zero without drive."""
    t = _check_grid(t_grid)
    if drive.rabi == 0.0:
        return CorrelationTrace(t, np.zeros_like(t), CorrelationKind.G1_INCOH)
    g = _g1_incoh_raw(emitter, drive, t, config).real
    if normalize:
        g = g / g[0]
    return CorrelationTrace(t, g, CorrelationKind.G1_INCOH)


def oracle_spectrum(
    emitter: EmitterParams,
    drive: DriveParams,
    freq_grid,
    n_tau: int = 4096,
    tau_span: float | None = None,
    config: IntegratorConfig = DEFAULT_INTEGRATOR,
) -> SpectrumTrace:
    """Incoherent emission spectrum by Fourier transform of the oracle g1.

    S(dw) = (1/pi) Re int_0^inf exp(-i dw tau) g1_incoh(tau) dtau, with
    ``freq_grid`` the offsets from the laser in rad/ns.  The tau grid spans
    ``tau_span`` ns (default 25/gamma2, which is at least 20/eta) with
    ``n_tau`` samples.  A frequency step coarser than half the 1/t2 width
    is reported in ``warnings``.
    """
    w = np.asarray(freq_grid, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("frequency grid must be 1-d with at least 2 points")
    if not np.allclose(w, -w[::-1], atol=1e-9 * np.max(np.abs(w))):
        raise ValueError("frequency grid must be symmetric about 0")
    notes = []
    step = float(np.max(np.diff(w)))
    if step > 0.5 * emitter.gamma2:
        msg = (
            f"frequency step {step:.3g} rad/ns does not resolve the "
            f"1/t2 width {emitter.gamma2:.3g} rad/ns"
        )
        notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    if drive.rabi == 0.0:
        return SpectrumTrace(w, np.zeros_like(w), SpectrumMode.ORACLE, tuple(notes))

    span = tau_span if tau_span is not None else 25.0 / emitter.gamma2
    span = max(span, 20.0 / emitter.eta)
    # the integrand oscillates at up to |dw| + generalized Rabi frequency
    fastest = np.max(np.abs(w)) + drive.generalized_rabi
    n = max(n_tau, int(np.ceil(span * fastest / np.pi * 8)) + 1)
    tau = np.linspace(0.0, span, n)
    g = _g1_incoh_raw(emitter, drive, tau, config)
    dtau = tau[1] - tau[0]
    weights = np.full(n, dtau)
    weights[0] = weights[-1] = 0.5 * dtau
    s = np.empty_like(w)
    # chunk to bound memory of the (freq, tau) phase matrix
    chunk = max(1, int(4e6 // n))
    for i in range(0, w.size, chunk):
        phase = np.exp(-1j * np.outer(w[i : i + chunk], tau))
        s[i : i + chunk] = (phase @ (weights * g)).real / np.pi
    return SpectrumTrace(w, s, SpectrumMode.ORACLE, tuple(notes))
