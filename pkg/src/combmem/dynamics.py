"""Time-domain integration of the coupled-mode equations and exact spectra.

Mean-field coherent amplitudes in a frame rotating at the carrier: the
resonator vector a obeys

    da/dt = M(t) a + d s_in(t)

with a generator M built from the detunings, the feedline-mediated
correlated decay, and the internal losses.  At half-wave spacing the
feedline phases reduce to alternating signs, the inter-resonator exchange
vanishes, and the external decay matrix is rank one: a single bright
combination radiates while the orthogonal combinations are dark.

Ports (amplitudes in sqrt(photon flux) units):

    s_T = s_in + o . a        (transmitted)
    s_R = r . a               (reflected)

with o_n = sqrt(pi kappa_c,n) e^{-i theta_n}, r_n = sqrt(pi kappa_c,n)
e^{+i theta_n} and drive d_n = -sqrt(pi kappa_c,n) e^{+i theta_n}.  The
relative sign between drive and emission is fixed by photon-number balance
and by the single-resonator response |S21| = kappa_i/(kappa_c+kappa_i) on
resonance.

Rates are ordinary frequencies (Hz); the factor 2*pi enters here and only
here.  The integrator is classical fixed-step RK4 with the generator held
constant within each schedule segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.signal import lfilter

from .errors import ConfigurationError, DiagnosticError, ValidationError
from .model import MemoryConfig
from .schedules import DetuningSchedule, Segment, snap_to_grid

TWO_PI = 2.0 * math.pi
DEFAULT_DT = 0.5e-9

# steps per period of the fastest scale required of the grid
_RESOLUTION_FACTOR = 50
# eigenvector condition number above which the eigenbasis fast path is abandoned
_EIG_COND_LIMIT = 1e8


# ---------------------------------------------------------------------------
# input pulses

@dataclass(frozen=True)
class Pulse:
    """Gaussian coherent pulse; fwhm refers to the power envelope."""

    center_time: float
    fwhm: float
    mean_photon_number: float = 1.0
    phase: float = 0.0
    carrier_detuning: float = 0.0

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValidationError(f"pulse fwhm must be positive, got {self.fwhm!r}")
        if self.mean_photon_number < 0:
            raise ValidationError("mean photon number must be >= 0")

    @property
    def sigma(self) -> float:
        """Std of the power envelope: fwhm = 2 sqrt(2 ln 2) sigma."""
        return self.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class PulseTrain:
    pulses: tuple[Pulse, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))

    @property
    def total_photons(self) -> float:
        return sum(p.mean_photon_number for p in self.pulses)

    @property
    def min_fwhm(self) -> float:
        return min((p.fwhm for p in self.pulses), default=math.inf)

    @property
    def first_peak(self) -> float:
        return min(p.center_time for p in self.pulses)


def input_field(train: PulseTrain, times: np.ndarray) -> np.ndarray:
    """Complex input amplitude; |s_in|^2 integrates to the photon number."""
    t = np.asarray(times, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for p in train.pulses:
        sig = p.sigma
        amp = math.sqrt(p.mean_photon_number) * (2.0 * math.pi * sig * sig) ** -0.25
        envelope = np.exp(-((t - p.center_time) ** 2) / (4.0 * sig * sig))
        out += amp * envelope * np.exp(1j * p.phase - 2j * math.pi * p.carrier_detuning * t)
    return out


# ---------------------------------------------------------------------------
# generator and port vectors

def _is_half_wave(theta: np.ndarray) -> bool:
    return bool(np.all(np.abs(theta / math.pi - np.round(theta / math.pi)) < 1e-9))


def assemble_generator(config: MemoryConfig, detunings) -> np.ndarray:
    """Complex N x N generator for the given per-resonator detunings (Hz).

    Diagonal: -2i pi delta_n - pi (kappa_c,n + kappa_i,n).  Off-diagonal at
    half-wave spacing: -pi sqrt(kappa_c,n kappa_c,m) (-1)^(n-m), the
    feedline-mediated correlated decay.  For general spacing phases the
    decay picks up cos(theta_n - theta_m) and a coherent exchange term
    proportional to sin|theta_n - theta_m| appears.
    """
    dets = np.asarray(detunings, dtype=float)
    if dets.shape != (config.n_resonators,):
        raise ValidationError(
            f"expected {config.n_resonators} detunings, got shape {dets.shape}")
    kc = np.asarray(config.kappa_c, dtype=float)
    ki = np.asarray(config.kappa_i, dtype=float)
    theta = np.asarray(config.spacing_phase, dtype=float)
    root = np.sqrt(math.pi * kc)  # sqrt(gamma_n / 2), gamma = 2 pi kappa_c
    if _is_half_wave(theta):
        parity = (-1.0) ** np.round(theta / math.pi)
        decay = 2.0 * np.outer(root * parity, root * parity)
        exchange = np.zeros_like(decay)
    else:
        dphi = theta[:, None] - theta[None, :]
        decay = 2.0 * np.outer(root, root) * np.cos(dphi)
        exchange = np.outer(root, root) * np.sin(np.abs(dphi))
        np.fill_diagonal(exchange, 0.0)
    m = -0.5 * decay.astype(complex) - 1j * exchange
    np.fill_diagonal(m, np.diag(m) - 2j * math.pi * dets - math.pi * ki)
    return m


def drive_vector(config: MemoryConfig) -> np.ndarray:
    """How the incoming field enters da/dt: d_n = -sqrt(pi kappa_c,n) e^{i theta_n}."""
    kc = np.asarray(config.kappa_c, dtype=float)
    theta = np.asarray(config.spacing_phase, dtype=float)
    if _is_half_wave(theta):
        phase = (-1.0) ** np.round(theta / math.pi) + 0j
    else:
        phase = np.exp(1j * theta)
    return -np.sqrt(math.pi * kc) * phase


def _emission_vectors(config: MemoryConfig) -> tuple[np.ndarray, np.ndarray]:
    """(transmission, reflection) emission rows; both equal -d at half-wave spacing."""
    kc = np.asarray(config.kappa_c, dtype=float)
    theta = np.asarray(config.spacing_phase, dtype=float)
    root = np.sqrt(math.pi * kc)
    if _is_half_wave(theta):
        parity = (-1.0) ** np.round(theta / math.pi) + 0j
        return root * parity, root * parity
    return root * np.exp(-1j * theta), root * np.exp(1j * theta)


# ---------------------------------------------------------------------------
# simulation result

@dataclass
class SimulationResult:
    """Fields on the uniform grid; amplitudes a are photon-amplitude units."""

    time_grid: np.ndarray
    a: np.ndarray                 # (N, T) complex
    s_in: np.ndarray              # (T,) complex
    s_T: np.ndarray
    s_R: np.ndarray
    loss_power: np.ndarray        # (T,) real, instantaneous internal-loss photon flux

    @property
    def dt(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0])

    def _energy(self, s: np.ndarray) -> float:
        return float(simpson(np.abs(s) ** 2, x=self.time_grid))

    def input_energy(self) -> float:
        return self._energy(self.s_in)

    def transmitted_energy(self) -> float:
        return self._energy(self.s_T)

    def reflected_energy(self) -> float:
        return self._energy(self.s_R)

    def loss_energy(self) -> float:
        return float(simpson(self.loss_power, x=self.time_grid))

    def residual_excitation(self) -> float:
        """Photons still stored in the resonators at the end of the run."""
        return float(np.sum(np.abs(self.a[:, -1]) ** 2))

    def stored_excitation(self) -> np.ndarray:
        return np.sum(np.abs(self.a) ** 2, axis=0)

    def energy_balance_error(self) -> float:
        """Relative photon-number balance residual (0 for a perfect run)."""
        e_in = self.input_energy()
        if e_in <= 0:
            return 0.0
        e_out = self.transmitted_energy() + self.reflected_energy()
        return abs(e_in - e_out - self.loss_energy() - self.residual_excitation()) / e_in


# ---------------------------------------------------------------------------
# integrator

def _rk4_weights(z: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalue-domain RK4 step multiplier and drive weights (z = lambda dt)."""
    step = 1.0 + z + z**2 / 2.0 + z**3 / 6.0 + z**4 / 24.0
    b0 = (dt / 6.0) * (1.0 + z + z**2 / 2.0 + z**3 / 4.0)
    b1 = (dt / 6.0) * (4.0 + 2.0 * z + z**2 / 2.0)
    b2 = np.full_like(z, dt / 6.0)
    return step, b0, b1, b2


def _advance_eig(m: np.ndarray, d: np.ndarray, dt: float, v0: np.ndarray,
                 u0: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray | None:
    """Whole-segment RK4 in the eigenbasis of M (vectorized over steps).

    Algebraically identical to the per-step recursion; returns None when the
    eigenbasis is too ill-conditioned to trust.
    """
    lam, vec = np.linalg.eig(m)
    if np.linalg.cond(vec) > _EIG_COND_LIMIT:
        return None
    step, b0, b1, b2 = _rk4_weights(lam * dt, dt)
    d_e = np.linalg.solve(vec, d)
    v0_e = np.linalg.solve(vec, v0)
    forcing = (b0 * d_e)[:, None] * u0 + (b1 * d_e)[:, None] * u1 + (b2 * d_e)[:, None] * u2
    out = np.empty_like(forcing)
    for i in range(len(lam)):
        zi = np.array([step[i] * v0_e[i]])
        out[i], _ = lfilter([1.0 + 0j], [1.0, -step[i]], forcing[i], zi=zi)
    return vec @ out


def _advance_steps(m: np.ndarray, d: np.ndarray, dt: float, v0: np.ndarray,
                   u0: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Plain per-step RK4 recursion (fallback path)."""
    n = m.shape[0]
    eye = np.eye(n, dtype=complex)
    m2 = m @ m
    m3 = m2 @ m
    step = eye + dt * m + dt**2 / 2.0 * m2 + dt**3 / 6.0 * m3 + dt**4 / 24.0 * (m3 @ m)
    b0 = dt / 6.0 * (eye + dt * m + dt**2 / 2.0 * m2 + dt**3 / 4.0 * m3) @ d
    b1 = dt / 6.0 * (4.0 * eye + 2.0 * dt * m + dt**2 / 2.0 * m2) @ d
    b2 = dt / 6.0 * d
    forcing = b0[:, None] * u0 + b1[:, None] * u1 + b2[:, None] * u2
    out = np.empty_like(forcing)
    v = v0
    for k in range(forcing.shape[1]):
        v = step @ v + forcing[:, k]
        out[:, k] = v
    return out


def _advance_ramp(config: MemoryConfig, dets_of_t, d: np.ndarray, dt: float,
                  t0: float, v0: np.ndarray, u0, u1, u2) -> np.ndarray:
    """Non-autonomous RK4 for steps whose detunings vary within the step."""
    out = np.empty((len(v0), u0.shape[0]), dtype=complex)
    v = v0
    for k in range(u0.shape[0]):
        t = t0 + k * dt
        ma = assemble_generator(config, dets_of_t(t))
        mb = assemble_generator(config, dets_of_t(t + 0.5 * dt))
        mc = assemble_generator(config, dets_of_t(t + dt))
        k1 = ma @ v + d * u0[k]
        k2 = mb @ (v + 0.5 * dt * k1) + d * u1[k]
        k3 = mb @ (v + 0.5 * dt * k2) + d * u1[k]
        k4 = mc @ (v + dt * k3) + d * u2[k]
        v = v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, k] = v
    return out


def _fastest_rate(schedule: DetuningSchedule, config: MemoryConfig, train: PulseTrain) -> float:
    rate = 0.0
    for seg in schedule.segments:
        rate = max(rate, max(abs(d) for d in seg.detunings))
    rate = max(rate, max(kc + ki for kc, ki in zip(config.kappa_c, config.kappa_i)))
    for p in train.pulses:
        rate = max(rate, 1.0 / p.fwhm, abs(p.carrier_detuning))
    return rate


def simulate(config: MemoryConfig, schedule: DetuningSchedule, input: PulseTrain,
             t_end: float | None = None, dt: float = DEFAULT_DT,
             switch_ramp: float = 0.0) -> SimulationResult:
    """Integrate the driven network over [0, t_end] on a uniform grid.

    The schedule must cover the grid; segment boundaries snap to the nearest
    step.  dt must resolve the fastest scale (detunings, total linewidths,
    inverse pulse widths) with >= 50 steps per period, otherwise a
    ConfigurationError is raised.  switch_ramp > 0 replaces instantaneous
    detuning switches with linear ramps of that duration (sensitivity
    checks; default is the instantaneous limit).

    Deterministic and linear in the input: scaling the drive by a complex
    factor scales every output field by exactly that factor.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if t_end is None:
        t_end = schedule.end_time
    if config.n_resonators != schedule.n_resonators:
        raise ValidationError(
            f"schedule covers {schedule.n_resonators} resonators, config has {config.n_resonators}")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise ValidationError("t_end must cover at least one step")
    grid_end = n_steps * dt
    if schedule.end_time < grid_end - 0.5 * dt:
        raise ConfigurationError(
            f"schedule ends at {schedule.end_time} but the grid runs to {grid_end}")
    rate = _fastest_rate(schedule, config, input)
    if rate > 0 and dt > 1.0 / (_RESOLUTION_FACTOR * rate):
        raise ConfigurationError(
            f"dt={dt} does not resolve the fastest scale {rate:.3g} Hz; "
            f"need dt <= {1.0 / (_RESOLUTION_FACTOR * rate):.3g}")
    if switch_ramp < 0:
        raise ValidationError("switch_ramp must be >= 0")

    n = config.n_resonators
    snapped = snap_to_grid(schedule, dt)
    fine = input_field(input, np.arange(2 * n_steps + 1) * (0.5 * dt))
    u0, u1, u2 = fine[0:-1:2], fine[1::2], fine[2::2]
    d = drive_vector(config)

    a = np.zeros((n, n_steps + 1), dtype=complex)
    v = np.zeros(n, dtype=complex)
    ramp_steps = int(round(switch_ramp / dt)) if switch_ramp > 0 else 0
    prev_dets: tuple[float, ...] | None = None
    for seg in snapped.segments:
        k0 = int(round(seg.t_start / dt))
        k1 = min(int(round(seg.t_end / dt)), n_steps)
        if k1 <= k0 or k0 >= n_steps:
            prev_dets = seg.detunings
            continue
        kr = k0
        if ramp_steps and prev_dets is not None and prev_dets != seg.detunings:
            kr = min(k0 + ramp_steps, k1)
            old = np.asarray(prev_dets)
            new = np.asarray(seg.detunings)
            t_b = k0 * dt

            def dets_of_t(t, _old=old, _new=new, _tb=t_b):
                f = min(max((t - _tb) / switch_ramp, 0.0), 1.0)
                return _old + f * (_new - _old)

            a[:, k0 + 1:kr + 1] = _advance_ramp(
                config, dets_of_t, d, dt, t_b, v, u0[k0:kr], u1[k0:kr], u2[k0:kr])
            v = a[:, kr]
        if k1 > kr:
            m = assemble_generator(config, seg.detunings)
            block = _advance_eig(m, d, dt, v, u0[kr:k1], u1[kr:k1], u2[kr:k1])
            if block is None:
                block = _advance_steps(m, d, dt, v, u0[kr:k1], u1[kr:k1], u2[kr:k1])
            a[:, kr + 1:k1 + 1] = block
            v = a[:, k1]
        prev_dets = seg.detunings

    s_in = fine[0::2]
    o, r = _emission_vectors(config)
    s_t = s_in + o @ a
    s_r = r @ a
    loss = (TWO_PI * np.asarray(config.kappa_i)) @ (np.abs(a) ** 2)
    return SimulationResult(
        time_grid=np.arange(n_steps + 1) * dt,
        a=a, s_in=s_in, s_T=s_t, s_R=s_r, loss_power=loss)


# ---------------------------------------------------------------------------
# frequency domain

def transmission_spectrum(config: MemoryConfig, detunings, probe_detunings) -> np.ndarray:
    """Exact steady-state S21 at each probe detuning (Hz, relative to carrier).

    Response to a drive e^{-2 i pi nu t}:  S21(nu) = 1 + o . (-2 i pi nu I - M)^-1 d.
    A resonator with zero total linewidth probed exactly on resonance is a
    pole; the value is reported as inf there.
    """
    m = assemble_generator(config, detunings)
    d = drive_vector(config)
    o, _ = _emission_vectors(config)
    eye = np.eye(config.n_resonators, dtype=complex)
    probes = np.asarray(probe_detunings, dtype=float)
    out = np.empty(probes.shape, dtype=complex)
    for i, nu in enumerate(probes.ravel()):
        a_mat = -2j * math.pi * nu * eye - m
        try:
            x = np.linalg.solve(a_mat, d)
        except np.linalg.LinAlgError:
            x, *_ = np.linalg.lstsq(a_mat, d, rcond=None)
        val = 1.0 + o @ x
        out.ravel()[i] = val if np.isfinite(val) else complex(math.inf, 0.0)
    return out


def _dtft(times: np.ndarray, signal: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Fourier transform of a sampled signal at arbitrary frequencies.

    Picks out the e^{-2 i pi nu t} component, matching the sign convention
    of input_field and transmission_spectrum.
    """
    dt = times[1] - times[0]
    out = np.empty(len(freqs), dtype=complex)
    chunk = 64
    for i in range(0, len(freqs), chunk):
        f = freqs[i:i + chunk]
        out[i:i + chunk] = (np.exp(2j * math.pi * np.outer(f, times)) @ signal) * dt
    return out


def spectrum_via_fft_crosscheck(config: MemoryConfig, detunings, pulse: Pulse,
                                probe_detunings=None, dt: float | None = None,
                                t_end: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """S21 from the ratio of Fourier transforms of a simulated broadband run.

    Independent of the matrix-inverse route: simulate one weak pulse, then
    divide the transformed output by the transformed input.  Returns
    (probe_detunings, S21).  Probes must stay inside the pulse's power
    bandwidth so the ratio is well conditioned.
    """
    bw = 4.0 * math.log(2.0) / (math.pi * pulse.fwhm)  # power-spectrum FWHM
    if probe_detunings is None:
        probe_detunings = pulse.carrier_detuning + np.linspace(-bw / 2, bw / 2, 201)
    probes = np.asarray(probe_detunings, dtype=float)
    if np.max(np.abs(probes - pulse.carrier_detuning)) > bw / 2 + 1e-9:
        raise DiagnosticError(
            f"probe range exceeds the pulse power bandwidth ({bw:.3g} Hz); use a shorter pulse")

    kc = np.asarray(config.kappa_c)
    if not np.any(kc > 0):
        return probes, np.ones(probes.shape, dtype=complex)

    m = assemble_generator(config, detunings)
    decay = -np.real(np.linalg.eigvals(m))
    slow = float(np.min(decay[decay > 1e-3])) if np.any(decay > 1e-3) else 0.0
    if slow <= 0:
        total = kc + np.asarray(config.kappa_i)
        slow = math.pi * float(np.min(total[total > 0]))
    if t_end is None:
        t_end = pulse.center_time + max(8.0 * pulse.fwhm, 16.0 / slow)
    if dt is None:
        rate = max(float(np.max(np.abs(np.asarray(detunings)))) + np.max(np.abs(probes)),
                   float(np.max(kc + np.asarray(config.kappa_i))), 1.0 / pulse.fwhm)
        dt = min(DEFAULT_DT, 1.0 / (60.0 * rate))

    schedule = DetuningSchedule((Segment(0.0, float(t_end), tuple(float(x) for x in detunings), "write"),))
    result = simulate(config, schedule, PulseTrain((pulse,)), t_end=t_end, dt=dt)
    e_in = result.input_energy()
    if result.residual_excitation() > 1e-7 * e_in:
        raise DiagnosticError(
            "ring-down not captured: stored energy at t_end is "
            f"{result.residual_excitation() / e_in:.2e} of the input; extend t_end")
    num = _dtft(result.time_grid, result.s_T, probes)
    den = _dtft(result.time_grid, result.s_in, probes)
    return probes, num / den
