"""Echo extraction, storage efficiency, bandwidth, phase, and decay fitting.

Echo order m is expected one comb period (1/delta) of *comb-on* time after
the input peak: time spent in close segments does not advance the
rephasing clock, so each close stage shifts the later windows by its
duration.  Windows tile the comb period with half-width 1/(2 delta) unless
narrowed by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigurationError, DiagnosticError, ValidationError
from .dynamics import PulseTrain, SimulationResult
from .schedules import DetuningSchedule


@dataclass(frozen=True)
class EchoWindow:
    order: int
    t_start: float
    t_end: float

    @property
    def center(self) -> float:
        return 0.5 * (self.t_start + self.t_end)


@dataclass
class EchoMetrics:
    windows: list[EchoWindow]
    energies_T: dict[int, float]
    energies_R: dict[int, float]
    efficiency: float
    echo_phase: float
    input_energy: float


@dataclass
class SweepResult:
    axis: np.ndarray
    efficiencies: np.ndarray
    best_efficiency: float
    bandwidth: float
    knee: float          # smallest axis value reaching the plateau


# ---------------------------------------------------------------------------
# windows

def _rephasing_wall_time(schedule: DetuningSchedule, input_peak: float, comb_time: float) -> float | None:
    """Wall-clock time at which `comb_time` of non-close evolution has
    elapsed since input_peak, or None if the schedule ends first."""
    acc = 0.0
    for seg in schedule.segments:
        lo = max(seg.t_start, input_peak)
        if lo >= seg.t_end:
            continue
        if seg.stage == "close":
            continue
        span = seg.t_end - lo
        if acc + span >= comb_time:
            return lo + (comb_time - acc)
        acc += span
    return None


def echo_windows(schedule: DetuningSchedule, delta: float, input_peak: float,
                 m_max: int, half_width: float | None = None) -> list[EchoWindow]:
    """Expected echo windows of orders 1..m_max for a pulse peaking at input_peak.

    Order m is centered where m/delta of comb-on time has accrued; the
    default half-width 1/(2 delta) tiles consecutive orders.  Raises a
    DiagnosticError when a window would extend beyond the schedule.
    """
    if m_max < 1:
        raise ValidationError("m_max must be >= 1")
    if delta <= 0:
        raise ValidationError("delta must be positive")
    hw = half_width if half_width is not None else 0.5 / delta
    if hw <= 0:
        raise ValidationError("half_width must be positive")
    windows = []
    for m in range(1, m_max + 1):
        center = _rephasing_wall_time(schedule, input_peak, m / delta)
        if center is None or center + hw > schedule.end_time + 1e-15:
            raise DiagnosticError(
                f"echo window m={m} extends beyond the simulated range "
                f"(schedule ends at {schedule.end_time})", partial=windows)
        windows.append(EchoWindow(m, center - hw, center + hw))
    return windows


def _window_slice(result: SimulationResult, window: EchoWindow) -> slice:
    t = result.time_grid
    if window.t_start < t[0] - 1e-15 or window.t_end > t[-1] + 1e-15:
        raise ValidationError(
            f"window [{window.t_start}, {window.t_end}] outside the simulated range")
    i0 = int(np.searchsorted(t, window.t_start - 1e-15))
    i1 = int(np.searchsorted(t, window.t_end + 1e-15))
    return slice(i0, max(i1, i0 + 2))


def window_energy(result: SimulationResult, window: EchoWindow, port: str = "transmission",
                  emitted: bool = False) -> float:
    """Photon number collected in the window at one port.

    emitted=True subtracts the input from the transmitted field first,
    leaving the pure resonator emission; useful when the direct pulse
    overlaps the window.  The reflected port carries no direct field.
    """
    sl = _window_slice(result, window)
    if port == "transmission":
        s = (result.s_T - result.s_in) if emitted else result.s_T
    elif port == "reflection":
        s = result.s_R
    elif port == "input":
        s = result.s_in
    else:
        raise ValidationError(f"unknown port {port!r}")
    return float(simpson(np.abs(s[sl]) ** 2, x=result.time_grid[sl]))


def storage_efficiency(result: SimulationResult, windows: list[EchoWindow],
                       emitted: bool = False) -> EchoMetrics:
    """Per-order echo energies and the first-order storage efficiency.

    efficiency = (first-echo energy in transmission + reflection) / input
    energy.  The echo phase is read off the transmitted field at the
    amplitude peak inside the first-order window.
    """
    e_in = result.input_energy()
    if e_in <= 0:
        raise ValidationError("input energy must be positive")
    orders = [w.order for w in windows]
    if len(set(orders)) != len(orders) or any(o < 1 for o in orders):
        raise ValidationError("window orders must be distinct positive integers")
    energies_t = {}
    energies_r = {}
    for w in windows:
        energies_t[w.order] = window_energy(result, w, "transmission", emitted=emitted)
        energies_r[w.order] = window_energy(result, w, "reflection")
    if 1 not in energies_t:
        raise ValidationError("windows must include the first echo order")
    eta = (energies_t[1] + energies_r[1]) / e_in
    first = next(w for w in windows if w.order == 1)
    sl = _window_slice(result, first)
    seg = (result.s_T - result.s_in)[sl] if emitted else result.s_T[sl]
    phase = float(np.angle(seg[np.argmax(np.abs(seg))]))
    return EchoMetrics(windows=list(windows), energies_T=energies_t, energies_R=energies_r,
                       efficiency=eta, echo_phase=phase, input_energy=e_in)


def echo_peak_time(result: SimulationResult, window: EchoWindow,
                   port: str = "reflection") -> float:
    """Sub-sample echo arrival time: parabolic refinement of the amplitude peak.

    The reflected port is the default since it carries pure emission.
    """
    sl = _window_slice(result, window)
    t = result.time_grid[sl]
    if port == "reflection":
        y = np.abs(result.s_R[sl])
    elif port == "transmission":
        y = np.abs(result.s_T[sl])
    elif port == "emitted":
        y = np.abs((result.s_T - result.s_in)[sl])
    else:
        raise ValidationError(f"unknown port {port!r}")
    i = int(np.argmax(y))
    if y[i] <= 0:
        raise DiagnosticError("no emission inside the window")
    if 0 < i < len(y) - 1:
        denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
        if denom < 0:
            return float(t[i] + 0.5 * (y[i - 1] - y[i + 1]) / denom * (t[1] - t[0]))
    return float(t[i])


# ---------------------------------------------------------------------------
# sweeps, phase, decay

def bandwidth_from_sweep(fwhms, efficiencies, plateau_fraction: float = 0.95,
                         rising_tolerance: float = 0.03) -> SweepResult:
    """Plateau efficiency and acceptance bandwidth from an efficiency-vs-FWHM sweep.

    The plateau is the sweep maximum; the bandwidth is the inverse of the
    smallest FWHM reaching plateau_fraction of it.  If the curve is still
    rising at the largest FWHM (beyond rising_tolerance, relative) there is
    no plateau and a DiagnosticError carrying the partial result is raised.
    """
    axis = np.asarray(fwhms, dtype=float)
    etas = np.asarray(efficiencies, dtype=float)
    if axis.shape != etas.shape or axis.ndim != 1 or len(axis) < 3:
        raise ValidationError("need matching 1-d sweeps with at least 3 points")
    if np.any(np.diff(axis) <= 0):
        raise ValidationError("fwhm axis must be strictly increasing")
    if axis[-1] < 10 * axis[0] * (1.0 - 1e-9):
        raise ValidationError("sweep must cover at least one decade of FWHM")
    plateau = float(np.max(etas))
    knee_idx = int(np.argmax(etas >= plateau_fraction * plateau))
    knee = float(axis[knee_idx])
    result = SweepResult(axis=axis, efficiencies=etas, best_efficiency=plateau,
                         bandwidth=1.0 / knee, knee=knee)
    if int(np.argmax(etas)) == len(etas) - 1:
        prev = etas[-2]
        if prev > 0 and (etas[-1] - prev) / prev > rising_tolerance:
            raise DiagnosticError(
                "efficiency still rising at the largest FWHM; no plateau in range",
                partial=result)
    return result


def _wrap_phase(phi: float) -> float:
    """Wrap to (-pi, pi]."""
    out = math.remainder(phi, 2.0 * math.pi)
    return out if out != -math.pi else math.pi


def phase_difference(result: SimulationResult, windows: list[EchoWindow],
                     input: PulseTrain, estimator: str = "peak") -> float:
    """Phase of the first echo minus the input phase, wrapped to (-pi, pi].

    estimator="peak" reads the transmitted field at the in-window amplitude
    peak; "energy" uses the amplitude-weighted mean phase over the window.
    """
    first = next((w for w in windows if w.order == 1), None)
    if first is None:
        raise ValidationError("windows must include the first echo order")
    sl = _window_slice(result, first)
    seg = result.s_T[sl]
    emitted = (result.s_T - result.s_in)[sl]
    e_in = result.input_energy()
    floor = 1e-12 * max(e_in, 1e-30)
    if float(simpson(np.abs(emitted) ** 2, x=result.time_grid[sl])) < floor:
        raise DiagnosticError("echo energy below the numerical floor; no phase to read")
    if estimator == "peak":
        phase = float(np.angle(seg[np.argmax(np.abs(seg))]))
    elif estimator == "energy":
        phase = float(np.angle(np.sum(np.abs(seg) * seg)))
    else:
        raise ValidationError(f"unknown estimator {estimator!r}")
    return _wrap_phase(phase - input.pulses[0].phase)


def decay_fit(storage_times, efficiencies, monotone_tolerance: float = 0.05) -> float:
    """Exponential time constant of efficiency vs total storage time.

    Least-squares fit of log(eta) against time.  Non-decaying data (flat
    within 2% over the span) reports infinity, with the span as the
    resolvable lower bound.  Data rising beyond monotone_tolerance is
    rejected as a DiagnosticError.
    """
    t = np.asarray(storage_times, dtype=float)
    eta = np.asarray(efficiencies, dtype=float)
    if t.shape != eta.shape or t.ndim != 1 or len(t) < 4:
        raise ValidationError("need at least 4 matching points")
    if np.any(eta <= 0):
        raise ValidationError("efficiencies must be positive to fit a decay")
    order = np.argsort(t)
    t, eta = t[order], eta[order]
    rising = np.diff(eta) / eta[:-1]
    if np.any(rising > monotone_tolerance):
        raise DiagnosticError("efficiency is not monotonically decaying within tolerance")
    slope, _ = np.polyfit(t, np.log(eta), 1)
    span = t[-1] - t[0]
    if slope >= 0 or -slope * span < 0.02:
        return math.inf
    tau = -1.0 / slope
    if span < tau:
        raise DiagnosticError(f"sweep spans {span:.3g} s, less than one time constant {tau:.3g} s")
    return float(tau)


def heterodyne_render(result: SimulationResult, intermediate_frequency: float,
                      port: str = "transmission") -> tuple[np.ndarray, np.ndarray]:
    """Down-converted oscillating trace and its envelope, as a digitizer sees it.

    Returns (Re[s(t) e^{2 i pi IF t}], |s(t)|).  The grid must resolve the
    intermediate frequency with at least 10 samples per period.
    """
    if intermediate_frequency <= 0:
        raise ValidationError("intermediate frequency must be positive")
    if result.dt > 1.0 / (10.0 * intermediate_frequency):
        raise ConfigurationError(
            f"grid step {result.dt} under-resolves IF={intermediate_frequency:.3g} Hz "
            "(need >= 10 samples per period)")
    s = {"transmission": result.s_T, "reflection": result.s_R, "input": result.s_in}.get(port)
    if s is None:
        raise ValidationError(f"unknown port {port!r}")
    trace = np.real(s * np.exp(2j * math.pi * intermediate_frequency * result.time_grid))
    return trace, np.abs(s)


# ---------------------------------------------------------------------------
# CSV emitters (deterministic: repr floats, fixed headers)

def write_trace_csv(path, times, fields) -> None:
    """Columns t_s,re,im,abs with shortest round-trip float formatting."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(fields, dtype=complex)
    with open(path, "w", newline="") as f:
        f.write("t_s,re,im,abs\n")
        for ti, si in zip(t.tolist(), s.tolist()):
            f.write(f"{ti!r},{si.real!r},{si.imag!r},{abs(si)!r}\n")


def write_sweep_csv(path, axis, etas, header: str = "axis,eta") -> None:
    x = np.asarray(axis, dtype=float)
    y = np.asarray(etas, dtype=float)
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for xi, yi in zip(x.tolist(), y.tolist()):
            f.write(f"{xi!r},{yi!r}\n")
