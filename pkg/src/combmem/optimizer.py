"""Derivative-free optimization of memory parameters against simulated efficiency.

Every objective evaluation is a full time-domain run, so searches are kept
frugal: a coarse pre-scan brackets the maximum and a golden-section refine
follows.  Grid sweeps evaluate points independently and may fan out over a
process pool; output ordering is the grid order regardless of completion
order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DiagnosticError, ValidationError
from .analysis import SweepResult, bandwidth_from_sweep, echo_windows, storage_efficiency
from .dynamics import DEFAULT_DT, Pulse, PulseTrain, simulate
from .model import CombConfig, MemoryConfig, build_comb
from .schedules import static_comb

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FLAT_RTOL = 1e-6
_PRESCAN_POINTS = 9


@dataclass
class OptimizationReport:
    objective: str
    best_value: float
    best_params: dict[str, float]
    evaluations: int
    trace: list[tuple[dict[str, float], float]] = field(default_factory=list)
    flat: bool = False


def first_echo_efficiency(config: MemoryConfig, delta: float, fwhm: float,
                          mean_photons: float = 1.0, emitted: bool = True,
                          dt: float | None = None) -> float:
    """Storage efficiency of a single Gaussian pulse on a static comb.

    Places the pulse and the horizon itself: the run ends right after the
    first-order window.  The emitted-field estimator is the default so the
    value stays meaningful when pulse and echo overlap in time.
    """
    if delta <= 0 or fwhm <= 0:
        raise ValidationError("delta and fwhm must be positive")
    comb = build_comb(config.n_resonators, delta)
    max_det = max((abs(d) for d in comb.detunings), default=0.0)
    rate = max(max_det, max(kc + ki for kc, ki in zip(config.kappa_c, config.kappa_i)), 1.0 / fwhm)
    if dt is None:
        dt = min(DEFAULT_DT, 1.0 / (60.0 * rate))
    t0 = 5.0 * fwhm  # pulse tail at t=0 is ~1e-15 of the peak
    t_end = t0 + 1.5 / delta + 2.0 * dt
    schedule = static_comb(comb, t_end)
    pulse = Pulse(center_time=t0, fwhm=fwhm, mean_photon_number=mean_photons)
    result = simulate(config, schedule, PulseTrain((pulse,)), t_end=t_end, dt=dt)
    windows = echo_windows(schedule, delta, t0, 1)
    return storage_efficiency(result, windows, emitted=emitted).efficiency


def _flat(values) -> bool:
    lo, hi = min(values), max(values)
    if hi < 1e-6:  # nothing is stored anywhere in range; no optimum to refine
        return True
    return hi - lo <= max(1e-12, _FLAT_RTOL * abs(hi))


def optimize_delta(config: MemoryConfig, pulse: Pulse, delta_range: tuple[float, float],
                   tol: float, mean_photons: float | None = None,
                   emitted: bool = True,
                   fwhm_per_period: float | None = None) -> OptimizationReport:
    """Maximize first-echo efficiency over the comb spacing.

    Coarse 9-point pre-scan to bracket the maximum, then golden-section
    refinement down to tol.  The pulse argument supplies the shape (fwhm,
    photon number); timing is managed per evaluation since the echo horizon
    moves with the spacing.  With fwhm_per_period set, each spacing is
    probed with fwhm = fwhm_per_period / delta instead of the fixed pulse
    width: that keeps every evaluation on its efficiency plateau, which is
    how best-achieved efficiencies are compared across spacings (a fixed
    absolute width leaves the storable-pulse regime once it exceeds the
    comb period).  A flat objective (e.g. a single resonator, whose comb is
    insensitive to the spacing) is flagged instead of refined.
    """
    lo, hi = float(delta_range[0]), float(delta_range[1])
    if not (0.0 < lo < hi):
        raise ValidationError(f"delta_range must satisfy 0 < lo < hi, got {delta_range!r}")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if 1.5 / lo > 1.0:
        raise ConfigurationError(f"delta lower bound {lo} Hz puts the echo beyond a 1 s horizon")
    photons = pulse.mean_photon_number if mean_photons is None else mean_photons

    trace: list[tuple[dict[str, float], float]] = []

    def evaluate(delta: float) -> float:
        fwhm = fwhm_per_period / delta if fwhm_per_period is not None else pulse.fwhm
        value = first_echo_efficiency(config, delta, fwhm,
                                      mean_photons=photons, emitted=emitted)
        trace.append(({"delta_hz": delta}, value))
        return value

    grid = np.linspace(lo, hi, _PRESCAN_POINTS)
    values = [evaluate(d) for d in grid]
    if _flat(values):
        i = int(np.argmax(values))
        return OptimizationReport("first_echo_efficiency_vs_delta", values[i],
                                  {"delta_hz": float(grid[i])}, len(trace), trace, flat=True)
    i = int(np.argmax(values))
    # bracket; at an endpoint fall back to refining the outermost cell
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    if b - a <= tol:
        best = max(trace, key=lambda item: item[1])
        return OptimizationReport("first_echo_efficiency_vs_delta", best[1],
                                  dict(best[0]), len(trace), trace)

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = evaluate(x1), evaluate(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = evaluate(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = evaluate(x2)
    best = max(trace, key=lambda item: item[1])
    return OptimizationReport("first_echo_efficiency_vs_delta", best[1],
                              dict(best[0]), len(trace), trace)


def optimize_fwhm(config: MemoryConfig, comb: CombConfig, fwhm_range: tuple[float, float],
                  n_points: int = 12, plateau_fraction: float = 0.95,
                  mean_photons: float = 1.0) -> OptimizationReport:
    """Smallest pulse width reaching the efficiency plateau for a fixed comb.

    Sweeps a geometric FWHM grid, then applies the plateau/knee analysis;
    best_params holds the knee, best_value the plateau efficiency.  No
    plateau in range propagates as a DiagnosticError.
    """
    lo, hi = float(fwhm_range[0]), float(fwhm_range[1])
    if not (0.0 < lo < hi):
        raise ValidationError(f"fwhm_range must satisfy 0 < lo < hi, got {fwhm_range!r}")
    grid = np.geomspace(lo, hi, n_points)
    trace = []
    values = []
    for w in grid:
        v = first_echo_efficiency(config, comb.delta, float(w), mean_photons=mean_photons)
        trace.append(({"fwhm_s": float(w)}, v))
        values.append(v)
    if _flat(values):
        i = int(np.argmax(values))
        return OptimizationReport("plateau_fwhm", values[i], {"fwhm_s": float(grid[i])},
                                  len(trace), trace, flat=True)
    sweep = bandwidth_from_sweep(grid, values, plateau_fraction=plateau_fraction)
    return OptimizationReport("plateau_fwhm", sweep.best_efficiency,
                              {"fwhm_s": sweep.knee}, len(trace), trace)


# ---------------------------------------------------------------------------
# grid sweeps

@dataclass
class GridSweep:
    axes: dict[str, tuple[float, ...]]
    points: list[dict[str, float]]
    values: list[float]
    errors: list[tuple[int, str]]


def efficiency_point(config: MemoryConfig, point: dict[str, float]) -> float:
    """Named grid objective: keys delta_hz and fwhm_s select the run."""
    return first_echo_efficiency(config, point["delta_hz"], point["fwhm_s"],
                                 mean_photons=point.get("mean_photon_number", 1.0))


def _eval_point(args):
    objective, config, point = args
    return objective(config, point)


def sweep_grid(config: MemoryConfig, axes: dict[str, list[float]],
               objective=efficiency_point, jobs: int = 1) -> GridSweep:
    """Dense evaluation of the objective over the Cartesian grid of axes.

    Points are ordered by the axes' given order (last axis fastest).  Per
    point failures are recorded, not fatal; failed points hold nan.  With
    jobs > 1 the points evaluate in a process pool (the objective must be
    picklable), and the output order stays the grid order.
    """
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValidationError("axes must be non-empty")
    names = list(axes.keys())
    points = [dict(zip(names, combo)) for combo in itertools.product(*axes.values())]
    tasks = [(objective, config, p) for p in points]
    values: list[float] = []
    errors: list[tuple[int, str]] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, outcome in enumerate(_map_recording(pool, tasks)):
                ok, payload = outcome
                if ok:
                    values.append(payload)
                else:
                    values.append(math.nan)
                    errors.append((i, payload))
    else:
        for i, task in enumerate(tasks):
            try:
                values.append(_eval_point(task))
            except Exception as exc:  # per-point failures are data, not crashes
                values.append(math.nan)
                errors.append((i, f"{type(exc).__name__}: {exc}"))
    return GridSweep(axes={k: tuple(v) for k, v in axes.items()},
                     points=points, values=values, errors=errors)


def _guarded_eval(task):
    try:
        return True, _eval_point(task)
    except Exception as exc:
        return False, f"{type(exc).__name__}: {exc}"


def _map_recording(pool, tasks):
    return pool.map(_guarded_eval, tasks)


def _bandwidth_point(args):
    config, delta, fwhm = args
    return first_echo_efficiency(config, delta, fwhm)


def bandwidth_vs_delta(config: MemoryConfig, deltas, n_fwhm: int = 12,
                       fwhm_span: tuple[float, float] = (0.07, 0.7),
                       jobs: int = 1) -> list[SweepResult]:
    """Per-spacing FWHM sweeps: plateau efficiency and bandwidth for each delta.

    The FWHM grid scales with the comb period (fwhm_span in units of
    1/delta, a decade by default) so every spacing is probed in the same
    dimensionless range.
    """
    deltas = [float(d) for d in deltas]
    tasks = []
    grids = []
    for d in deltas:
        grid = np.geomspace(fwhm_span[0] / d, fwhm_span[1] / d, n_fwhm)
        grids.append(grid)
        tasks.extend((config, d, float(w)) for w in grid)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(_bandwidth_point, tasks))
    else:
        flat = [_bandwidth_point(t) for t in tasks]
    out = []
    k = 0
    for grid in grids:
        values = flat[k:k + len(grid)]
        k += len(grid)
        out.append(bandwidth_from_sweep(grid, values))
    return out
