"""Command-line driver: experiment subcommands with CSV outputs and manifests.

Every subcommand reads one TOML config (all keys optional), writes
plot-ready CSV files plus a run manifest into the output directory, and
exits 0 on success, 2 on a validation/configuration problem, 3 on a
numerical diagnostic.  Partial outputs are removed on failure.  Outputs
are deterministic: the same resolved config gives byte-identical CSVs
regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import CombMemError, ConfigurationError, DiagnosticError, ValidationError
from .analysis import (bandwidth_from_sweep, decay_fit, echo_peak_time, echo_windows,
                       storage_efficiency, write_sweep_csv, write_trace_csv)
from .config import RunConfig, default_config, parse_config, serialize_config
from .dynamics import Pulse, PulseTrain, simulate, transmission_spectrum
from .model import build_comb, spectral_span
from .optimizer import (bandwidth_vs_delta, first_echo_efficiency, optimize_delta,
                        optimize_fwhm)
from .schedules import multimode_schedule, static_comb, write_close_read
from .timebin import TimeBinState, run_protocol, timebin_schedule, write_timebin_csv

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIAGNOSTIC = 3

OUT_ENV_VAR = "COMBMEM_OUT"


class _Emitter:
    """Tracks files written by a subcommand so failures leave no partial output."""

    def __init__(self, outdir: str):
        self.outdir = outdir
        self.files: list[str] = []

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.outdir, name)

    def cleanup(self) -> None:
        for name in self.files:
            full = os.path.join(self.outdir, name)
            if os.path.exists(full):
                os.remove(full)


def _write_manifest(emit: _Emitter, cfg: RunConfig, command: str,
                    params: dict, started: float, summary: dict | None = None) -> None:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "parameters": params,
        "config_digest_sha256": cfg.source_digest,
        "defaults_applied": cfg.defaults_applied,
        "resolved_config": serialize_config(cfg),
        "emitted_files": list(emit.files),
        "duration_s": time.monotonic() - started,
    }
    if summary is not None:
        manifest["summary"] = summary
    with open(os.path.join(emit.outdir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else default_config()
    if args.dt is not None:
        if args.dt <= 0:
            raise ValidationError("--dt must be positive")
        cfg.solver.dt = args.dt
    return cfg


def _outdir(args) -> str:
    out = args.out or os.environ.get(OUT_ENV_VAR) or "combmem_out"
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands

def _cmd_spectrum(cfg: RunConfig, args, emit: _Emitter) -> dict:
    span = args.span if args.span is not None else spectral_span(cfg.comb) + 8.0 * cfg.comb.delta
    probes = np.linspace(-span / 2.0, span / 2.0, args.points)
    s21 = transmission_spectrum(cfg.memory, cfg.comb.detunings, probes)
    with open(emit.path("spectrum.csv"), "w", newline="") as f:
        f.write("f_hz,re,im,abs\n")
        for nu, val in zip(probes.tolist(), s21.tolist()):
            f.write(f"{nu!r},{val.real!r},{val.imag!r},{abs(val)!r}\n")
    return {"min_abs_s21": float(np.min(np.abs(s21)))}


def _default_echo_t_end(cfg: RunConfig, orders: int) -> float:
    peak = max(p.center_time for p in cfg.pulses.pulses)
    fwhm = max(p.fwhm for p in cfg.pulses.pulses)
    return peak + (orders + 0.5) / cfg.comb.delta + 4.0 * fwhm


def _cmd_echo(cfg: RunConfig, args, emit: _Emitter) -> dict:
    t_end = cfg.solver.t_end or _default_echo_t_end(cfg, args.orders)
    schedule = cfg.schedule or static_comb(cfg.comb, t_end)
    result = simulate(cfg.memory, schedule, cfg.pulses, t_end=t_end, dt=cfg.solver.dt)
    peak = cfg.pulses.first_peak
    windows = echo_windows(schedule, cfg.comb.delta, peak, args.orders)
    metrics = storage_efficiency(result, windows)
    write_trace_csv(emit.path("input.csv"), result.time_grid, result.s_in)
    write_trace_csv(emit.path("transmitted.csv"), result.time_grid, result.s_T)
    write_trace_csv(emit.path("reflected.csv"), result.time_grid, result.s_R)
    summary = {
        "efficiency": metrics.efficiency,
        "echo_phase_rad": metrics.echo_phase,
        "input_energy": metrics.input_energy,
        "first_echo_peak_s": echo_peak_time(result, windows[0]),
        "energies_T": {str(k): v for k, v in metrics.energies_T.items()},
        "energies_R": {str(k): v for k, v in metrics.energies_R.items()},
        "energy_balance_error": result.energy_balance_error(),
    }
    with open(emit.path("metrics.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def _cmd_sweep_fwhm(cfg: RunConfig, args, emit: _Emitter) -> dict:
    delta = cfg.comb.delta
    lo = args.fwhm_min if args.fwhm_min is not None else 0.07 / delta
    hi = args.fwhm_max if args.fwhm_max is not None else 0.7 / delta
    sweep = bandwidth_vs_delta(cfg.memory, [delta], n_fwhm=args.points,
                               fwhm_span=(lo * delta, hi * delta), jobs=args.jobs)[0]
    write_sweep_csv(emit.path("sweep_fwhm.csv"), sweep.axis, sweep.efficiencies)
    return {"bandwidth_hz": sweep.bandwidth, "plateau_efficiency": sweep.best_efficiency,
            "knee_fwhm_s": sweep.knee}


def _cmd_sweep_delta(cfg: RunConfig, args, emit: _Emitter) -> dict:
    deltas = np.linspace(args.delta_min, args.delta_max, args.delta_points)
    sweeps = bandwidth_vs_delta(cfg.memory, deltas, n_fwhm=args.fwhm_points, jobs=args.jobs)
    best = [s.best_efficiency for s in sweeps]
    bw = [s.bandwidth for s in sweeps]
    write_sweep_csv(emit.path("sweep_delta_eta.csv"), deltas, best)
    write_sweep_csv(emit.path("sweep_delta_bandwidth.csv"), deltas, bw,
                    header="axis,bandwidth_hz")
    slope, intercept = np.polyfit(deltas, bw, 1)
    pred = slope * deltas + intercept
    ss_res = float(np.sum((np.asarray(bw) - pred) ** 2))
    ss_tot = float(np.sum((np.asarray(bw) - np.mean(bw)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"bandwidth_fit_slope": float(slope), "bandwidth_fit_r2": r2,
            "best_efficiencies": [float(v) for v in best]}


def _cmd_ondemand(cfg: RunConfig, args, emit: _Emitter) -> dict:
    delta = cfg.comb.delta
    pulse = cfg.pulses.pulses[0]
    peak = pulse.center_time
    t_write = peak + 0.5 / delta
    closes = np.linspace(0.0, args.t_close_max, args.points)
    map_path = emit.path("ondemand_map.csv")
    storage_times = []
    etas = []
    with open(map_path, "w", newline="") as f:
        f.write("t_close_s,delay_s,abs\n")
        for t_c in closes:
            t_end = peak + 1.5 / delta + t_c + 2.0 * pulse.fwhm
            schedule = write_close_read(cfg.comb, t_write, float(t_c), t_end) \
                if t_c > 0 else static_comb(cfg.comb, t_end)
            result = simulate(cfg.memory, schedule, PulseTrain((pulse,)),
                              t_end=t_end, dt=cfg.solver.dt)
            sel = slice(int(round(peak / result.dt)), None, args.stride)
            for t, amp in zip(result.time_grid[sel], np.abs(result.s_T[sel])):
                f.write(f"{float(t_c)!r},{float(t - peak)!r},{float(amp)!r}\n")
            windows = echo_windows(schedule, delta, peak, 1)
            etas.append(storage_efficiency(result, windows).efficiency)
            storage_times.append(1.0 / delta + float(t_c))
    write_sweep_csv(emit.path("decay.csv"), storage_times, etas)
    summary: dict = {"storage_times_s": storage_times, "efficiencies": etas}
    if any(k > 0 for k in cfg.memory.kappa_i) and len(etas) >= 4:
        summary["decay_time_constant_s"] = decay_fit(storage_times, etas)
    return summary


def _cmd_multimode(cfg: RunConfig, args, emit: _Emitter) -> dict:
    delta = cfg.comb.delta
    t0 = args.t0
    sep = args.separation
    pulses = PulseTrain((
        Pulse(center_time=t0, fwhm=args.fwhm),
        Pulse(center_time=t0 + sep, fwhm=args.fwhm),
    ))
    t_write = t0 + sep + 0.5 / delta
    t_c1 = args.t_close1
    s2 = t0 + 1.0 / delta + t_c1 + sep / 2.0 + 20e-9
    closes2 = np.linspace(args.t_close2_min, args.t_close2_max, args.points)
    peaks1, peaks2 = [], []
    with open(emit.path("multimode_map.csv"), "w", newline="") as f:
        f.write("t_close2_s,delay_s,abs\n")
        for t_c2 in closes2:
            t_end = t0 + sep + 1.0 / delta + t_c1 + float(t_c2) + sep + 0.3e-6
            schedule = multimode_schedule(
                cfg.comb, t_write,
                [(t_write, t_write + t_c1), (s2, s2 + float(t_c2))], t_end)
            result = simulate(cfg.memory, schedule, pulses, t_end=t_end, dt=cfg.solver.dt)
            sel = slice(int(round(t0 / result.dt)), None, args.stride)
            for t, amp in zip(result.time_grid[sel], np.abs(result.s_T[sel])):
                f.write(f"{float(t_c2)!r},{float(t - t0)!r},{float(amp)!r}\n")
            win1 = echo_windows(schedule, delta, t0, 1, half_width=sep / 2.0)[0]
            win2 = echo_windows(schedule, delta, t0 + sep, 1, half_width=sep / 2.0)[0]
            peaks1.append(echo_peak_time(result, win1) - t0)
            peaks2.append(echo_peak_time(result, win2) - t0 - sep)
    return {"t_close2_s": [float(v) for v in closes2],
            "first_mode_delay_s": peaks1, "second_mode_delay_s": peaks2}


def _cmd_timebin(cfg: RunConfig, args, emit: _Emitter) -> dict:
    delta = cfg.comb.delta
    amp = math.sqrt(0.5)
    # half a comb period puts each bin's window at the other bin's darkest point
    separation = args.separation if args.separation is not None else 0.5 / delta
    phis = np.linspace(0.0, 2.0 * math.pi, args.phi_points, endpoint=False)
    closes = np.linspace(args.t_close_min, args.t_close_max, args.t_close_points) \
        if args.t_close_points > 1 else np.array([args.t_close_min])
    rows = []
    worst_f = 1.0
    for t_c in closes:
        for phi in phis:
            state = TimeBinState(a_e=amp, a_l=amp, phi=float(phi),
                                 bin_separation=separation, fwhm=args.fwhm)
            schedule = timebin_schedule(cfg.comb, state, args.t0, float(t_c))
            report = run_protocol(cfg.memory, schedule, delta, state, args.t0,
                                  mean_photons=args.photons, dt=cfg.solver.dt,
                                  half_width=args.half_width)
            rows.append((phi, report.storage_time, report.amplitude_ratio,
                         report.phase_deviation, report.fidelity_early,
                         report.fidelity_late))
            worst_f = min(worst_f, report.fidelity_early, report.fidelity_late)
    write_timebin_csv(emit.path("timebin.csv"), rows)
    return {"worst_fidelity": worst_f, "runs": len(rows)}


def _cmd_optimize(cfg: RunConfig, args, emit: _Emitter) -> dict:
    if args.param == "delta":
        pulse = cfg.pulses.pulses[0]
        report = optimize_delta(cfg.memory, pulse, (args.min, args.max), args.tol,
                                fwhm_per_period=args.fwhm_per_period)
    else:
        comb = cfg.comb
        report = optimize_fwhm(cfg.memory, comb, (args.min, args.max), n_points=args.points)
    payload = {
        "objective": report.objective,
        "best_value": report.best_value,
        "best_params": report.best_params,
        "evaluations": report.evaluations,
        "flat_objective": report.flat,
        "trace": [[params, value] for params, value in report.trace],
    }
    with open(emit.path("optimize_report.json"), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return {"best_value": report.best_value, "best_params": report.best_params}


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combmem",
        description="Multi-resonator frequency-comb memory simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./combmem_out)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--dt", type=float, default=None, help="integrator step override (s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="steady-state S21 over probe detunings")
    p.add_argument("--span", type=float, default=None, help="probe span in Hz, centered on the carrier")
    p.add_argument("--points", type=int, default=801)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("echo", parents=[common], help="static-comb storage run with echo metrics")
    p.add_argument("--orders", type=int, default=2, help="echo orders to window")
    p.set_defaults(func=_cmd_echo)

    p = sub.add_parser("sweep-fwhm", parents=[common], help="efficiency vs input pulse width")
    p.add_argument("--fwhm-min", type=float, default=None)
    p.add_argument("--fwhm-max", type=float, default=None)
    p.add_argument("--points", type=int, default=12)
    p.set_defaults(func=_cmd_sweep_fwhm)

    p = sub.add_parser("sweep-delta", parents=[common], help="plateau efficiency and bandwidth vs comb spacing")
    p.add_argument("--delta-min", type=float, default=3.5e6)
    p.add_argument("--delta-max", type=float, default=18e6)
    p.add_argument("--delta-points", type=int, default=6)
    p.add_argument("--fwhm-points", type=int, default=12)
    p.set_defaults(func=_cmd_sweep_delta)

    p = sub.add_parser("ondemand", parents=[common], help="close-stage storage-time scan")
    p.add_argument("--t-close-max", type=float, default=1.2e-6)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--stride", type=int, default=4, help="map downsampling stride")
    p.set_defaults(func=_cmd_ondemand)

    p = sub.add_parser("multimode", parents=[common], help="two-mode storage with two close stages")
    p.add_argument("--t0", type=float, default=0.3e-6)
    p.add_argument("--separation", type=float, default=150e-9)
    p.add_argument("--fwhm", type=float, default=50e-9)
    p.add_argument("--t-close1", type=float, default=455e-9)
    p.add_argument("--t-close2-min", type=float, default=510e-9)
    p.add_argument("--t-close2-max", type=float, default=950e-9)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--stride", type=int, default=4)
    p.set_defaults(func=_cmd_multimode)

    p = sub.add_parser("timebin", parents=[common], help="time-bin qubit storage and fidelity")
    p.add_argument("--t0", type=float, default=0.3e-6)
    p.add_argument("--separation", type=float, default=None,
                   help="bin separation (s); default half a comb period")
    p.add_argument("--fwhm", type=float, default=70e-9)
    p.add_argument("--photons", type=float, default=1.0)
    p.add_argument("--half-width", type=float, default=10e-9,
                   help="echo-window half width (s)")
    p.add_argument("--phi-points", type=int, default=8)
    p.add_argument("--t-close-min", type=float, default=300e-9)
    p.add_argument("--t-close-max", type=float, default=300e-9)
    p.add_argument("--t-close-points", type=int, default=1)
    p.set_defaults(func=_cmd_timebin)

    p = sub.add_parser("optimize", parents=[common], help="optimize comb spacing or pulse width")
    p.add_argument("--param", choices=("delta", "fwhm"), required=True)
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--tol", type=float, default=None, help="spacing tolerance (delta mode)")
    p.add_argument("--points", type=int, default=12, help="grid points (fwhm mode)")
    p.add_argument("--fwhm-per-period", type=float, default=None,
                   help="probe each spacing with fwhm = this fraction of the comb period")
    p.set_defaults(func=_cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "param", None) == "delta" and args.tol is None:
        args.tol = 0.02 * (args.max - args.min)
    started = time.monotonic()
    try:
        cfg = _load_config(args)
        outdir = _outdir(args)
        emit = _Emitter(outdir)
        try:
            params = {k: v for k, v in vars(args).items()
                      if k not in ("func", "command") and not callable(v)}
            summary = args.func(cfg, args, emit)
            _write_manifest(emit, cfg, args.command, params, started, summary)
        except Exception:
            emit.cleanup()
            raise
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DiagnosticError as exc:
        print(f"diagnostic: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except CombMemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
