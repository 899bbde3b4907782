"""TOML config ingestion with strict key checking and recorded defaults.

Every key carries its unit as a suffix (``delta_hz``, ``fwhm_s``); there
are no hidden conversions.  Unknown keys are rejected; missing keys are
filled from the device defaults and the filled paths are recorded so a run
manifest can list them.  Serialization is deterministic (fixed key order,
shortest round-trip float formatting) so resolved configs reproduce runs
byte for byte.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ValidationError
from .dynamics import DEFAULT_DT, Pulse, PulseTrain
from .model import (CombConfig, MemoryConfig, build_comb,
                    DEFAULT_CENTER_FREQUENCY_HZ, DEFAULT_DELTA_HZ,
                    DEFAULT_KAPPA_C_HZ, DEFAULT_KAPPA_I_HZ, DEFAULT_N_RESONATORS)
from .schedules import DetuningSchedule, Segment

_MEMORY_KEYS = {"n_resonators", "center_frequency_hz", "kappa_c_hz", "kappa_i_hz",
                "spacing_phase_rad"}
_COMB_KEYS = {"delta_hz", "detunings_hz"}
_PULSE_KEYS = {"center_time_s", "fwhm_s", "mean_photon_number", "phase_rad",
               "carrier_detuning_hz"}
_SEGMENT_KEYS = {"t_start_s", "t_end_s", "stage", "detunings_hz"}
_SOLVER_KEYS = {"dt_s", "t_end_s"}
_SECTIONS = {"memory", "comb", "pulses", "schedule", "solver"}

DEFAULT_PULSE_CENTER_S = 0.5e-6
DEFAULT_PULSE_FWHM_S = 97e-9


@dataclass
class SolverSettings:
    dt: float = DEFAULT_DT
    t_end: float | None = None


@dataclass
class RunConfig:
    """Fully resolved, validated objects plus bookkeeping for the manifest."""

    memory: MemoryConfig
    comb: CombConfig
    pulses: PulseTrain
    solver: SolverSettings
    schedule: DetuningSchedule | None = None
    defaults_applied: list[str] = field(default_factory=list)
    source_digest: str = ""


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where} must be a number, got {value!r}")
    return float(value)


def _rate_list(value, n: int, where: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * n
    if isinstance(value, list):
        return tuple(_as_float(v, where) for v in value)
    raise ValidationError(f"{where} must be a number or a list of numbers")


def resolve(data: dict, defaults_applied: list[str] | None = None) -> RunConfig:
    """Validate a parsed TOML document and fill defaults."""
    filled = defaults_applied if defaults_applied is not None else []
    if not isinstance(data, dict):
        raise ValidationError("config root must be a table")
    _reject_unknown(data, _SECTIONS, "top level")

    mem_tbl = data.get("memory", {})
    _reject_unknown(mem_tbl, _MEMORY_KEYS, "memory")
    if "n_resonators" in mem_tbl:
        n = mem_tbl["n_resonators"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise ValidationError("memory.n_resonators must be an integer")
    else:
        n = DEFAULT_N_RESONATORS
        filled.append("memory.n_resonators")
    if "center_frequency_hz" in mem_tbl:
        center = _as_float(mem_tbl["center_frequency_hz"], "memory.center_frequency_hz")
    else:
        center = DEFAULT_CENTER_FREQUENCY_HZ
        filled.append("memory.center_frequency_hz")
    if "kappa_c_hz" in mem_tbl:
        kappa_c = _rate_list(mem_tbl["kappa_c_hz"], n, "memory.kappa_c_hz")
    else:
        kappa_c = (DEFAULT_KAPPA_C_HZ,) * n
        filled.append("memory.kappa_c_hz")
    if "kappa_i_hz" in mem_tbl:
        kappa_i = _rate_list(mem_tbl["kappa_i_hz"], n, "memory.kappa_i_hz")
    else:
        kappa_i = (DEFAULT_KAPPA_I_HZ,) * n
        filled.append("memory.kappa_i_hz")
    spacing = None
    if "spacing_phase_rad" in mem_tbl:
        spacing = tuple(_as_float(v, "memory.spacing_phase_rad") for v in mem_tbl["spacing_phase_rad"])
    else:
        filled.append("memory.spacing_phase_rad")
    memory = MemoryConfig(n_resonators=n, center_frequency=center, kappa_c=kappa_c,
                          kappa_i=kappa_i, spacing_phase=spacing)

    comb_tbl = data.get("comb", {})
    _reject_unknown(comb_tbl, _COMB_KEYS, "comb")
    if "delta_hz" in comb_tbl:
        delta = _as_float(comb_tbl["delta_hz"], "comb.delta_hz")
        if delta <= 0:
            raise ValidationError(f"comb.delta_hz must be positive, got {delta!r}")
    else:
        delta = DEFAULT_DELTA_HZ
        filled.append("comb.delta_hz")
    if "detunings_hz" in comb_tbl:
        dets = tuple(_as_float(v, "comb.detunings_hz") for v in comb_tbl["detunings_hz"])
        if len(dets) != n:
            raise ValidationError(f"comb.detunings_hz must list {n} values, got {len(dets)}")
        comb = CombConfig(delta=delta, detunings=dets)
    else:
        comb = build_comb(n, delta)
        filled.append("comb.detunings_hz")

    pulses_tbl = data.get("pulses", {})
    _reject_unknown(pulses_tbl, {"pulse"}, "pulses")
    pulse_rows = pulses_tbl.get("pulse")
    if pulse_rows is None:
        pulse_rows = [{}]
        filled.append("pulses.pulse")
    pulses = []
    for i, row in enumerate(pulse_rows):
        where = f"pulses.pulse[{i}]"
        _reject_unknown(row, _PULSE_KEYS, where)
        def get(key, default):
            if key in row:
                return _as_float(row[key], f"{where}.{key}")
            filled.append(f"{where}.{key}")
            return default
        pulses.append(Pulse(
            center_time=get("center_time_s", DEFAULT_PULSE_CENTER_S),
            fwhm=get("fwhm_s", DEFAULT_PULSE_FWHM_S),
            mean_photon_number=get("mean_photon_number", 1.0),
            phase=get("phase_rad", 0.0),
            carrier_detuning=get("carrier_detuning_hz", 0.0)))
    train = PulseTrain(tuple(pulses))

    schedule = None
    if "schedule" in data:
        sched_tbl = data["schedule"]
        _reject_unknown(sched_tbl, {"segment"}, "schedule")
        segs = []
        for i, row in enumerate(sched_tbl.get("segment", [])):
            where = f"schedule.segment[{i}]"
            _reject_unknown(row, _SEGMENT_KEYS, where)
            for key in ("t_start_s", "t_end_s", "detunings_hz"):
                if key not in row:
                    raise ValidationError(f"{where} is missing {key}")
            stage = row.get("stage", "write")
            if not isinstance(stage, str):
                raise ValidationError(f"{where}.stage must be a string")
            segs.append(Segment(
                t_start=_as_float(row["t_start_s"], f"{where}.t_start_s"),
                t_end=_as_float(row["t_end_s"], f"{where}.t_end_s"),
                detunings=tuple(_as_float(v, f"{where}.detunings_hz") for v in row["detunings_hz"]),
                stage=stage))
        if segs:
            schedule = DetuningSchedule(tuple(segs))

    solver_tbl = data.get("solver", {})
    _reject_unknown(solver_tbl, _SOLVER_KEYS, "solver")
    if "dt_s" in solver_tbl:
        dt = _as_float(solver_tbl["dt_s"], "solver.dt_s")
        if dt <= 0:
            raise ValidationError("solver.dt_s must be positive")
    else:
        dt = DEFAULT_DT
        filled.append("solver.dt_s")
    t_end = _as_float(solver_tbl["t_end_s"], "solver.t_end_s") if "t_end_s" in solver_tbl else None

    return RunConfig(memory=memory, comb=comb, pulses=train,
                     solver=SolverSettings(dt=dt, t_end=t_end),
                     schedule=schedule, defaults_applied=filled)


def parse_config(path) -> RunConfig:
    """Parse and validate a TOML config file."""
    with open(path, "rb") as f:
        raw = f.read()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error in {path}: {exc}") from exc
    cfg = resolve(data)
    cfg.source_digest = hashlib.sha256(raw).hexdigest()
    return cfg


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error: {exc}") from exc
    cfg = resolve(data)
    cfg.source_digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return cfg


def default_config() -> RunConfig:
    return resolve({})


# ---------------------------------------------------------------------------
# deterministic serialization

def _fmt(value) -> str:
    if isinstance(value, bool):
        raise ValidationError("booleans have no place in this config")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value) or math.isnan(value):
            raise ValidationError("non-finite values cannot be serialized")
        text = repr(value)
        # TOML floats need a dot or exponent
        return text if ("." in text or "e" in text or "E" in text) else text + ".0"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise ValidationError(f"cannot serialize {type(value).__name__}")


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def serialize_config(cfg: RunConfig) -> str:
    """Fully resolved TOML; parsing it back reproduces the same objects."""
    mem = cfg.memory
    lines = [
        "[memory]",
        f"n_resonators = {mem.n_resonators}",
        f"center_frequency_hz = {_fmt(mem.center_frequency)}",
        f"kappa_c_hz = {_fmt_list(mem.kappa_c)}",
        f"kappa_i_hz = {_fmt_list(mem.kappa_i)}",
        f"spacing_phase_rad = {_fmt_list(mem.spacing_phase)}",
        "",
        "[comb]",
        f"delta_hz = {_fmt(cfg.comb.delta)}",
        f"detunings_hz = {_fmt_list(cfg.comb.detunings)}",
        "",
    ]
    for p in cfg.pulses.pulses:
        lines += [
            "[[pulses.pulse]]",
            f"center_time_s = {_fmt(p.center_time)}",
            f"fwhm_s = {_fmt(p.fwhm)}",
            f"mean_photon_number = {_fmt(p.mean_photon_number)}",
            f"phase_rad = {_fmt(p.phase)}",
            f"carrier_detuning_hz = {_fmt(p.carrier_detuning)}",
            "",
        ]
    if cfg.schedule is not None:
        for seg in cfg.schedule.segments:
            lines += [
                "[[schedule.segment]]",
                f"t_start_s = {_fmt(seg.t_start)}",
                f"t_end_s = {_fmt(seg.t_end)}",
                f"stage = {_fmt(seg.stage)}",
                f"detunings_hz = {_fmt_list(seg.detunings)}",
                "",
            ]
    lines.append("[solver]")
    lines.append(f"dt_s = {_fmt(cfg.solver.dt)}")
    if cfg.solver.t_end is not None:
        lines.append(f"t_end_s = {_fmt(cfg.solver.t_end)}")
    lines.append("")
    return "\n".join(lines)
