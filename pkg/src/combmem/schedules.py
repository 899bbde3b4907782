"""Piecewise-constant detuning schedules: write / close / read protocols.

A schedule is a gap-free ordered list of segments, each holding one
detuning per resonator.  During a ``close`` segment all detunings are
equal, so the relative phases of the stored amplitudes freeze and the
excitation is held as a non-radiative dark state until the comb is
restored.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .model import CombConfig

STAGES = ("write", "close", "read")

# absolute slack (seconds) for contiguity checks on float boundaries
_T_EPS = 1e-15


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    detunings: tuple[float, ...]
    stage: str = "write"

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValidationError(f"unknown stage {self.stage!r}, expected one of {STAGES}")
        if not self.t_end > self.t_start:
            raise ValidationError(f"segment must have positive duration ({self.t_start} .. {self.t_end})")
        dets = tuple(float(d) for d in self.detunings)
        if not dets:
            raise ValidationError("segment needs at least one detuning")
        if self.stage == "close" and any(d != dets[0] for d in dets):
            raise ValidationError("a close segment must hold all resonators at the same frequency")
        object.__setattr__(self, "detunings", dets)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class DetuningSchedule:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValidationError("schedule needs at least one segment")
        if abs(segs[0].t_start) > _T_EPS:
            raise ValidationError("schedule must start at t = 0")
        n = len(segs[0].detunings)
        for prev, cur in zip(segs, segs[1:]):
            if abs(cur.t_start - prev.t_end) > _T_EPS:
                raise ValidationError(
                    f"schedule has a gap or overlap between t={prev.t_end} and t={cur.t_start}")
            if len(cur.detunings) != n:
                raise ValidationError("all segments must cover the same number of resonators")
        object.__setattr__(self, "segments", segs)

    @property
    def n_resonators(self) -> int:
        return len(self.segments[0].detunings)

    @property
    def end_time(self) -> float:
        return self.segments[-1].t_end

    def detunings_at(self, t: float) -> tuple[float, ...]:
        """Detunings of the segment containing t (right-continuous)."""
        for seg in self.segments:
            if seg.t_start - _T_EPS <= t < seg.t_end:
                return seg.detunings
        if abs(t - self.end_time) <= _T_EPS:
            return self.segments[-1].detunings
        raise ValidationError(f"t={t} is outside the schedule [0, {self.end_time}]")

    def close_time_before(self, t: float, t_from: float = 0.0) -> float:
        """Total time spent in close segments within [t_from, t]."""
        total = 0.0
        for seg in self.segments:
            if seg.stage != "close":
                continue
            lo = max(seg.t_start, t_from)
            hi = min(seg.t_end, t)
            if hi > lo:
                total += hi - lo
        return total


def static_comb(comb: CombConfig, t_end: float) -> DetuningSchedule:
    """Single write segment holding the comb for the whole run."""
    if t_end <= 0:
        raise ValidationError(f"t_end must be positive, got {t_end!r}")
    return DetuningSchedule((Segment(0.0, float(t_end), comb.detunings, "write"),))


def write_close_read(comb: CombConfig, t_write_end: float, t_close: float,
                     t_end: float, close_detuning: float = 0.0) -> DetuningSchedule:
    """Write with the comb, park all resonators at one frequency, restore.

    The common close frequency defaults to the carrier (zero detuning); any
    common value is equivalent up to a global phase.  t_close = 0 degenerates
    to the static comb.
    """
    if t_write_end <= 0:
        raise ValidationError(f"t_write_end must be positive, got {t_write_end!r}")
    if t_close < 0:
        raise ValidationError(f"t_close must be >= 0, got {t_close!r}")
    if t_end <= t_write_end + t_close:
        raise ValidationError("t_end must leave room for the read stage")
    n = comb.n
    segs = [Segment(0.0, float(t_write_end), comb.detunings, "write")]
    t_read = t_write_end + t_close
    if t_close > 0:
        segs.append(Segment(float(t_write_end), float(t_read), (float(close_detuning),) * n, "close"))
    segs.append(Segment(float(t_read), float(t_end), comb.detunings, "read"))
    return DetuningSchedule(tuple(segs))


def echo_suppression(base: DetuningSchedule, t_after_first_echo: float,
                     close_detuning: float = 0.0) -> DetuningSchedule:
    """Hold the resonators at one frequency from t_after_first_echo onward.

    Cutting in right after the first re-emission freezes whatever is still
    stored, so the later-order echoes never form.  A cut beyond the schedule
    end is a no-op.
    """
    t = float(t_after_first_echo)
    if t <= 0:
        raise ValidationError(f"t_after_first_echo must be positive, got {t!r}")
    if t >= base.end_time - _T_EPS:
        return base
    n = base.n_resonators
    segs: list[Segment] = []
    for seg in base.segments:
        if seg.t_end <= t + _T_EPS:
            segs.append(seg)
        elif seg.t_start < t:
            segs.append(Segment(seg.t_start, t, seg.detunings, seg.stage))
    segs.append(Segment(t, base.end_time, (float(close_detuning),) * n, "close"))
    return DetuningSchedule(tuple(segs))


def multimode_schedule(comb: CombConfig, t_write_end: float,
                       close_windows: list[tuple[float, float]], t_end: float,
                       close_detuning: float = 0.0) -> DetuningSchedule:
    """Comb interleaved with close windows for per-mode storage times.

    Each (t_start, t_end) window freezes every mode still stored at that
    moment; modes whose echo already left are unaffected.  An empty window
    list degenerates to the static comb.
    """
    if t_write_end <= 0:
        raise ValidationError(f"t_write_end must be positive, got {t_write_end!r}")
    windows = [(float(a), float(b)) for a, b in close_windows]
    for a, b in windows:
        if b <= a:
            raise ValidationError(f"close window ({a}, {b}) must have positive duration")
        if a < t_write_end:
            raise ValidationError(f"close window starting at {a} overlaps the write stage")
    for (a0, b0), (a1, b1) in zip(windows, windows[1:]):
        if a1 < b0:
            raise ValidationError(f"close windows ({a0}, {b0}) and ({a1}, {b1}) overlap or are unordered")
    if windows and t_end <= windows[-1][1]:
        raise ValidationError("t_end must extend past the last close window")
    if t_end <= t_write_end:
        raise ValidationError("t_end must extend past the write stage")

    n = comb.n
    common = (float(close_detuning),) * n
    segs: list[Segment] = []
    cursor, stage = 0.0, "write"
    for a, b in windows:
        if a > cursor:
            segs.append(Segment(cursor, a, comb.detunings, stage))
        segs.append(Segment(a, b, common, "close"))
        cursor, stage = b, "read"
    if t_end > cursor:
        segs.append(Segment(cursor, float(t_end), comb.detunings, stage))
    return DetuningSchedule(tuple(segs))


def snap_to_grid(schedule: DetuningSchedule, dt: float) -> DetuningSchedule:
    """Snap segment boundaries to the nearest integration step.

    Keeps the piecewise-constant generator exactly aligned with the grid;
    segments shorter than one step are absorbed into their neighbors.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    segs: list[Segment] = []
    for seg in schedule.segments:
        k0 = round(seg.t_start / dt)
        k1 = round(seg.t_end / dt)
        if k1 <= k0:
            continue
        segs.append(Segment(k0 * dt, k1 * dt, seg.detunings, seg.stage))
    if not segs:
        raise ValidationError("schedule collapses to nothing on this grid; reduce dt")
    return DetuningSchedule(tuple(segs))
