"""Accelerometer step counting and night-time sleep tracking.

The step counter flags a step whenever the acceleration magnitude jumps by
more than ``step_threshold`` relative to the previous reading, provided the
previous counted step is more than ``debounce_ms`` old. Sleep is accrued on
a fixed-cadence clock: inside the night window, more than two hours without
a counted step marks the user asleep and each tick adds its length; the
first step seen while asleep between midnight and the window end adds a
fixed compensation and wakes the user.

Timestamps are milliseconds since the Unix epoch and are read as UTC wall
clock. Magnitudes are gravity-removed, so a resting phone reads near zero.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

MS_PER_MIN = 60_000
MS_PER_HOUR = 3_600_000


class TraceOrderError(ValueError):
    pass


class AccelSample(NamedTuple):
    t: int
    x: float
    y: float
    z: float

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class SensorConfig:
    step_threshold: float = 1.8
    stride_m: float = 0.5
    debounce_ms: int = 300
    sleep_start_hour: int = 22
    sleep_end_hour: int = 10
    inactivity_min: float = 120.0
    compensation_hrs: float = 2.0
    tick_min: int = 1
    reset_at_window_start: bool = True

    def validate(self) -> None:
        if self.step_threshold <= 0:
            raise ValueError("step_threshold must be > 0")
        if self.stride_m <= 0:
            raise ValueError("stride_m must be > 0")
        if self.debounce_ms <= 0:
            raise ValueError("debounce_ms must be > 0")
        if self.tick_min < 1:
            raise ValueError("tick_min must be >= 1")
        if not (0 <= self.sleep_start_hour < 24 and 0 <= self.sleep_end_hour < 24):
            raise ValueError("sleep window hours must lie in [0, 24)")
        if self.inactivity_min < 0 or self.compensation_hrs < 0:
            raise ValueError("inactivity_min and compensation_hrs must be >= 0")


@dataclass(frozen=True)
class TrackerState:
    last_magnitude: float = 0.0
    last_step_time: int = 0
    step_count: int = 0
    distance_m: float = 0.0
    last_activity_time: int = 0
    is_sleeping: bool = False
    sleep_hours: float = 0.0
    last_sample_time: int | None = None
    next_tick: int | None = None


class DaySummary(NamedTuple):
    steps: int
    distance_km: float
    sleep_hrs: float


def step_update(state: TrackerState, sample: AccelSample,
                cfg: SensorConfig = SensorConfig()) -> TrackerState:
    if state.last_sample_time is not None and sample.t < state.last_sample_time:
        raise TraceOrderError(
            f"sample at t={sample.t} precedes previous sample at t={state.last_sample_time}"
        )
    mag = sample.magnitude
    if (abs(mag - state.last_magnitude) > cfg.step_threshold
            and sample.t - state.last_step_time > cfg.debounce_ms):
        steps = state.step_count + 1
        return replace(
            state,
            last_magnitude=mag,
            last_step_time=sample.t,
            step_count=steps,
            # recomputed, not accumulated, so distance stays exactly steps * stride
            distance_m=steps * cfg.stride_m,
            last_activity_time=sample.t,
            last_sample_time=sample.t,
        )
    return replace(state, last_magnitude=mag, last_sample_time=sample.t)


def _hour(t_ms: int) -> int:
    return (t_ms // MS_PER_HOUR) % 24


def in_sleep_window(t_ms: int, cfg: SensorConfig) -> bool:
    h = _hour(t_ms)
    if cfg.sleep_start_hour > cfg.sleep_end_hour:
        return h >= cfg.sleep_start_hour or h < cfg.sleep_end_hour
    return cfg.sleep_start_hour <= h < cfg.sleep_end_hour


def sleep_tick(state: TrackerState, now: int,
               cfg: SensorConfig = SensorConfig()) -> TrackerState:
    if not in_sleep_window(now, cfg):
        return state
    idle_min = (now - state.last_activity_time) / MS_PER_MIN
    if idle_min > cfg.inactivity_min:
        return replace(state, is_sleeping=True,
                       sleep_hours=state.sleep_hours + cfg.tick_min / 60)
    if state.is_sleeping and 0 <= _hour(now) < cfg.sleep_end_hour:
        return replace(state, is_sleeping=False,
                       sleep_hours=state.sleep_hours + cfg.compensation_hrs)
    return state


def _run_tick(state: TrackerState, now: int, cfg: SensorConfig) -> TrackerState:
    if (cfg.reset_at_window_start and now % MS_PER_HOUR < cfg.tick_min * MS_PER_MIN
            and _hour(now) == cfg.sleep_start_hour):
        state = replace(state, sleep_hours=0.0, is_sleeping=False)
    return sleep_tick(state, now, cfg)


def replay(samples: Iterable[AccelSample], cfg: SensorConfig = SensorConfig(),
           state: TrackerState | None = None) -> TrackerState:
    """Feed samples through the tracker, interleaving clock ticks.

    Ticks fall on whole multiples of the tick period. A sample stamped at
    or before a tick is processed before that tick. The returned state
    carries the next pending tick, so replaying a trace in pieces gives the
    same result as replaying it whole.
    """
    state = state or TrackerState()
    period = cfg.tick_min * MS_PER_MIN
    for s in samples:
        if state.last_sample_time is not None and s.t < state.last_sample_time:
            raise TraceOrderError(
                f"sample at t={s.t} precedes previous sample at t={state.last_sample_time}"
            )
        tick = state.next_tick
        if tick is None:
            tick = -(-s.t // period) * period
        while tick < s.t:
            state = _run_tick(state, tick, cfg)
            tick += period
        state = replace(step_update(state, s, cfg), next_tick=tick)
    if state.next_tick is not None and state.last_sample_time is not None:
        tick = state.next_tick
        while tick <= state.last_sample_time:
            state = _run_tick(state, tick, cfg)
            tick += period
        state = replace(state, next_tick=tick)
    return state


def summarize(state: TrackerState) -> DaySummary:
    return DaySummary(state.step_count, state.distance_m / 1000.0, state.sleep_hours)


def process_trace(trace: list[AccelSample], cfg: SensorConfig = SensorConfig()) -> DaySummary:
    if not trace:
        return DaySummary(0, 0.0, 0.0)
    span = trace[-1].t - trace[0].t
    if span > 36 * MS_PER_HOUR:
        raise ValueError(f"trace spans {span / MS_PER_HOUR:.1f} h, limit is 36 h")
    return summarize(replay(trace, cfg))


# -- synthetic traces -------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    kind: str  # "walk" or "idle"
    start_ms: int
    duration_min: float
    cadence_spm: float = 100.0
    sample_period_ms: int = 1000

    @property
    def end_ms(self) -> int:
        return self.start_ms + round(self.duration_min * MS_PER_MIN)


def schedule_from(items: list[tuple[str, float] | tuple[str, float, float]],
                  start_ms: int) -> list[Segment]:
    """Back-to-back segments from ``[("walk", minutes, spm), ("idle", minutes)]``."""
    out = []
    t = start_ms
    for item in items:
        kind, minutes = item[0], float(item[1])
        cadence = float(item[2]) if len(item) > 2 else 100.0
        seg = Segment(kind, t, minutes, cadence)
        out.append(seg)
        t = seg.end_ms
    return out


def synth_trace(schedule: list[Segment], rng: np.random.Generator,
                cfg: SensorConfig = SensorConfig()) -> list[AccelSample]:
    """Samples for a schedule of walk/idle segments.

    Walk segments emit one sample per step interval, alternating between a
    high and a low magnitude whose gap exceeds the step threshold. Idle
    segments emit sub-threshold jitter once per ``sample_period_ms``.
    """
    segs = sorted(schedule, key=lambda s: s.start_ms)
    for a, b in zip(segs, segs[1:]):
        if b.start_ms < a.end_ms:
            raise ValueError(f"segments overlap: {a} and {b}")
    out: list[AccelSample] = []
    quiet = cfg.step_threshold / 4
    for seg in segs:
        if seg.kind == "walk":
            interval = MS_PER_MIN / seg.cadence_spm
            if interval <= cfg.debounce_ms:
                raise ValueError(
                    f"cadence {seg.cadence_spm} spm is faster than the debounce allows"
                )
            n = round(seg.duration_min * seg.cadence_spm)
            for i in range(n):
                t = seg.start_ms + round(i * interval)
                if i % 2 == 0:
                    mag = cfg.step_threshold + quiet + 1.0 + rng.uniform(0, quiet)
                else:
                    mag = rng.uniform(0, quiet / 2)
                out.append(_vector(t, mag, rng))
        elif seg.kind == "idle":
            for t in range(seg.start_ms, seg.end_ms, seg.sample_period_ms):
                out.append(_vector(t, rng.uniform(0, quiet), rng))
        else:
            raise ValueError(f"unknown segment kind {seg.kind!r}")
    return out


def _vector(t: int, mag: float, rng: np.random.Generator) -> AccelSample:
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    x, y, z = (float(v) for v in d * mag)
    return AccelSample(int(t), x, y, z)


def at(day: str, hhmm: str) -> int:
    """Epoch milliseconds for an ISO date and ``HH:MM`` wall-clock time (UTC)."""
    stamp = dt.datetime.fromisoformat(f"{day}T{hhmm}").replace(tzinfo=dt.timezone.utc)
    return int(stamp.timestamp() * 1000)


def write_trace(trace: list[AccelSample], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t_ms", "x", "y", "z"))
        for s in trace:
            w.writerow((s.t, repr(s.x), repr(s.y), repr(s.z)))


def read_trace(path: str | Path) -> list[AccelSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_ms", "x", "y", "z"]:
            raise ValueError(f"unexpected trace header: {header}")
        return [AccelSample(int(t), float(x), float(y), float(z)) for t, x, y, z in reader]
