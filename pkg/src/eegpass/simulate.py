"""Deterministic stand-in for the headset: scripted traces and replay.

A schedule is a list of held targets; generation emits one sample per
period with seeded gaussian noise, so identical (schedule, seed) pairs
always produce identical traces.  Traces round-trip through a small CSV
format and can be replayed into any sink, paced or as fast as possible.
"""

from __future__ import annotations

import csv
import random
import time as _time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import InputError
from .model import SignalSample
from .segmentation import KeyEvent

DEFAULT_SAMPLE_PERIOD_MS = 1000
TRACE_HEADER = ("t_ms", "attention", "meditation")


@dataclass(frozen=True)
class ScheduleSegment:
    duration_ms: int
    attention: int
    meditation: int
    noise_sd: float = 0.0

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise InputError("segment duration must be positive")
        for name in ("attention", "meditation"):
            v = getattr(self, name)
            if not 0 <= v <= 100:
                raise InputError(f"segment {name} target out of range: {v}")
        if self.noise_sd < 0:
            raise InputError("noise_sd must be >= 0")


@dataclass(frozen=True)
class Schedule:
    segments: tuple[ScheduleSegment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise InputError("schedule must have at least one segment")

    @property
    def total_ms(self) -> int:
        return sum(s.duration_ms for s in self.segments)


def parse_schedule(text: str) -> Schedule:
    """Parse ``duration:att/med/sd`` segments, comma-separated.

    Example: ``"3000:90/10/0,2000:10/90/0"``.
    """
    segments = []
    for i, part in enumerate(text.split(",")):
        part = part.strip()
        try:
            duration, targets = part.split(":")
            att, med, sd = targets.split("/")
            segments.append(
                ScheduleSegment(int(duration), int(att), int(med), float(sd))
            )
        except (ValueError, InputError) as exc:
            raise InputError(f"bad schedule segment {i + 1} ({part!r}): {exc}") from None
    return Schedule(tuple(segments))


def format_schedule(schedule: Schedule) -> str:
    return ",".join(
        f"{s.duration_ms}:{s.attention}/{s.meditation}/{s.noise_sd:g}"
        for s in schedule.segments
    )


@dataclass(frozen=True)
class Trace:
    """Ordered samples plus provenance metadata."""

    samples: tuple[SignalSample, ...]
    label: str = ""
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        times = [s.t_ms for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InputError("trace timestamps must be strictly increasing")


def _noisy(rng: random.Random, target: int, sd: float) -> int:
    if sd == 0:
        return target
    return max(0, min(100, round(target + rng.gauss(0, sd))))


def generate(
    schedule: Schedule,
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS,
    seed: int = 0,
    label: str = "",
) -> Trace:
    """Emit samples for each segment at the given period.

    Each segment emits at its own start and every period thereafter while
    it lasts, so a sample always exists at a segment boundary.  Pure in
    (schedule, period, seed).
    """
    if sample_period_ms < 1:
        raise InputError("sample period must be >= 1 ms")
    rng = random.Random(seed)
    samples = []
    start = 0
    for seg in schedule.segments:
        t = start
        while t < start + seg.duration_ms:
            samples.append(
                SignalSample(
                    t,
                    _noisy(rng, seg.attention, seg.noise_sd),
                    _noisy(rng, seg.meditation, seg.noise_sd),
                )
            )
            t += sample_period_ms
        start += seg.duration_ms
    return Trace(tuple(samples), label=label, seed=seed)


def save_trace(trace: Trace, path: "str | Path") -> None:
    """Write ``t_ms,attention,meditation`` CSV with LF line endings."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for s in trace.samples:
            writer.writerow((s.t_ms, s.attention, s.meditation))


def load_trace(path: "str | Path", label: str = "") -> Trace:
    """Inverse of save_trace; parse errors carry the 1-based line number."""
    samples = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if tuple(row) != TRACE_HEADER:
                    raise InputError(
                        f"line 1: expected header {','.join(TRACE_HEADER)!r}"
                    )
                continue
            if not row:
                continue
            try:
                if len(row) != 3:
                    raise InputError(f"expected 3 fields, got {len(row)}")
                samples.append(SignalSample(int(row[0]), int(row[1]), int(row[2])))
            except (ValueError, InputError) as exc:
                raise InputError(f"line {lineno}: {exc}") from None
    try:
        return Trace(tuple(samples), label=label or str(path))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def replay(
    trace: Trace,
    sink: Callable[[SignalSample], None],
    realtime: bool = False,
    sleep: Callable[[float], None] = _time.sleep,
) -> None:
    """Deliver samples to a sink in timestamp order.

    With ``realtime`` the inter-sample gaps are honoured via ``sleep``;
    otherwise delivery is as fast as possible.
    """
    prev_t = None
    for s in trace.samples:
        if realtime and prev_t is not None:
            sleep((s.t_ms - prev_t) / 1000.0)
        prev_t = s.t_ms
        sink(s)


def synthesize_events(
    password: str,
    schedule: Schedule,
    cadence_ms: int = 500,
    sample_period_ms: int = DEFAULT_SAMPLE_PERIOD_MS,
    seed: int = 0,
) -> tuple[list[KeyEvent], list[SignalSample]]:
    """Build a full scripted login session: keystrokes plus trace.

    Characters are typed at a fixed cadence, each placed mid-gap so it
    falls strictly after the sample opening its time slot.  The schedule
    must cover the whole typing run.
    """
    if cadence_ms < 1:
        raise InputError("cadence must be >= 1 ms")
    if not password:
        raise InputError("password must be non-empty")
    typing_ms = cadence_ms * len(password)
    if schedule.total_ms < typing_ms:
        raise InputError(
            f"schedule covers {schedule.total_ms}ms but typing takes {typing_ms}ms"
        )
    trace = generate(schedule, sample_period_ms, seed=seed)
    keys = [
        KeyEvent(ch, i * cadence_ms + cadence_ms // 2)
        for i, ch in enumerate(password)
    ]
    return keys, list(trace.samples)
