"""Scenario events, the line-based scenario/ground-truth formats and anomaly injection."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

DAY_S = 86_400
MIN_GAP_S = 60
MIN_DURATION_S = 60

DURATION_OUT = "DurationOut"
MISSING_FREQUENCY = "MissingFrequency"
EVENT_TAGS = ("", DURATION_OUT)
ANOMALY_KINDS = ("DurationOut:high", "DurationOut:low", MISSING_FREQUENCY)

SCENARIO_HEADER = "# adlmon scenario v1 start_s,activity_id,duration_s,anomaly_tag"
GROUND_TRUTH_HEADER = "# adlmon ground-truth v1 t_s,activity_id,kind"


class ScenarioFormatError(ValueError):
    pass


class AnomalyError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioEvent:
    start_s: int
    activity_id: str
    duration_s: int
    anomaly_tag: str = ""

    @property
    def end_s(self) -> int:
        return self.start_s + self.duration_s

    @property
    def day(self) -> int:
        return self.start_s // DAY_S


@dataclass(frozen=True)
class GroundTruthEntry:
    t_s: int
    activity_id: str
    kind: str


@dataclass(frozen=True)
class AnomalySpec:
    day: int
    activity_id: str
    kind: str  # one of ANOMALY_KINDS

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise AnomalyError(f"unknown anomaly kind {self.kind!r}")
        if self.day < 0:
            raise AnomalyError(f"negative anomaly day {self.day}")


def check_scenario(events: Sequence[ScenarioEvent]) -> None:
    """Raise if events are unsorted or overlap."""
    prev_end = None
    for i, ev in enumerate(events):
        if ev.start_s < 0 or ev.duration_s <= 0:
            raise ScenarioFormatError(f"event {i}: bad start/duration {ev}")
        if prev_end is not None and ev.start_s < prev_end:
            raise ScenarioFormatError(f"event {i} starts before the previous one ends")
        prev_end = ev.end_s


# --- file formats ----------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def format_event(ev: ScenarioEvent) -> str:
    return f"{ev.start_s},{ev.activity_id},{ev.duration_s},{ev.anomaly_tag}"


def parse_event(line: str, lineno: int = 1) -> ScenarioEvent:
    cols = line.rstrip("\n").split(",")
    if len(cols) != 4:
        raise ScenarioFormatError(f"line {lineno}: expected 4 columns, got {len(cols)}")
    start, aid, dur, tag = cols
    try:
        start_s, duration_s = int(start), int(dur)
    except ValueError:
        raise ScenarioFormatError(f"line {lineno}: non-numeric time in {line.strip()!r}") from None
    if start_s < 0 or duration_s <= 0:
        raise ScenarioFormatError(f"line {lineno}: negative start or non-positive duration")
    if not aid:
        raise ScenarioFormatError(f"line {lineno}: empty activity id")
    if tag not in EVENT_TAGS:
        raise ScenarioFormatError(f"line {lineno}: unknown anomaly tag {tag!r}")
    return ScenarioEvent(start_s, aid, duration_s, tag)


def write_scenario(events: Iterable[ScenarioEvent], path: str | Path) -> None:
    lines = [SCENARIO_HEADER] + [format_event(e) for e in events]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_scenario(path: str | Path) -> list[ScenarioEvent]:
    events = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.startswith("#") or not line.strip():
                continue
            events.append(parse_event(line, lineno))
    return events


def write_ground_truth(entries: Iterable[GroundTruthEntry], path: str | Path) -> None:
    lines = [GROUND_TRUTH_HEADER] + [f"{g.t_s},{g.activity_id},{g.kind}" for g in entries]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_ground_truth(path: str | Path) -> list[GroundTruthEntry]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.startswith("#") or not line.strip():
                continue
            cols = line.rstrip("\n").split(",")
            if len(cols) != 3:
                raise ScenarioFormatError(f"line {lineno}: expected 3 columns, got {len(cols)}")
            try:
                t = int(cols[0])
            except ValueError:
                raise ScenarioFormatError(f"line {lineno}: non-numeric time") from None
            if cols[2] not in ANOMALY_KINDS:
                raise ScenarioFormatError(f"line {lineno}: unknown anomaly kind {cols[2]!r}")
            out.append(GroundTruthEntry(t, cols[1], cols[2]))
    return out


# --- anomaly injection -----------------------------------------------------

def _resolve_push(events: list[ScenarioEvent], k: int, keep_min: Mapping[str, int]) -> None:
    """Restore non-overlap after events[k] grew.

    Later events are pushed forward; the first one long enough to absorb
    the shift is shortened instead, which stops the cascade.
    """
    for i in range(k + 1, len(events)):
        required = events[i - 1].end_s + MIN_GAP_S
        ev = events[i]
        if ev.start_s >= required:
            return
        shift = required - ev.start_s
        floor = keep_min.get(ev.activity_id, MIN_DURATION_S)
        if ev.duration_s - shift >= floor:
            events[i] = replace(ev, start_s=required, duration_s=ev.duration_s - shift)
            return
        events[i] = replace(ev, start_s=required)


def missing_day_timestamp(day: int) -> int:
    """Last second of the day; the earliest instant the absence is complete."""
    return (day + 1) * DAY_S - 1


def inject_anomalies(
    events: Sequence[ScenarioEvent],
    specs: Sequence[AnomalySpec],
    duration_bounds: Mapping[str, tuple[int, int]],
    resolve: Callable[[str], str] = lambda a: a,
    horizon_days: int | None = None,
) -> tuple[list[ScenarioEvent], list[GroundTruthEntry]]:
    """Apply anomaly specs to a sorted event list.

    `duration_bounds` gives the generator's [aD_min, aD_max] per activity;
    `resolve` maps event ids (possibly sub-activities) to activity ids.
    """
    out = list(events)
    log: list[GroundTruthEntry] = []
    for spec in specs:
        if spec.activity_id not in duration_bounds:
            raise AnomalyError(f"anomaly references unknown activity {spec.activity_id!r}")
        if horizon_days is not None and spec.day >= horizon_days:
            raise AnomalyError(f"anomaly day {spec.day} outside horizon")
        lo, hi = duration_bounds[spec.activity_id]
        on_day = [
            i for i, e in enumerate(out)
            if e.day == spec.day and resolve(e.activity_id) == spec.activity_id
        ]
        if spec.kind == MISSING_FREQUENCY:
            for i in reversed(on_day):
                del out[i]
            # a missing day is a fact only once the day is over
            log.append(GroundTruthEntry(missing_day_timestamp(spec.day), spec.activity_id, spec.kind))
            continue
        if not on_day:
            raise AnomalyError(
                f"no {spec.activity_id} occurrence on day {spec.day} to mutate"
            )
        k = on_day[0]
        ev = out[k]
        if spec.kind == "DurationOut:high":
            new = 3 * hi
        else:
            new = max(MIN_DURATION_S, lo // 3)
        out[k] = replace(ev, duration_s=new, anomaly_tag=DURATION_OUT)
        log.append(GroundTruthEntry(ev.start_s, spec.activity_id, spec.kind))
        if new > ev.duration_s:
            floors = {e.activity_id: duration_bounds.get(resolve(e.activity_id), (MIN_DURATION_S,))[0]
                      for e in out[k + 1:k + 50]}
            _resolve_push(out, k, floors)
    log.sort(key=lambda g: (g.t_s, g.activity_id))
    return out, log
