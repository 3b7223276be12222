"""Event-driven adaptive monitor and the continuous comparator.

The simulation is exact at 1 s resolution but only visits instants where
something happens: scenario events and timers (window closes, missing-activity
watchdogs, monthly evaluations). At equal times, events are processed before
window closes and watchdogs, which come before the monthly evaluation, so a
24 h window is inclusive at both ends.

A Category I sensor is active from its next monitoring time until the end
of the occurrence it waits for; that interval is charged lazily when the
occurrence or an evaluation settles it. Category II sensors are event
triggered and only pay for the occurrences they count.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import (
    DAY_S,
    INF,
    N_SMAF_ITEMS,
    PERIOD_DAYS,
    Catalog,
    classify_profile,
    disability_score,
    smaf_score,
)
from .resources import N_MONTHS, ResourceLedger, SensorClassParams, load_sensor_params, month_of
from .scenario import ScenarioEvent, _atomic_write

PERIOD_S = PERIOD_DAYS * DAY_S
HISTORY_LEN = 10

ABNORMAL = "Abnormal"
FALSE_ALARM_CANDIDATE = "FalseAlarmCandidate"
DETECTION_KINDS = (ABNORMAL, FALSE_ALARM_CANDIDATE)

DETECTIONS_HEADER = "# adlmon detections v1 t_s,activity_id,kind,confirmed"
ASSESSMENTS_HEADER = "# adlmon assessments v1 month,profile,disability,scores..."

# timer priorities at equal time: scenario events sort at 1
_CLOSE, _WATCHDOG, _EVAL = 2, 2, 3


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class Detection:
    t_s: int
    activity_id: str
    kind: str
    confirmed: bool = False


@dataclass(frozen=True)
class ProfileAssessment:
    month: int  # 1-based
    scores: tuple[int, ...]  # catalog order
    disability: int
    profile: int


@dataclass(frozen=True)
class HistoryFlag:
    """A known condition that makes an unusual count abnormal regardless of history."""

    condition: str
    activity_id: str
    direction: str  # "high" or "low"


@dataclass
class ActivityState:
    x: float  # days, INF when unmonitored
    next_s: float  # armed from this instant, INF when asleep
    sub_score: int = 0
    window: tuple[int, int] | None = None  # (open_s, close_s)
    window_count: int = 0
    window_anchor: int = 0  # arming time of the regular window, for the next x period
    extension: bool = False
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))
    consecutive_abnormal: int = 0
    paid_to: int = 0  # active cost is settled up to here
    epoch: int = 0  # invalidates stale timers
    last_score: int = 0


@dataclass
class MonitorState:
    activities: dict[str, ActivityState]
    profile: int | None = None


@dataclass
class EngineConfig:
    horizon_s: int = 365 * DAY_S
    history_flags: tuple[HistoryFlag, ...] = ()
    check_durations: bool = True
    # re-anchor finite-x sensors at each evaluation instead of now + x
    rearm_at_evaluation: bool = True
    initial_score: int = 0


@dataclass
class RunResult:
    detections: list[Detection]
    assessments: list[ProfileAssessment]
    ledger: ResourceLedger
    mode: str = "adaptive"

    @property
    def monitored_counts(self) -> np.ndarray:
        """Monitored activities per month (summed over activities)."""
        return self.ledger.count.sum(axis=1)


def _x_finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _check_scenario(events: Sequence[ScenarioEvent], catalog: Catalog, horizon_s: int) -> None:
    prev = -1
    for i, e in enumerate(events):
        if e.start_s < prev:
            raise EngineError(f"scenario is not sorted at event {i}")
        prev = e.start_s
        if not catalog.knows(e.activity_id):
            raise EngineError(f"unknown activity id {e.activity_id!r} at event {i}")
    if events and events[-1].start_s >= horizon_s:
        raise EngineError("horizon ends before the last event")


def load_history_flags(path: str | Path) -> tuple[HistoryFlag, ...]:
    """condition,activity_id,direction lines; '#' comments allowed."""
    flags = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split(",")]
        if len(cols) != 3 or cols[2] not in ("high", "low"):
            raise EngineError(f"line {lineno}: expected condition,activity_id,high|low")
        flags.append(HistoryFlag(*cols))
    return tuple(flags)


class AdaptiveMonitor:
    """One run of the adaptive monitor over a scenario."""

    def __init__(self, catalog: Catalog, params: Mapping[str, SensorClassParams] | None = None,
                 config: EngineConfig | None = None):
        self.catalog = catalog
        self.params = params if params is not None else load_sensor_params()
        self.cfg = config or EngineConfig()
        self.flags = {(f.activity_id, f.direction) for f in self.cfg.history_flags}
        self.order = catalog.relations.topological_order(catalog.ids)
        self.state = MonitorState({
            a.id: ActivityState(
                x=INF if a.computed else float(a.x_initial),
                next_s=INF if a.computed else 0,
                last_score=self.cfg.initial_score,
            )
            for a in catalog
        })
        self.ledger = ResourceLedger.for_catalog(catalog)
        self.detections: list[Detection] = []
        self.assessments: list[ProfileAssessment] = []
        self._timers: list[tuple] = []
        self._seq = 0
        self.now = 0
        for a in catalog:
            if a.scheduled_as == "II":
                self._arm_watchdog(a.id)

    # --- timers --------------------------------------------------------------

    def _push(self, t: int, prio: int, kind: str, aid: str | None = None, epoch: int = 0) -> None:
        self._seq += 1
        heapq.heappush(self._timers, (t, prio, self._seq, kind, aid, epoch))

    def _fire_until(self, t: int, prio: int) -> None:
        """Fire timers sorting before (t, prio)."""
        while self._timers and self._timers[0][:2] < (t, prio):
            tt, _, _, kind, aid, epoch = heapq.heappop(self._timers)
            self.now = tt
            if kind == "eval":
                self._monthly(tt)
                continue
            st = self.state.activities[aid]
            if epoch != st.epoch:
                continue
            if kind == "close":
                self._close_window(aid, tt)
            elif kind == "watchdog":
                self._watchdog(aid, tt)

    def _arm_watchdog(self, aid: str) -> None:
        st = self.state.activities[aid]
        st.epoch += 1
        if math.isfinite(st.next_s):
            self._push(int(st.next_s) + DAY_S, _WATCHDOG, "watchdog", aid, st.epoch)

    # --- bookkeeping -----------------------------------------------------------

    def _charge(self, aid: str, t0: float, t1: int) -> None:
        st = self.state.activities[aid]
        if not math.isfinite(t0):
            return
        start = max(int(t0), st.paid_to)
        end = min(t1, self.cfg.horizon_s)
        if end > start:
            self.ledger.charge_active(aid, start, end, self.params, self.cfg.horizon_s)
            st.paid_to = end

    def _count(self, aid: str, t: int) -> None:
        self.ledger.accumulate(aid, month_of(t), count=1)

    def _detect(self, t: int, aid: str, kind: str = ABNORMAL, confirmed: bool = False) -> None:
        self.detections.append(Detection(min(t, self.cfg.horizon_s), aid, kind, confirmed))

    def _duration_ok(self, aid: str, duration_s: int) -> bool:
        rng = self.catalog[aid].duration_range_s
        if not self.cfg.check_durations or rng is None:
            return True
        return rng[0] <= duration_s <= rng[1]

    def _armed(self, aid: str, t: int) -> bool:
        st = self.state.activities[aid]
        return st.window is not None or st.next_s <= t

    # --- category handlers -----------------------------------------------------

    def handle_event(self, ev: ScenarioEvent) -> None:
        aid = self.catalog.resolve(ev.activity_id)
        act = self.catalog[aid]
        if act.computed:
            # passively observed through the other sensors of its group
            if any(self._armed(b.id, ev.start_s) for b in self.catalog
                   if b.group == act.group and b.has_sensor and b.id != aid):
                self._count(aid, ev.start_s)
            return
        if act.scheduled_as == "II":
            self._handle_category_II(aid, ev)
        else:
            self._handle_category_I(aid, ev)

    def _handle_category_I(self, aid: str, ev: ScenarioEvent) -> None:
        st = self.state.activities[aid]
        t = ev.start_s
        if t < st.next_s:
            return  # sensor asleep
        self._count(aid, t)
        self._charge(aid, st.next_s, ev.end_s)
        if not self._duration_ok(aid, ev.duration_s):
            self._detect(ev.end_s, aid)
            st.next_s = ev.end_s  # stay armed for a normal occurrence
            return
        st.sub_score += 1
        st.next_s = t + st.x * DAY_S if _x_finite(st.x) else INF

    def _handle_category_II(self, aid: str, ev: ScenarioEvent) -> None:
        st = self.state.activities[aid]
        t = ev.start_s
        if st.window is None:
            if t < st.next_s:
                return
            st.window = (t, t + DAY_S)
            st.window_count = 0
            st.window_anchor = t
            st.extension = False
            st.epoch += 1  # drops the pending watchdog
            self._push(t + DAY_S, _CLOSE, "close", aid, st.epoch)
        st.window_count += 1
        self._count(aid, t)
        # event-triggered sensing: only the occurrence itself is sampled
        self._charge(aid, t, ev.end_s)
        if not self._duration_ok(aid, ev.duration_s):
            self._detect(ev.end_s, aid)

    def _count_ok(self, aid: str, count: int, st: ActivityState) -> tuple[int, bool]:
        """(C, suppressed) for a closed window."""
        lo, hi = self.catalog[aid].normal_count_range
        if lo <= count <= hi:
            return 1, False
        if count > hi and st.history and count > float(np.mean(st.history)) \
                and (aid, "high") not in self.flags:
            return 1, True
        return 0, False

    def _close_window(self, aid: str, t: int) -> None:
        st = self.state.activities[aid]
        c, suppressed = self._count_ok(aid, st.window_count, st)
        st.history.append(st.window_count)
        st.window = None
        self._after_window(aid, t, c, suppressed)

    def _watchdog(self, aid: str, t: int) -> None:
        """Armed for 24 h without an occurrence: a window with count 0."""
        st = self.state.activities[aid]
        if st.window is not None or not math.isfinite(st.next_s):
            return
        st.window_anchor = int(st.next_s)
        st.extension = False
        c, suppressed = self._count_ok(aid, 0, st)
        st.history.append(0)
        self._after_window(aid, t, c, suppressed)

    def _after_window(self, aid: str, t: int, c: int, suppressed: bool) -> None:
        st = self.state.activities[aid]
        was_extension = st.extension
        if suppressed:
            self._detect(t, aid, FALSE_ALARM_CANDIDATE)
        if c:
            st.consecutive_abnormal = 0
            if not was_extension:
                st.sub_score += 1
        else:
            st.consecutive_abnormal += 1
            self._detect(t, aid, ABNORMAL, confirmed=st.consecutive_abnormal >= 2)
            if not was_extension:
                # one extra window straight away to confirm the situation
                st.window = (t, t + DAY_S)
                st.window_count = 0
                st.extension = True
                st.next_s = t
                st.epoch += 1
                self._push(t + DAY_S, _CLOSE, "close", aid, st.epoch)
                return
        st.extension = False
        if _x_finite(st.x):
            st.next_s = max(t, st.window_anchor + st.x * DAY_S)
        else:
            st.next_s = INF
        self._arm_watchdog(aid)

    # --- monthly evaluation ----------------------------------------------------

    def _settle(self, t: int) -> None:
        for a in self.catalog:
            st = self.state.activities[a.id]
            if a.scheduled_as == "I" and st.next_s <= t:
                self._charge(a.id, st.next_s, t)

    def scores(self) -> dict[str, int]:
        out: dict[str, int] = {}
        preds = self.catalog.relations.predecessors
        for aid in self.order:
            act, st = self.catalog[aid], self.state.activities[aid]
            if act.computed:
                p = [out[b] for b in preds(aid)]
                s = max(p) if p else st.last_score
            elif _x_finite(st.x):
                cap = PERIOD_DAYS / st.x
                s = int(smaf_score(min(st.sub_score, cap), st.x, PERIOD_DAYS))
            else:
                s = 0 if any(out[b] == 0 for b in preds(aid)) else st.last_score
            out[aid] = s
        return out

    def _monthly(self, t: int) -> None:
        self._settle(t)
        scores = self.scores()
        vector = tuple(scores[a] for a in self.catalog.ids)
        disability = disability_score(vector, len(vector)) if len(vector) == N_SMAF_ITEMS \
            else sum(vector)
        profile = classify_profile(disability, self.catalog.profiles)
        self.assessments.append(ProfileAssessment(t // PERIOD_S, vector, disability, profile))
        for aid, s in scores.items():
            st = self.state.activities[aid]
            st.last_score = s
            st.sub_score = 0
        self.state.profile = profile
        self.global_update(profile, t)
        self.relational_update(scores, t)

    def global_update(self, profile: int, t: int) -> None:
        """x = x_initial / divisor(profile, group); never compounds."""
        for a in self.catalog:
            if a.computed:
                continue
            st = self.state.activities[a.id]
            old_next = st.next_s
            st.x = self.catalog.x_update.x_for(a, profile)
            if st.window is not None:
                continue  # the open window finishes under its own rules
            if not _x_finite(st.x):
                st.next_s = INF
            elif self.cfg.rearm_at_evaluation:
                st.next_s = t
            else:
                st.next_s = t + st.x * DAY_S
            if a.scheduled_as == "II" and st.next_s != old_next:
                self._arm_watchdog(a.id)

    def relational_update(self, scores: Mapping[str, int], t: int) -> None:
        """Autonomy on a_i suppresses its direct successors until the next evaluation."""
        for ai, aj in self.catalog.relations.arcs:
            if scores[ai] != 0 or self.catalog[aj].computed:
                continue
            st = self.state.activities[aj]
            st.x = INF
            if st.window is None:
                st.next_s = INF
                st.epoch += 1

    # --- driver ----------------------------------------------------------------

    def run(self, events: Sequence[ScenarioEvent]) -> RunResult:
        H = self.cfg.horizon_s
        _check_scenario(events, self.catalog, H)
        for k in range(1, N_MONTHS + 1):
            if k * PERIOD_S <= H:
                self._push(k * PERIOD_S, _EVAL, "eval")
        for ev in events:
            self._fire_until(ev.start_s, 1)
            self.now = ev.start_s
            self.handle_event(ev)
        self._fire_until(H, _EVAL + 1)
        # timers past the horizon never fire; settle what is still armed
        self._settle(H)
        self.ledger.add_sleep(self.params, H)
        self.detections.sort(key=lambda d: (d.t_s, d.activity_id, d.kind))
        return RunResult(self.detections, self.assessments, self.ledger, "adaptive")


def run(events: Sequence[ScenarioEvent], catalog: Catalog, horizon_s: int = 365 * DAY_S,
        params: Mapping[str, SensorClassParams] | None = None,
        config: EngineConfig | None = None) -> RunResult:
    cfg = config or EngineConfig()
    if cfg.horizon_s != horizon_s:
        cfg = EngineConfig(**{**cfg.__dict__, "horizon_s": horizon_s})
    return AdaptiveMonitor(catalog, params, cfg).run(events)


def run_continuous(events: Sequence[ScenarioEvent], catalog: Catalog, horizon_s: int = 365 * DAY_S,
                   params: Mapping[str, SensorClassParams] | None = None,
                   check_durations: bool = True) -> RunResult:
    """Traditional comparator: every sensor always on, no profile or history gating.

    Category II activities raise an alarm for each calendar day whose count
    falls outside the normal range; any occurrence with an out-of-range
    duration raises one too.
    """
    _check_scenario(events, catalog, horizon_s)
    params = params if params is not None else load_sensor_params()
    ledger = ResourceLedger.for_catalog(catalog)
    for a in catalog.ids:
        ledger.charge_active(a, 0, horizon_s, params, horizon_s)
    days = -(-horizon_s // DAY_S)
    cat2 = [a for a in catalog if a.scheduled_as == "II"]
    per_day = {a.id: np.zeros(days, dtype=np.int64) for a in cat2}
    detections: list[Detection] = []
    for ev in events:
        aid = catalog.resolve(ev.activity_id)
        ledger.accumulate(aid, month_of(ev.start_s), count=1)
        if aid in per_day:
            per_day[aid][ev.start_s // DAY_S] += 1
        rng = catalog[aid].duration_range_s
        if check_durations and rng is not None and not rng[0] <= ev.duration_s <= rng[1]:
            detections.append(Detection(min(ev.end_s, horizon_s), aid, ABNORMAL))
    for a in cat2:
        lo, hi = a.normal_count_range
        for d in np.flatnonzero((per_day[a.id] < lo) | (per_day[a.id] > hi)):
            detections.append(Detection(min(int(d + 1) * DAY_S, horizon_s), a.id, ABNORMAL))
    detections.sort(key=lambda d: (d.t_s, d.activity_id, d.kind))
    return RunResult(detections, [], ledger, "continuous")


# --- file formats -------------------------------------------------------------

def write_detections(detections: Iterable[Detection], path: str | Path) -> None:
    lines = [DETECTIONS_HEADER] + [
        f"{d.t_s},{d.activity_id},{d.kind},{int(d.confirmed)}" for d in detections
    ]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_detections(path: str | Path) -> list[Detection]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split(",")
        if len(cols) != 4 or cols[2] not in DETECTION_KINDS:
            raise EngineError(f"line {lineno}: bad detection record")
        out.append(Detection(int(cols[0]), cols[1], cols[2], cols[3] == "1"))
    return out


def write_assessments(assessments: Iterable[ProfileAssessment], catalog: Catalog,
                      path: str | Path) -> None:
    lines = [ASSESSMENTS_HEADER, "# month,profile,disability," + ",".join(catalog.ids)]
    for a in assessments:
        lines.append(",".join(str(v) for v in (a.month, a.profile, a.disability, *a.scores)))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_assessments(path: str | Path) -> list[ProfileAssessment]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        v = [int(c) for c in line.split(",")]
        out.append(ProfileAssessment(v[0], tuple(v[3:]), v[2], v[1]))
    return out


def assessments_csv(assessments: Sequence[ProfileAssessment], catalog: Catalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["month", "profile", "disability", *catalog.ids])
    for a in assessments:
        w.writerow([a.month, a.profile, a.disability, *a.scores])
    return buf.getvalue()
