"""Pseudo-Markov scenario generation.

An order-1 random walk over time-of-day transition matrices, steered by
per-action frequency bounds and a total-duration stopping rule. Year-long
traces are built day by day from a profile schedule, then anomalies are
injected with a ground-truth log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .catalog import DAY_S, GROUPS, Catalog
from .scenario import (
    MISSING_FREQUENCY,
    AnomalySpec,
    GroundTruthEntry,
    ScenarioEvent,
    inject_anomalies,
)

MATRIX_IDS = ("M1", "M2", "M3", "M4", "M5", "M6", "M7")
# (start hour, end hour, matrix); anything else falls in M5 (22:00-8:00)
DAY_PERIODS = ((8, 11, "M1"), (11, 14, "M2"), (14, 17, "M3"), (17, 22, "M4"))
FRIDAY, SUNDAY = 4, 6
MONTH_DAYS = 30
YEAR_DAYS = 365
N_MONTHS = 12

DECLINE_SCHEDULE = ((1, 3, 1), (4, 6, 3), (7, 9, 6), (10, 10, 9), (11, 11, 8), (12, 12, 9))


class GenerationError(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionMatrix:
    id: str
    actions: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        n = len(self.actions)
        if m.shape != (n, n):
            raise ValueError(f"{self.id}: expected {n}x{n} entries, got {m.shape}")
        if (m < 0).any():
            raise ValueError(f"{self.id}: negative transition probability")
        bad = np.flatnonzero(np.abs(m.sum(axis=1) - 1.0) > 1e-9)
        if bad.size:
            raise ValueError(f"{self.id}: row {self.actions[bad[0]]!r} is not stochastic")
        object.__setattr__(self, "entries", m)

    def row(self, action: str) -> np.ndarray:
        return self.entries[self.actions.index(action)]


@dataclass(frozen=True)
class GenConstraints:
    """Bounds for one generated sequence (one day of activity)."""

    f_min: Mapping[str, int]
    f_max: Mapping[str, int | None]
    durations: Mapping[str, tuple[int, int]]
    transition: tuple[int, int] = (60, 1800)
    sd: int = 16 * 3600

    def __post_init__(self):
        for a, lo in self.f_min.items():
            hi = self.f_max.get(a)
            if lo < 0 or (hi is not None and lo > hi):
                raise ValueError(f"{a}: f_min {lo} > f_max {hi}")
            if lo > 0 and a not in self.durations:
                raise ValueError(f"{a}: required action without duration bounds")
        for a, (lo, hi) in self.durations.items():
            if not 0 < lo <= hi:
                raise ValueError(f"{a}: bad duration bounds {(lo, hi)}")
        if not 0 <= self.transition[0] <= self.transition[1]:
            raise ValueError(f"bad transition bounds {self.transition}")
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    def allowed(self, action: str, count: int) -> bool:
        if action not in self.durations:
            return False
        hi = self.f_max.get(action)
        return hi is None or count < hi

    @property
    def aD_max(self) -> int:
        return max(hi for _, hi in self.durations.values())

    @property
    def tT_max(self) -> int:
        return self.transition[1]


def select_matrix(time_of_day_s: int, day_of_week: int) -> str:
    """Friday and Sunday matrices override the period matrices all day long."""
    if day_of_week == FRIDAY:
        return "M6"
    if day_of_week == SUNDAY:
        return "M7"
    hour = (time_of_day_s % DAY_S) / 3600
    for lo, hi, mid in DAY_PERIODS:
        if lo <= hour < hi:
            return mid
    return "M5"


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _draw(rng: np.random.Generator, weights: np.ndarray) -> int:
    cdf = np.cumsum(weights)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def generate_sequence(
    matrices: Mapping[str, TransitionMatrix],
    constraints: GenConstraints,
    seed=None,
    start_s: int = 0,
    day_of_week: int = 0,
    previous: str | None = None,
) -> list[ScenarioEvent]:
    """Controlled random walk for one sequence.

    Candidates that would exceed f_max are rejected and the row mass is
    renormalised over what remains. When the remaining time budget is only
    just enough to satisfy outstanding f_min counts, candidates are
    restricted to the actions still below f_min, so all minimums are met
    before sd and the final event is the first to reach sd.
    """
    rng = _as_rng(seed)
    actions = next(iter(matrices.values())).actions
    c = constraints
    lo_t, hi_t = c.transition
    need = sum(c.f_min.get(a, 0) * c.durations[a][0] for a in c.f_min if c.f_min[a])
    if need > 2 * c.sd:
        raise GenerationError("infeasible constraints: minimum frequencies exceed twice sd")

    counts = dict.fromkeys(actions, 0)
    unknown = set(c.f_min) - set(actions)
    if any(c.f_min[a] > 0 for a in unknown):
        raise GenerationError(f"required actions not in matrices: {sorted(unknown)}")
    usable = [a for a in actions if a in c.durations and c.f_max.get(a, 1) != 0]
    longest = max((c.durations[a][1] for a in usable), default=0) + hi_t
    cost = np.array([(c.durations[a][1] + hi_t) if a in c.durations else 0 for a in actions])
    fmin = np.array([c.f_min.get(a, 0) for a in actions])
    day0 = start_s // DAY_S

    events: list[ScenarioEvent] = []
    elapsed = 0
    prev = previous
    while True:
        deficit = np.maximum(fmin - np.array([counts[a] for a in actions]), 0)
        if events and elapsed >= c.sd and not deficit.any():
            break
        if elapsed > 2 * c.sd + longest:
            raise GenerationError("infeasible constraints: sequence exceeds twice sd")
        now = start_s + elapsed
        dow = (day_of_week + now // DAY_S - day0) % 7
        mat = matrices[select_matrix(now % DAY_S, dow)]
        if prev is None:
            row = np.full(len(actions), 1.0 / len(actions))
        else:
            row = mat.row(prev)
        mask = np.array([c.allowed(a, counts[a]) for a in actions])
        urgent = deficit.any() and c.sd - elapsed <= float(deficit @ cost) + longest
        if urgent:
            mask &= deficit > 0
        w = row * mask
        if w.sum() <= 0:
            if urgent:
                w = mask.astype(float)
            else:
                raise GenerationError(f"absorbing state after {prev!r}")
        j = _draw(rng, w)
        a = actions[j]
        gap = int(rng.integers(lo_t, hi_t + 1)) if events else 0
        dlo, dhi = c.durations[a]
        dur = int(rng.integers(dlo, dhi + 1))
        events.append(ScenarioEvent(start_s + elapsed + gap, a, dur))
        elapsed += gap + dur
        counts[a] += 1
        prev = a
    return events


# --- year-long generation ---------------------------------------------------

@dataclass(frozen=True)
class ActionBehaviour:
    f: tuple[int, int | None]  # None: no upper bound (filler activities)
    duration_s: tuple[int, int]
    daily_prob: float = 1.0
    weekdays: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ScenarioModel:
    """Matrices plus the per-profile behaviour used to build day constraints."""

    matrices: Mapping[str, TransitionMatrix]
    behaviour: Mapping[str, ActionBehaviour]
    abilities: tuple[tuple[int, ...], ...]  # profile x GROUPS modality
    failure_prob: Mapping[int, float]  # share of days an activity is not achieved, by modality
    # mean length (days) of an inability spell for category I activities;
    # category II failures are drawn day by day
    failure_spell_days: Mapping[int, float] = field(default_factory=dict)
    duration_stretch: float = 0.25
    transition_s: tuple[int, int] = (60, 1800)
    sd_s: int = 16 * 3600
    wake_s: tuple[int, int] = (7 * 3600, 8 * 3600)
    night_activity: str = "sleeping"
    anomaly_run_days: int = 3
    anomaly_episodes: tuple[int, ...] = field(default=(1,) * 14)
    duration_out_share: float = 0.25

    @property
    def actions(self) -> tuple[str, ...]:
        return self.matrices["M1"].actions

    def ability(self, profile: int, group: str) -> int:
        if group not in GROUPS:
            return 0
        return self.abilities[profile - 1][GROUPS.index(group)]

    def unable_today(self, a: str, m: int, scheduled_as: str, rng, unable: dict[str, bool]) -> bool:
        """Advance the able/unable chain of one activity by a day.

        The chain's stationary share of unable days is failure_prob[m]; the
        mean spell length is failure_spell_days[m] (category I only).
        """
        p = min(self.failure_prob.get(m, 0.0), 0.99)
        draw = rng.random()
        L = self.failure_spell_days.get(m, 1.0) if scheduled_as == "I" else 1.0
        if p <= 0:
            unable[a] = False
        elif L <= 1.0:
            unable[a] = draw < p
        else:
            L = max(L, p / (1 - p))
            recover = 1.0 / L
            onset = p * recover / (1 - p)
            unable[a] = (draw >= recover) if unable.get(a, False) else (draw < onset)
        return unable[a]

    def day_constraints(self, profile: int, day_of_week: int, rng, catalog: Catalog,
                        unable: dict[str, bool] | None = None) -> GenConstraints:
        unable = {} if unable is None else unable
        f_min, f_max, durations = {}, {}, {}
        for a in self.actions:
            b = self.behaviour.get(a)
            if b is None:
                continue
            act = catalog[a]
            m = self.ability(profile, act.group)
            scheduled_draw = rng.random()
            lo, hi = b.f
            if (b.weekdays is not None and day_of_week not in b.weekdays) or scheduled_draw >= b.daily_prob:
                lo, hi = 0, 0
            if self.unable_today(a, m, act.scheduled_as, rng, unable):
                lo = 0
                if act.category == "II" and act.normal_count_range:
                    cap = max(0, act.normal_count_range[0] - 1)
                    hi = cap if hi is None else min(hi, cap)
                else:
                    hi = 0
            dlo, dhi = b.duration_s
            dlo = min(dhi, int(round(dlo * (1 + self.duration_stretch * abs(m)))))
            f_min[a], f_max[a], durations[a] = lo, hi, (dlo, dhi)
        return GenConstraints(f_min, f_max, durations, self.transition_s, self.sd_s)

    def duration_bounds(self) -> dict[str, tuple[int, int]]:
        return {a: b.duration_s for a, b in self.behaviour.items()}


def default_model_path() -> Path:
    return Path(str(resources.files("adlmon.data").joinpath("scenario_model.json")))


def load_scenario_model(path: str | Path | None = None) -> ScenarioModel:
    path = Path(path) if path is not None else default_model_path()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    actions = tuple(doc["actions"])
    missing = [m for m in MATRIX_IDS if m not in doc["matrices"]]
    if missing:
        raise ValueError(f"{path}: missing matrices {missing}")
    matrices = {m: TransitionMatrix(m, actions, np.array(doc["matrices"][m])) for m in MATRIX_IDS}
    behaviour = {}
    for a, b in doc["behaviour"].items():
        wd = b.get("weekdays")
        behaviour[a] = ActionBehaviour(
            f=tuple(b["f"]),
            duration_s=tuple(b["duration_s"]),
            daily_prob=float(b.get("daily_prob", 1.0)),
            weekdays=tuple(wd) if wd is not None else None,
        )
    anomalies = doc.get("anomalies", {})
    return ScenarioModel(
        matrices=matrices,
        behaviour=behaviour,
        abilities=tuple(tuple(r) for r in doc["abilities"]),
        failure_prob={int(k): float(v) for k, v in doc["failure_prob"].items()},
        failure_spell_days={int(k): float(v) for k, v in doc.get("failure_spell_days", {}).items()},
        duration_stretch=float(doc.get("duration_stretch", 0.25)),
        transition_s=tuple(doc.get("transition_s", (60, 1800))),
        sd_s=int(doc.get("sd_s", 16 * 3600)),
        wake_s=tuple(doc.get("wake_s", (7 * 3600, 8 * 3600))),
        night_activity=doc.get("night_activity", "sleeping"),
        anomaly_run_days=int(anomalies.get("run_days", 3)),
        anomaly_episodes=tuple(anomalies.get("episodes_per_month", (1,) * 14)),
        duration_out_share=float(anomalies.get("duration_out_share", 0.25)),
    )


def validate_schedule(schedule: Sequence[tuple[int, int, int]], n_months: int = N_MONTHS) -> list[int]:
    """Return the profile for each month (index 0 = month 1)."""
    months: list[int | None] = [None] * n_months
    for first, last, profile in schedule:
        if not 1 <= first <= last <= n_months:
            raise ScheduleError(f"month range {first}-{last} outside 1..{n_months}")
        if not 1 <= profile <= 14:
            raise ScheduleError(f"profile {profile} outside 1..14")
        for m in range(first, last + 1):
            if months[m - 1] is not None:
                raise ScheduleError(f"schedule overlap at month {m}")
            months[m - 1] = profile
    gaps = [i + 1 for i, p in enumerate(months) if p is None]
    if gaps:
        raise ScheduleError(f"schedule gap at month {gaps[0]}")
    return months  # type: ignore[return-value]


def month_of_day(day: int, n_months: int = N_MONTHS) -> int:
    """0-based month; the 5-day year tail belongs to the last month."""
    return min(day // MONTH_DAYS, n_months - 1)


def derive_anomaly_specs(
    month_profiles: Sequence[int],
    catalog: Catalog,
    model: ScenarioModel,
    events: Sequence[ScenarioEvent],
    rng,
    horizon_days: int = YEAR_DAYS,
) -> list[AnomalySpec]:
    """Anomaly episodes for each month of a schedule.

    Episodes target category II activities of the group that the month's
    profile watches most closely (largest finite x divisor): where the
    profile table concentrates monitoring is where loss of ability shows.
    Each episode is either a run of days with the activity missing or a day
    with one abnormally long occurrence.
    """
    rng = _as_rng(rng)
    occurs = {(e.day, catalog.resolve(e.activity_id)) for e in events if catalog.knows(e.activity_id)}
    taken: set[tuple[int, str]] = set()
    specs: list[AnomalySpec] = []
    run = model.anomaly_run_days
    for mi, profile in enumerate(month_profiles):
        finite = {g: catalog.x_update.divisor(profile, g) for g in GROUPS
                  if math.isfinite(catalog.x_update.divisor(profile, g))}
        top = max(finite.values(), default=None)
        pool = [a.id for a in catalog if a.category == "II" and a.id in model.behaviour
                and finite.get(a.group) == top]
        if not pool:
            continue
        first = mi * MONTH_DAYS
        last = min(horizon_days, first + MONTH_DAYS) if mi < len(month_profiles) - 1 else horizon_days
        for _ in range(model.anomaly_episodes[profile - 1]):
            aid = pool[int(rng.integers(len(pool)))]
            if rng.random() < model.duration_out_share:
                days = [d for d in range(first + 1, last - 1)
                        if (d, aid) in occurs and (d, aid) not in taken]
                if days:
                    d = days[int(rng.integers(len(days)))]
                    taken.add((d, aid))
                    specs.append(AnomalySpec(d, aid, "DurationOut:high"))
                continue
            starts = [d for d in range(first + 1, last - run)
                      if all((d + k, aid) not in taken for k in range(-1, run + 1))]
            if not starts:
                continue
            d0 = starts[int(rng.integers(len(starts)))]
            for k in range(run):
                taken.add((d0 + k, aid))
                specs.append(AnomalySpec(d0 + k, aid, MISSING_FREQUENCY))
    specs.sort(key=lambda s: (s.day, s.activity_id))
    return specs


def _label_sub_activities(events: list[ScenarioEvent], catalog: Catalog, rng) -> list[ScenarioEvent]:
    out = []
    for e in events:
        act = catalog[e.activity_id] if catalog.knows(e.activity_id) else None
        if act is not None and act.sub_activities:
            sub = act.sub_activities[int(rng.integers(len(act.sub_activities)))]
            e = ScenarioEvent(e.start_s, sub, e.duration_s, e.anomaly_tag)
        out.append(e)
    return out


def _clip(events: list[ScenarioEvent], horizon_s: int) -> list[ScenarioEvent]:
    """Drop events starting at or after the horizon and cut the last one at it."""
    out = [e for e in events if e.start_s < horizon_s]
    if out and out[-1].end_s > horizon_s:
        e = out[-1]
        out[-1] = ScenarioEvent(e.start_s, e.activity_id, horizon_s - e.start_s, e.anomaly_tag)
    return out


def generate_year(
    model: ScenarioModel,
    catalog: Catalog,
    schedule: Sequence[tuple[int, int, int]],
    seed: int = 0,
    anomalies: str | Sequence[AnomalySpec] | None = "auto",
    horizon_days: int = YEAR_DAYS,
    first_weekday: int = 0,
) -> tuple[list[ScenarioEvent], list[GroundTruthEntry]]:
    """Concatenate daily sequences, then inject anomalies.

    `anomalies` is "auto" (derived from the schedule), an explicit spec list,
    or None for a clean trace.
    """
    month_profiles = validate_schedule(schedule)
    walk_rng, label_rng, anomaly_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    night = model.night_activity
    lo_t, hi_t = model.transition_s
    wake_lo, wake_hi = model.wake_s
    night_lo = model.behaviour[night].duration_s[0] if night in model.behaviour else 1200
    horizon_s = horizon_days * DAY_S

    events: list[ScenarioEvent] = []
    unable: dict[str, bool] = {}
    prev_action: str | None = night
    next_start = int(walk_rng.integers(wake_lo, wake_hi + 1))
    for day in range(horizon_days):
        profile = month_profiles[month_of_day(day)]
        dow = (first_weekday + day) % 7
        cons = model.day_constraints(profile, dow, walk_rng, catalog, unable)
        seq = generate_sequence(model.matrices, cons, walk_rng, next_start, dow, prev_action)
        events.extend(seq)
        sleep_start = seq[-1].end_s + int(walk_rng.integers(lo_t, hi_t + 1))
        wake = (day + 1) * DAY_S + int(walk_rng.integers(wake_lo, wake_hi + 1))
        sleep_end = max(wake, sleep_start + night_lo)
        events.append(ScenarioEvent(sleep_start, night, sleep_end - sleep_start))
        prev_action = night
        next_start = sleep_end + lo_t
    events = _label_sub_activities(_clip(events, horizon_s), catalog, label_rng)

    if anomalies == "auto":
        specs = derive_anomaly_specs(month_profiles, catalog, model, events, anomaly_rng, horizon_days)
    else:
        specs = list(anomalies or [])
    if not specs:
        return events, []
    bounds = model.duration_bounds()
    events, log = inject_anomalies(events, specs, bounds, catalog.resolve, horizon_days)
    return _clip(events, horizon_s), log
