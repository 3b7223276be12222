"""Activity universe, dependency scoring and the iso-SMAF profile tables.

Everything here is immutable once loaded and can be shared between runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import IntEnum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

INF = math.inf
# x sentinel for activities that are never monitored on their own.
COMPUTED = "computed"

GROUPS = ("ADL", "Mobility", "Communication", "MentalFunctions", "IADL")
ALL_GROUPS = GROUPS + ("Other",)
CATEGORIES = ("I", "II", "III")
SENSOR_CLASSES = ("low", "medium", "high")

DAY_S = 86_400
PERIOD_DAYS = 30
N_SMAF_ITEMS = 29


class CatalogError(ValueError):
    pass


class Modality(IntEnum):
    AUTONOMOUS = 0
    SUPERVISION = -1
    NEED_HELP = -2
    DEPENDENT = -3


@dataclass(frozen=True)
class ActivityDef:
    id: str
    group: str
    category: str
    sensor_class: str
    x_initial: float | str
    monitor_duration_s: int = 0
    normal_count_range: tuple[int, int] | None = None
    duration_range_s: tuple[int, int] | None = None
    sub_activities: tuple[str, ...] = ()
    event_log_only: bool = False

    @property
    def computed(self) -> bool:
        return self.x_initial == COMPUTED

    @property
    def has_sensor(self) -> bool:
        return not self.computed

    @property
    def scheduled_as(self) -> str:
        """Monitoring mode used by the engine.

        Questionnaire activities (category III with a finite x) behave like
        category I: armed until the next answer.
        """
        if self.category == "III" and not self.computed:
            return "I"
        return self.category


@dataclass(frozen=True)
class ProfileRow:
    profile: int
    mean_disability: float
    category: int


@dataclass(frozen=True)
class IsoSmafProfileTable:
    rows: tuple[ProfileRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def mean(self, profile: int) -> float:
        return self.rows[profile - 1].mean_disability


@dataclass(frozen=True)
class XUpdateMatrix:
    """Per (profile, group) divisor applied to the initial x; INF disables monitoring."""

    cells: tuple[tuple[float, ...], ...]
    groups: tuple[str, ...] = GROUPS

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0]) if self.cells else 0

    def divisor(self, profile: int, group: str) -> float:
        if group not in self.groups:
            # groups outside the table keep their initial frequency
            return 1
        return self.cells[profile - 1][self.groups.index(group)]

    def x_for(self, activity: ActivityDef, profile: int) -> float | str:
        if activity.computed:
            return COMPUTED
        d = self.divisor(profile, activity.group)
        if d == INF:
            return INF
        return activity.x_initial / d


@dataclass(frozen=True)
class RelationGraph:
    arcs: tuple[tuple[str, str], ...]

    def successors(self, a: str) -> list[str]:
        return [j for i, j in self.arcs if i == a]

    def predecessors(self, a: str) -> list[str]:
        return [i for i, j in self.arcs if j == a]

    def topological_order(self, nodes: Sequence[str]) -> list[str]:
        """Kahn ordering that keeps `nodes` order among independent entries."""
        indeg = {n: 0 for n in nodes}
        for _, j in self.arcs:
            indeg[j] += 1
        order: list[str] = []
        ready = [n for n in nodes if indeg[n] == 0]
        while ready:
            n = ready.pop(0)
            order.append(n)
            for j in self.successors(n):
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
            ready.sort(key=nodes.index)
        if len(order) != len(nodes):
            raise CatalogError("cyclic relation graph")
        return order


@dataclass(frozen=True)
class Catalog:
    activities: tuple[ActivityDef, ...]
    profiles: IsoSmafProfileTable
    x_update: XUpdateMatrix
    relations: RelationGraph
    _by_id: dict[str, ActivityDef] = field(default_factory=dict, repr=False, compare=False)
    _parent: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for a in self.activities:
            self._by_id[a.id] = a
            self._parent[a.id] = a.id
            for s in a.sub_activities:
                self._parent[s] = a.id

    def __len__(self) -> int:
        return len(self.activities)

    def __iter__(self):
        return iter(self.activities)

    def __getitem__(self, activity_id: str) -> ActivityDef:
        return self._by_id[activity_id]

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.activities]

    def resolve(self, action_id: str) -> str:
        """Map an action or sub-activity name to its catalog activity id."""
        try:
            return self._parent[action_id]
        except KeyError:
            raise CatalogError(f"unknown activity id {action_id!r}") from None

    def knows(self, action_id: str) -> bool:
        return action_id in self._parent

    @property
    def n_sub_activities(self) -> int:
        return sum(len(a.sub_activities) for a in self.activities)


def default_catalog_path() -> Path:
    return Path(str(resources.files("adlmon.data").joinpath("catalog.json")))


def _parse_x(value) -> float | str:
    if value == COMPUTED:
        return COMPUTED
    x = float(value)
    if not x > 0:
        raise CatalogError(f"x_initial must be positive, got {value!r}")
    return x


def _parse_divisor(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return INF
        raise CatalogError(f"bad divisor {value!r}")
    d = int(value)
    if d not in (1, 2, 3):
        raise CatalogError(f"divisor must be 1, 2, 3 or inf, got {value!r}")
    return d


def _parse_activity(raw: dict) -> ActivityDef:
    try:
        aid = raw["id"]
        group = raw["group"]
        category = raw["category"]
        sensor_class = raw["sensor_class"]
        x = _parse_x(raw["x_initial"])
    except KeyError as e:
        raise CatalogError(f"activity is missing field {e.args[0]!r}") from None
    if group not in ALL_GROUPS:
        raise CatalogError(f"{aid}: unknown group {group!r}")
    if category not in CATEGORIES:
        raise CatalogError(f"{aid}: unknown category {category!r}")
    if sensor_class not in SENSOR_CLASSES:
        raise CatalogError(f"{aid}: unknown sensor class {sensor_class!r}")
    ncr = raw.get("normal_count_range")
    if ncr is not None:
        ncr = (int(ncr[0]), int(ncr[1]))
        if not 0 <= ncr[0] <= ncr[1]:
            raise CatalogError(f"{aid}: bad normal_count_range {ncr}")
    if category == "II" and ncr is None:
        raise CatalogError(f"{aid}: category II activity needs normal_count_range")
    dr = raw.get("duration_range_s")
    if dr is not None:
        dr = (int(dr[0]), int(dr[1]))
        if not 0 < dr[0] <= dr[1]:
            raise CatalogError(f"{aid}: bad duration_range_s {dr}")
    default_window = DAY_S if category == "II" else 0
    return ActivityDef(
        id=aid,
        group=group,
        category=category,
        sensor_class=sensor_class,
        x_initial=x,
        monitor_duration_s=int(raw.get("monitor_duration_s", default_window)),
        normal_count_range=ncr,
        duration_range_s=dr,
        sub_activities=tuple(raw.get("sub_activities", ())),
        event_log_only=bool(raw.get("event_log_only", False)),
    )


def parse_catalog(doc: dict) -> Catalog:
    raw_acts = doc.get("activities") or []
    if not raw_acts:
        raise CatalogError("empty catalog")
    activities = tuple(_parse_activity(r) for r in raw_acts)
    names: set[str] = set()
    for a in activities:
        for n in (a.id, *a.sub_activities):
            if n in names:
                raise CatalogError(f"duplicate activity id {n!r}")
            names.add(n)

    rows = tuple(
        ProfileRow(int(r["profile"]), float(r["mean_disability"]), int(r["category"]))
        for r in doc.get("profiles", [])
    )
    if [r.profile for r in rows] != list(range(1, len(rows) + 1)) or not rows:
        raise CatalogError("profiles must be numbered 1..n in order")

    groups = tuple(doc.get("groups", GROUPS))
    cells = doc.get("x_update_matrix") or []
    if len(cells) != len(rows) or any(len(r) != len(groups) for r in cells):
        raise CatalogError(
            f"x-update matrix shape mismatch: expected {len(rows)}x{len(groups)}"
        )
    matrix = XUpdateMatrix(tuple(tuple(_parse_divisor(v) for v in r) for r in cells), groups)

    arcs = tuple((str(i), str(j)) for i, j in doc.get("relations", []))
    ids = [a.id for a in activities]
    for i, j in arcs:
        for n in (i, j):
            if n not in ids:
                raise CatalogError(f"relation references unknown activity {n!r}")
    graph = RelationGraph(arcs)
    graph.topological_order(ids)  # raises on cycles
    return Catalog(activities, IsoSmafProfileTable(rows), matrix, graph)


def load_catalog(path: str | Path | None = None) -> Catalog:
    path = Path(path) if path is not None else default_catalog_path()
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CatalogError(f"{path}: parse error: {e}") from None
    return parse_catalog(doc)


def smaf_score(sub_score: float, x: float, P: float = PERIOD_DAYS) -> Modality:
    """Map a period's success count onto the four dependency modalities.

    The window capacity P/x is cut into four equal half-open intervals of
    width P/(4x); the top interval is closed so a perfect count is Autonomous.
    """
    if not P > 0 or not x > 0:
        raise ValueError("P and x must be positive")
    if sub_score < 0:
        raise ValueError("sub-score must be non-negative")
    # exact rational comparison, x may be x_initial/3
    q = Fraction(sub_score) * 4 * Fraction(x).limit_denominator(10**6) / Fraction(P)
    if q > 4:
        raise ValueError("sub-score exceeds window capacity")
    if q < 1:
        return Modality.DEPENDENT
    if q < 2:
        return Modality.NEED_HELP
    if q < 3:
        return Modality.SUPERVISION
    return Modality.AUTONOMOUS


def disability_score(scores: Iterable[int], n_items: int = N_SMAF_ITEMS) -> int:
    values = [int(s) for s in scores]
    if len(values) != n_items:
        raise ValueError(f"expected {n_items} activity scores, got {len(values)}")
    for v in values:
        if v not in (0, -1, -2, -3):
            raise ValueError(f"invalid modality {v}")
    return sum(values)


def classify_profile(disability: float, table: IsoSmafProfileTable) -> int:
    """Nearest mean disability; ties go to the lower profile number."""
    d = Decimal(str(disability))
    best = min(table.rows, key=lambda r: (abs(d - Decimal(str(r.mean_disability))), r.profile))
    return best.profile
