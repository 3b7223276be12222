"""Energy and traffic accounting for sensor windows.

Costs are kept per month and per activity; per-class and cumulative views
are derived from those arrays so the totals can never drift apart.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import DAY_S, PERIOD_DAYS, SENSOR_CLASSES, Catalog

N_MONTHS = 12
YEAR_S = 365 * DAY_S


class ResourceError(ValueError):
    pass


@dataclass(frozen=True)
class SensorClassParams:
    cls: str
    i_tx: float  # mA
    i_idle: float  # mA
    i_sleep: float  # mA
    sample_rate: float  # samples/s while active
    payload: int  # bytes per sample
    bitrate: float = 31_250.0  # bytes/s on air, 250 kbit/s radio
    voltage: float = 3.0

    def __post_init__(self):
        if not self.i_tx >= self.i_idle >= self.i_sleep > 0:
            raise ResourceError(f"{self.cls}: need i_tx >= i_idle >= i_sleep > 0")
        if self.sample_rate <= 0 or self.payload <= 0 or self.bitrate <= 0:
            raise ResourceError(f"{self.cls}: sample_rate, payload and bitrate must be positive")

    def scaled(self, k: float) -> "SensorClassParams":
        return SensorClassParams(self.cls, self.i_tx * k, self.i_idle * k, self.i_sleep * k,
                                 self.sample_rate, self.payload, self.bitrate, self.voltage)


def default_sensors_path() -> Path:
    return Path(str(resources.files("adlmon.data").joinpath("sensors.json")))


def load_sensor_params(path: str | Path | None = None) -> dict[str, SensorClassParams]:
    path = Path(path) if path is not None else default_sensors_path()
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ResourceError(f"{path}: parse error: {e}") from None
    out = {}
    for cls, raw in doc.get("classes", {}).items():
        if cls not in SENSOR_CLASSES:
            raise ResourceError(f"unknown sensor class {cls!r}")
        out[cls] = SensorClassParams(cls=cls, **raw)
    missing = set(SENSOR_CLASSES) - set(out)
    if missing:
        raise ResourceError(f"{path}: missing sensor classes {sorted(missing)}")
    return out


def window_cost(params: SensorClassParams, active_s: float, tx_s: float) -> tuple[float, float]:
    """(mA·s, bytes) for one active window of which tx_s seconds transmit."""
    if active_s < 0 or tx_s < 0:
        raise ResourceError("negative duration")
    if tx_s > active_s:
        raise ResourceError("tx_s exceeds active_s")
    energy = params.i_tx * tx_s + params.i_idle * (active_s - tx_s)
    traffic = params.sample_rate * active_s * params.payload
    return energy, traffic


def active_cost(params: SensorClassParams, active_s: float) -> tuple[float, float]:
    """Window cost when the radio time follows from the sampled traffic."""
    traffic = params.sample_rate * active_s * params.payload
    tx_s = min(active_s, traffic / params.bitrate)
    return window_cost(params, active_s, tx_s)


def sleep_cost(params: SensorClassParams, sleep_s: float) -> float:
    if sleep_s < 0:
        raise ResourceError("negative duration")
    return params.i_sleep * sleep_s


def month_edges(horizon_s: int, n_months: int = N_MONTHS) -> np.ndarray:
    """Boundaries of the accounting months; the last one absorbs the year tail."""
    edges = np.minimum(np.arange(n_months + 1, dtype=np.int64) * PERIOD_DAYS * DAY_S, horizon_s)
    edges[-1] = horizon_s
    return edges


def month_of(t_s: int, n_months: int = N_MONTHS) -> int:
    return min(int(t_s) // (PERIOD_DAYS * DAY_S), n_months - 1)


@dataclass
class ResourceLedger:
    """Per (month, activity) energy, traffic, active time and monitored counts."""

    activity_ids: tuple[str, ...]
    classes: tuple[str | None, ...]  # None: no sensing cost (computed or log-only)
    n_months: int = N_MONTHS
    energy: np.ndarray = field(default=None)  # mA·s
    traffic: np.ndarray = field(default=None)  # bytes
    active_s: np.ndarray = field(default=None)
    count: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = (self.n_months, len(self.activity_ids))
        for name in ("energy", "traffic", "active_s"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape))
        if self.count is None:
            self.count = np.zeros(shape, dtype=np.int64)
        self._index = {a: i for i, a in enumerate(self.activity_ids)}

    @classmethod
    def for_catalog(cls, catalog: Catalog, n_months: int = N_MONTHS) -> "ResourceLedger":
        classes = tuple(
            None if (a.computed or a.event_log_only) else a.sensor_class for a in catalog
        )
        return cls(tuple(catalog.ids), classes, n_months)

    def index(self, activity_id: str) -> int:
        return self._index[activity_id]

    def costed(self, activity_id: str) -> bool:
        return self.classes[self._index[activity_id]] is not None

    def accumulate(self, activity_id: str, month: int, energy: float = 0.0,
                   traffic: float = 0.0, count: int = 0, active_s: float = 0.0) -> None:
        i = self._index[activity_id]
        self.energy[month, i] += energy
        self.traffic[month, i] += traffic
        self.count[month, i] += count
        self.active_s[month, i] += active_s

    def charge_active(self, activity_id: str, t0: int, t1: int,
                      params: Mapping[str, SensorClassParams], horizon_s: int) -> None:
        """Charge the active interval [t0, t1), split at month boundaries."""
        cls = self.classes[self._index[activity_id]]
        t1 = min(t1, horizon_s)
        if cls is None or t1 <= t0:
            return
        p = params[cls]
        edges = month_edges(horizon_s, self.n_months)
        m = month_of(t0, self.n_months)
        while t0 < t1:
            end = min(t1, int(edges[m + 1])) if m + 1 < len(edges) - 1 else t1
            e, b = active_cost(p, end - t0)
            self.accumulate(activity_id, m, e, b, 0, end - t0)
            t0, m = end, m + 1

    def add_sleep(self, params: Mapping[str, SensorClassParams], horizon_s: int) -> None:
        """Sleep-mode energy for every second a costed sensor was not active."""
        lengths = np.diff(month_edges(horizon_s, self.n_months)).astype(float)
        for i, cls in enumerate(self.classes):
            if cls is None:
                continue
            sleep = np.maximum(lengths - self.active_s[:, i], 0.0)
            self.energy[:, i] += params[cls].i_sleep * sleep

    def merge(self, other: "ResourceLedger") -> "ResourceLedger":
        if other.activity_ids != self.activity_ids or other.n_months != self.n_months:
            raise ResourceError("ledgers cover different activities")
        return ResourceLedger(self.activity_ids, self.classes, self.n_months,
                              self.energy + other.energy, self.traffic + other.traffic,
                              self.active_s + other.active_s, self.count + other.count)

    # --- views ---------------------------------------------------------------

    def monthly(self, metric: str) -> np.ndarray:
        """Monthly totals over all activities."""
        return getattr(self, metric).sum(axis=1)

    def cumulative(self, metric: str) -> np.ndarray:
        return np.cumsum(self.monthly(metric))

    def by_class(self, metric: str) -> dict[str, np.ndarray]:
        arr = getattr(self, metric)
        out = {}
        for cls in SENSOR_CLASSES:
            cols = [i for i, c in enumerate(self.classes) if c == cls]
            out[cls] = arr[:, cols].sum(axis=1)
        return out

    def per_activity(self, metric: str) -> dict[str, float]:
        tot = getattr(self, metric).sum(axis=0)
        return {a: float(tot[i]) for i, a in enumerate(self.activity_ids)}

    def total(self, metric: str) -> float:
        return float(getattr(self, metric).sum())

    def to_csv(self) -> str:
        """month,class,energy_mAs,traffic_bytes,activities (+ a total row per month)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", "class", "energy_mAs", "traffic_bytes", "activities"])
        counts = self.count
        for m in range(self.n_months):
            for cls in (*SENSOR_CLASSES, "none"):
                cols = [i for i, c in enumerate(self.classes) if (c or "none") == cls]
                w.writerow([m + 1, cls, f"{self.energy[m, cols].sum():.6f}",
                            f"{self.traffic[m, cols].sum():.3f}", int(counts[m, cols].sum())])
            w.writerow([m + 1, "total", f"{self.energy[m].sum():.6f}",
                        f"{self.traffic[m].sum():.3f}", int(counts[m].sum())])
        return buf.getvalue()

    def activities_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", "activity_id", "class", "energy_mAs", "traffic_bytes",
                    "active_s", "activities"])
        for m in range(self.n_months):
            for i, a in enumerate(self.activity_ids):
                w.writerow([m + 1, a, self.classes[i] or "none", f"{self.energy[m, i]:.6f}",
                            f"{self.traffic[m, i]:.3f}", f"{self.active_s[m, i]:.0f}",
                            int(self.count[m, i])])
        return buf.getvalue()


def read_activities_csv(text: str, catalog: Catalog) -> ResourceLedger:
    """Inverse of ResourceLedger.activities_csv."""
    ledger = ResourceLedger.for_catalog(catalog)
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        m, i = int(r["month"]) - 1, ledger.index(r["activity_id"])
        ledger.energy[m, i] = float(r["energy_mAs"])
        ledger.traffic[m, i] = float(r["traffic_bytes"])
        ledger.active_s[m, i] = float(r["active_s"])
        ledger.count[m, i] = int(r["activities"])
    return ledger


def continuous_baseline(
    catalog: Catalog,
    horizon_s: int,
    params: Mapping[str, SensorClassParams] | None = None,
    events: Iterable | None = None,
) -> ResourceLedger:
    """Every sensor active for the whole horizon; every event is monitored."""
    params = params if params is not None else load_sensor_params()
    ledger = ResourceLedger.for_catalog(catalog)
    if horizon_s <= 0:
        return ledger
    for a in catalog.ids:
        ledger.charge_active(a, 0, horizon_s, params, horizon_s)
    for ev in events or ():
        if ev.start_s < horizon_s:
            ledger.accumulate(catalog.resolve(ev.activity_id), month_of(ev.start_s), count=1)
    return ledger


def cumulative_rows(monthly: Sequence[float]) -> list[float]:
    return list(np.cumsum(np.asarray(monthly, dtype=float)))
