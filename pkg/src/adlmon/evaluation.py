"""Savings, false alarms and detection accuracy, plus figure-ready CSV series."""

from __future__ import annotations

import csv
import io
import json
from bisect import bisect_left, bisect_right
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import DAY_S
from .engine import ABNORMAL, Detection, RunResult
from .resources import N_MONTHS, ResourceLedger, month_of
from .scenario import GroundTruthEntry, _atomic_write

MATCH_WINDOW_S = DAY_S
LATE_MONTHS = range(8, 13)  # 1-based months used for the late-year accuracy
SERIES = ("energy", "traffic", "activities", "false_alarms", "detections")
SERIES_HEADER = ["month", "adaptive", "continuous", "adaptive_cumulative", "continuous_cumulative"]


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class SavingsRow:
    activity_id: str
    sensing_saving_pct: float | None
    energy_saving_pct: float | None
    traffic_saving_pct: float | None


@dataclass
class ComparisonReport:
    rows: list[SavingsRow] = field(default_factory=list)
    total: SavingsRow | None = None
    # metric -> {"adaptive": [...], "continuous": [...]} monthly values
    monthly: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    false_alarms_adaptive: list[int] = field(default_factory=list)
    false_alarms_continuous: list[int] = field(default_factory=list)
    detections_adaptive: list[int] = field(default_factory=list)
    detections_continuous: list[int] = field(default_factory=list)
    accuracy_pct: float | None = None
    accuracy_by_month: list[float | None] = field(default_factory=list)
    accuracy_late_pct: float | None = None
    n_anomalies: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        d = json.loads(text)
        d["rows"] = [SavingsRow(**r) for r in d.get("rows", [])]
        d["total"] = SavingsRow(**d["total"]) if d.get("total") else None
        return cls(**d)

    def summary(self) -> dict:
        t = self.total
        return {
            "sensing_saving_pct": t.sensing_saving_pct if t else None,
            "energy_saving_pct": t.energy_saving_pct if t else None,
            "traffic_saving_pct": t.traffic_saving_pct if t else None,
            "accuracy_pct": self.accuracy_pct,
            "accuracy_months_8_12_pct": self.accuracy_late_pct,
            "n_anomalies": self.n_anomalies,
            "false_alarms_adaptive": int(sum(self.false_alarms_adaptive)),
            "false_alarms_continuous": int(sum(self.false_alarms_continuous)),
        }


def saving_pct(adaptive: float, continuous: float) -> float | None:
    """100·(1 − adaptive/continuous); None (N/A) when nothing is spent continuously."""
    if continuous <= 0:
        return None
    return 100.0 * (1.0 - adaptive / continuous)


def savings(adaptive: ResourceLedger, continuous: ResourceLedger) -> tuple[list[SavingsRow], SavingsRow]:
    if adaptive.activity_ids != continuous.activity_ids:
        raise EvaluationError("ledgers cover different activities")
    if continuous.total("energy") <= 0:
        raise EvaluationError("continuous total is zero")
    per = {m: (adaptive.per_activity(m), continuous.per_activity(m))
           for m in ("count", "energy", "traffic")}
    rows = []
    for a in adaptive.activity_ids:
        rows.append(SavingsRow(a, *(saving_pct(per[m][0][a], per[m][1][a])
                                    for m in ("count", "energy", "traffic"))))
    total = SavingsRow("Total", *(saving_pct(adaptive.total(m), continuous.total(m))
                                  for m in ("count", "energy", "traffic")))
    return rows, total


def _truth_index(ground_truth: Sequence[GroundTruthEntry]) -> dict[str, list[int]]:
    idx: dict[str, list[int]] = {}
    for g in ground_truth:
        idx.setdefault(g.activity_id, []).append(g.t_s)
    for v in idx.values():
        v.sort()
    return idx


def _near(times: list[int], t: int, window: int) -> bool:
    i = bisect_left(times, t - window)
    return i < len(times) and times[i] <= t + window


def false_alarms(detections: Sequence[Detection], ground_truth: Sequence[GroundTruthEntry],
                 n_months: int = N_MONTHS, window_s: int = MATCH_WINDOW_S) -> list[int]:
    """Abnormal detections with no same-activity anomaly within ±window, per month."""
    idx = _truth_index(ground_truth)
    out = [0] * n_months
    for d in detections:
        if d.kind != ABNORMAL:
            continue
        if not _near(idx.get(d.activity_id, []), d.t_s, window_s):
            out[month_of(d.t_s, n_months)] += 1
    return out


def matched_anomalies(detections: Sequence[Detection], ground_truth: Sequence[GroundTruthEntry],
                      window_s: int = MATCH_WINDOW_S) -> list[bool]:
    by_act: dict[str, list[int]] = {}
    for d in detections:
        if d.kind == ABNORMAL:
            by_act.setdefault(d.activity_id, []).append(d.t_s)
    for v in by_act.values():
        v.sort()
    return [_near(by_act.get(g.activity_id, []), g.t_s, window_s) for g in ground_truth]


def accuracy(detections: Sequence[Detection], ground_truth: Sequence[GroundTruthEntry],
             months: Sequence[int] | None = None, window_s: int = MATCH_WINDOW_S) -> float | None:
    """Percentage of anomalies matched by a detection; None when there are none.

    `months` (1-based) restricts the anomalies considered.
    """
    hits = matched_anomalies(detections, ground_truth, window_s)
    if months is not None:
        keep = set(months)
        hits = [h for h, g in zip(hits, ground_truth) if month_of(g.t_s) + 1 in keep]
    if not hits:
        return None
    return 100.0 * sum(hits) / len(hits)


def detections_per_month(detections: Sequence[Detection], n_months: int = N_MONTHS) -> list[int]:
    out = [0] * n_months
    for d in detections:
        if d.kind == ABNORMAL:
            out[month_of(d.t_s, n_months)] += 1
    return out


def build_report(adaptive: RunResult, continuous: RunResult,
                 ground_truth: Sequence[GroundTruthEntry]) -> ComparisonReport:
    rows, total = savings(adaptive.ledger, continuous.ledger)
    monthly = {
        name: {"adaptive": [float(v) for v in adaptive.ledger.monthly(metric)],
               "continuous": [float(v) for v in continuous.ledger.monthly(metric)]}
        for name, metric in (("energy", "energy"), ("traffic", "traffic"), ("activities", "count"))
    }
    return ComparisonReport(
        rows=rows,
        total=total,
        monthly=monthly,
        false_alarms_adaptive=false_alarms(adaptive.detections, ground_truth),
        false_alarms_continuous=false_alarms(continuous.detections, ground_truth),
        detections_adaptive=detections_per_month(adaptive.detections),
        detections_continuous=detections_per_month(continuous.detections),
        accuracy_pct=accuracy(adaptive.detections, ground_truth),
        accuracy_by_month=[accuracy(adaptive.detections, ground_truth, [m])
                           for m in range(1, N_MONTHS + 1)],
        accuracy_late_pct=accuracy(adaptive.detections, ground_truth, LATE_MONTHS),
        n_anomalies=len(ground_truth),
    )


def comparison_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["activity_id", "sensing_saving_pct", "energy_saving_pct", "traffic_saving_pct"])
    fmt = lambda v: "N/A" if v is None else f"{v:.4f}"
    for r in [*report.rows, *([report.total] if report.total else [])]:
        w.writerow([r.activity_id, fmt(r.sensing_saving_pct), fmt(r.energy_saving_pct),
                    fmt(r.traffic_saving_pct)])
    return buf.getvalue()


def _series_pair(report: ComparisonReport, name: str) -> tuple[list[float], list[float]]:
    if name in report.monthly:
        return report.monthly[name]["adaptive"], report.monthly[name]["continuous"]
    if name == "false_alarms":
        return report.false_alarms_adaptive, report.false_alarms_continuous
    return report.detections_adaptive, report.detections_continuous


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.6f}"


def emit_series(report: ComparisonReport, outdir: str | Path) -> list[Path]:
    """Write one CSV per series (monthly and cumulative) plus summary.json."""
    outdir = Path(outdir)
    written = []
    for name in SERIES:
        a, c = _series_pair(report, name)
        ca, cc = np.cumsum(a) if len(a) else [], np.cumsum(c) if len(c) else []
        lines = [",".join(SERIES_HEADER)]
        for m in range(min(len(a), len(c))):
            lines.append(",".join([str(m + 1), _num(a[m]), _num(c[m]), _num(ca[m]), _num(cc[m])]))
        path = outdir / f"{name}.csv"
        _atomic_write(path, "\n".join(lines) + "\n")
        written.append(path)
    path = outdir / "summary.json"
    _atomic_write(path, json.dumps(report.summary(), indent=1, sort_keys=True) + "\n")
    written.append(path)
    return written
