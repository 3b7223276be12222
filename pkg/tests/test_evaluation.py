import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adlmon.engine import ABNORMAL, FALSE_ALARM_CANDIDATE, Detection
from adlmon.evaluation import (
    SERIES,
    ComparisonReport,
    EvaluationError,
    accuracy,
    build_report,
    comparison_csv,
    emit_series,
    false_alarms,
    saving_pct,
    savings,
)
from adlmon.resources import ResourceLedger
from adlmon.scenario import GroundTruthEntry

H = 3600


def ledger(energy, traffic, count):
    led = ResourceLedger(("a", "b"), ("low", None))
    led.accumulate("a", 0, energy, traffic, count)
    return led


def test_saving_pct():
    assert saving_pct(5, 5) == 0
    assert saving_pct(0, 5) == 100
    assert saving_pct(1, 4) == 75
    assert saving_pct(1, 0) is None


def test_savings_rows():
    rows, total = savings(ledger(10, 20, 3), ledger(10, 20, 3))
    assert (total.sensing_saving_pct, total.energy_saving_pct, total.traffic_saving_pct) == (0, 0, 0)
    rows, total = savings(ledger(0, 0, 0), ledger(10, 20, 3))
    assert total.energy_saving_pct == 100
    assert rows[1].energy_saving_pct is None  # zero-cost activity: N/A
    with pytest.raises(EvaluationError, match="continuous total is zero"):
        savings(ledger(0, 0, 0), ledger(0, 0, 0))


def test_false_alarm_examples():
    gt = [GroundTruthEntry(100 * H, "eating", "MissingFrequency")]
    assert false_alarms([], gt) == [0] * 12
    assert sum(false_alarms([Detection(100 * H, "eating", ABNORMAL)], gt)) == 0
    assert sum(false_alarms([Detection(130 * H, "eating", ABNORMAL)], gt)) == 1
    assert sum(false_alarms([Detection(124 * H, "eating", ABNORMAL)], gt)) == 0  # window is inclusive
    assert sum(false_alarms([Detection(100 * H, "toileting", ABNORMAL)], gt)) == 1
    assert sum(false_alarms([Detection(130 * H, "eating", FALSE_ALARM_CANDIDATE)], gt)) == 0


def test_false_alarms_binned_by_month():
    d = [Detection(31 * 86_400, "x", ABNORMAL), Detection(364 * 86_400, "x", ABNORMAL)]
    fa = false_alarms(d, [])
    assert fa[1] == 1 and fa[11] == 1


def test_accuracy_examples():
    gt = [GroundTruthEntry(10 * H, "eating", "MissingFrequency"),
          GroundTruthEntry(800 * H, "toileting", "DurationOut:high")]
    all_hit = [Detection(12 * H, "eating", ABNORMAL), Detection(790 * H, "toileting", ABNORMAL)]
    assert accuracy(all_hit, gt) == 100
    assert accuracy([], gt) == 0
    assert accuracy(all_hit[:1], gt) == 50
    assert accuracy(all_hit, []) is None
    assert accuracy(all_hit, gt, months=[2]) == 100
    assert accuracy(all_hit, gt, months=[5]) is None


def window_oracle(detections, truth, w=86_400):
    """Quadratic reference for matching."""
    hits = [any(d.kind == ABNORMAL and d.activity_id == g.activity_id and abs(d.t_s - g.t_s) <= w
                for d in detections) for g in truth]
    fa = sum(1 for d in detections if d.kind == ABNORMAL and not any(
        g.activity_id == d.activity_id and abs(d.t_s - g.t_s) <= w for g in truth))
    return hits, fa


times = st.integers(0, 20 * 86_400)
acts = st.sampled_from(["eating", "toileting"])


@given(st.lists(st.builds(Detection, times, acts, st.sampled_from([ABNORMAL, FALSE_ALARM_CANDIDATE]))),
       st.lists(st.builds(GroundTruthEntry, times, acts, st.just("MissingFrequency")), min_size=1))
def test_matching_matches_oracle(dets, truth):
    hits, fa = window_oracle(dets, truth)
    assert sum(false_alarms(dets, truth)) == fa
    assert accuracy(dets, truth) == pytest.approx(100 * sum(hits) / len(hits))


def test_report_and_series(tmp_path, decline_year):
    _, truth, adaptive, continuous, report = decline_year
    s = report.summary()
    assert set(s) >= {"sensing_saving_pct", "energy_saving_pct", "traffic_saving_pct", "accuracy_pct"}
    for r in report.rows + [report.total]:
        for v in (r.sensing_saving_pct, r.energy_saving_pct, r.traffic_saving_pct):
            assert v is None or 0 <= v <= 100
    files = emit_series(report, tmp_path)
    assert sorted(p.name for p in files) == sorted([f"{n}.csv" for n in SERIES] + ["summary.json"])
    rows = (tmp_path / "energy.csv").read_text().splitlines()
    assert len(rows) == 13
    monthly = np.array([float(r.split(",")[1]) for r in rows[1:]])
    cum = np.array([float(r.split(",")[3]) for r in rows[1:]])
    assert np.allclose(np.cumsum(monthly), cum, rtol=1e-6)
    fa = (tmp_path / "false_alarms.csv").read_text().splitlines()[1:]
    assert [int(r.split(",")[1]) for r in fa] == report.false_alarms_adaptive


def test_series_deterministic(tmp_path, decline_year):
    _, truth, adaptive, continuous, _ = decline_year
    for name in ("a", "b"):
        emit_series(build_report(adaptive, continuous, truth), tmp_path / name)
    for n in SERIES:
        assert (tmp_path / "a" / f"{n}.csv").read_bytes() == (tmp_path / "b" / f"{n}.csv").read_bytes()


def test_empty_report_header_only(tmp_path):
    emit_series(ComparisonReport(), tmp_path)
    for n in SERIES:
        assert (tmp_path / f"{n}.csv").read_text().splitlines() == [
            "month,adaptive,continuous,adaptive_cumulative,continuous_cumulative"]


def test_report_json_round_trip(decline_year):
    report = decline_year[4]
    back = ComparisonReport.from_json(report.to_json())
    assert back == report
    assert json.loads(report.to_json())["total"]["activity_id"] == "Total"
    csv = comparison_csv(report).splitlines()
    assert csv[-1].startswith("Total,") and "N/A" in comparison_csv(report)


def test_decline_months_not_worse(decline_year):
    report = decline_year[4]
    assert report.accuracy_late_pct >= report.accuracy_pct
