"""End-to-end acceptance checks. Each test prints one PASS/FAIL line."""

import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from adlmon.catalog import INF, RelationGraph, smaf_score
from adlmon.cli import main
from adlmon.engine import AdaptiveMonitor
from adlmon.generator import DECLINE_SCHEDULE, generate_sequence

from conftest import year_run
from gen_oracles import random_constraints, random_matrices, violations

DAY = 86_400
SWEEP_SEEDS = range(20)


@pytest.fixture
def verdict(capsys):
    def say(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return say


@pytest.fixture(scope="module")
def sweep(catalog, model):
    return {s: year_run(catalog, model, DECLINE_SCHEDULE, seed=s) for s in SWEEP_SEEDS}


def oracle(s, x, P):
    step = Fraction(P, 4 * x)
    return next(v for k, v in ((1, -3), (2, -2), (3, -1)) if s < k * step) if s < 3 * step else 0


def test_1_scoring_oracle(verdict):
    t0 = time.perf_counter()
    cases = [(s, x) for x in range(1, 31) for s in range(0, 30 // x + 1)]
    bad = [(s, x) for s, x in cases if smaf_score(s, x, 30) != oracle(s, x, 30)]
    dt = time.perf_counter() - t0
    verdict(1, not bad and dt < 1, f"{len(cases)} cases, {len(bad)} mismatches, {dt:.3f} s")


def test_2_worked_example_and_boundaries(verdict):
    got = {s: int(smaf_score(s, 3, 30)) for s in (2, 3, 5, 7, 8, 10)}
    want = {2: -3, 3: -2, 5: -1, 7: -1, 8: 0, 10: 0}
    verdict(2, got == want, f"x=3 P=30 scores {got}")


# Global monitoring table, one divisor per (profile, group); None is inf.
# The x/(3-1) and x/(3-2) cells are transcribed as 2 and 1.
TABLE = {
    1: (None, None, None, None, 1), 2: (None, None, None, None, 1),
    3: (None, None, 1, 1, 2), 4: (None, 1, 1, None, 2),
    5: (1, None, 1, 1, 3), 6: (1, 1, 1, 1, 3),
    7: (1, 1, 1, 2, 2), 8: (1, 1, 1, 2, 2),
    9: (2, 2, 1, 1, 1), 10: (2, 1, 1, 2, 1),
    11: (2, 2, 1, 2, None), 12: (3, 2, 1, 2, None),
    13: (3, 3, 1, 2, None), 14: (3, 3, 2, 3, None),
}
TABLE_GROUPS = ("ADL", "Mobility", "Communication", "MentalFunctions", "IADL")


def forced_vector(catalog, profile):
    """Scores whose disability sum lands on the profile's mean."""
    target = round(catalog.profiles.mean(profile))
    vec = [-3] * (-target // 3) + ([target % -3] if target % -3 else [])
    return dict(zip(catalog.ids, vec + [0] * (len(catalog.ids) - len(vec))))


def test_3_x_update_conformance(verdict, catalog):
    cat = replace(catalog, relations=RelationGraph(()))
    cells = bad = 0
    for p in range(1, 15):
        m = AdaptiveMonitor(cat)
        forced = forced_vector(cat, p)
        m.scores = lambda forced=forced: forced
        m._monthly(30 * DAY)
        bad += m.state.profile != p
        for g, d in zip(TABLE_GROUPS, TABLE[p]):
            members = [a for a in cat if a.group == g and not a.computed]
            want = lambda a: INF if d is None else a.x_initial / d
            cells += bool(members)
            bad += any(m.state.activities[a.id].x != want(a) for a in members)
    verdict(3, cells == 70 and bad == 0, f"{cells} cells, {bad} mismatches")


def test_4_declining_schedule_savings(verdict, catalog, model):
    t0 = time.perf_counter()
    total = year_run(catalog, model, DECLINE_SCHEDULE, seed=42)[4].total
    dt = time.perf_counter() - t0
    s, e, b = total.sensing_saving_pct, total.energy_saving_pct, total.traffic_saving_pct
    ok = 75 <= s <= 95 and 80 <= e <= 95 and 80 <= b <= 95 and dt < 60
    verdict(4, ok, f"sensing {s:.2f}% energy {e:.2f}% traffic {b:.2f}% in {dt:.1f} s")


def test_5_stable_profile(verdict, catalog, model):
    total = year_run(catalog, model, [(1, 12, 1)], seed=42)[4].total
    e, b = total.energy_saving_pct, total.traffic_saving_pct
    verdict(5, e >= 85 and b >= 85, f"energy {e:.2f}% traffic {b:.2f}%")


def test_6_monotonicity(verdict, sweep):
    bad = 0
    for _, _, a, c, _ in sweep.values():
        for k in ("count", "energy", "traffic"):
            bad += int(np.sum(getattr(a.ledger, k).sum(axis=1) > getattr(c.ledger, k).sum(axis=1) + 1e-9))
    verdict(6, bad == 0, f"{len(sweep)} seeds, {bad} violating rows")


def test_7_detection_accuracy(verdict, catalog, model):
    _, truth, _, _, report = year_run(catalog, model, DECLINE_SCHEDULE, seed=42)
    n, acc, late = len(truth), report.accuracy_pct, report.accuracy_late_pct
    verdict(7, n >= 30 and acc >= 75 and late >= 90,
            f"{n} anomalies, overall {acc:.2f}%, months 8-12 {late:.2f}%")


def test_8_false_alarm_suppression(verdict, sweep):
    months = []
    for s in list(SWEEP_SEEDS)[:10]:
        r = sweep[s][4]
        months.append(sum(a <= c for a, c in zip(r.false_alarms_adaptive, r.false_alarms_continuous)))
    verdict(8, min(months) >= 11, f"months with adaptive <= continuous per seed: {months}")


def test_9_generator_constraints(verdict, model):
    actions = list(model.actions)
    bad = runs = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        c = random_constraints(actions, rng)
        start = int(rng.integers(0, 7 * DAY))
        for mats in (model.matrices, random_matrices(actions, rng)):
            ev = generate_sequence(mats, c, seed, start_s=start, day_of_week=int(rng.integers(7)))
            bad += bool(violations(ev, c, start))
            runs += 1
    verdict(9, bad == 0, f"{runs} sequences from 100 constraint sets, {bad} with violations")


def test_10_determinism(verdict, tmp_path):
    files = ["scenario.csv", "ground_truth.csv", "adaptive/detections.csv",
             "adaptive/assessments.csv", "continuous/detections.csv", "report.json", "comparison.csv"]
    for name in ("a", "b"):
        assert main(["run", "--out", str(tmp_path / name), "--quiet"]) == 0
    differ = [f for f in files if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    verdict(10, not differ, f"{len(files)} files compared, differing: {differ or 'none'}")
