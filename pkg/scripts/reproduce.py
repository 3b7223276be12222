"""Year runs over a range of seeds: headline savings, accuracy and false alarms.

    python3 scripts/reproduce.py --seeds 0-19
    python3 scripts/reproduce.py --schedule p1 --seeds 42
"""

import argparse
import json

import numpy as np

from adlmon.catalog import load_catalog
from adlmon.engine import run, run_continuous
from adlmon.evaluation import build_report
from adlmon.generator import DECLINE_SCHEDULE, generate_year, load_scenario_model

SCHEDULES = {"decline": DECLINE_SCHEDULE, "p1": [(1, 12, 1)]}
COLUMNS = ("sensing_saving_pct", "energy_saving_pct", "traffic_saving_pct",
           "accuracy_pct", "accuracy_months_8_12_pct")


def seed_range(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def one_year(catalog, model, schedule, seed: int) -> dict:
    events, truth = generate_year(model, catalog, schedule, seed=seed)
    report = build_report(run(events, catalog), run_continuous(events, catalog), truth)
    fa_a, fa_c = report.false_alarms_adaptive, report.false_alarms_continuous
    return {"seed": seed, **{k: report.summary()[k] for k in COLUMNS}, "anomalies": len(truth),
            "fa_months_ok": sum(a <= c for a, c in zip(fa_a, fa_c))}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="42", help="e.g. 42, 0-19 or 1,5,9")
    ap.add_argument("--schedule", choices=SCHEDULES, default="decline")
    ap.add_argument("--json", action="store_true", help="one JSON object per seed")
    args = ap.parse_args()

    catalog, model = load_catalog(), load_scenario_model()
    rows = [one_year(catalog, model, SCHEDULES[args.schedule], s) for s in seed_range(args.seeds)]
    if args.json:
        for r in rows:
            print(json.dumps(r))
        return
    fmt = lambda v: "  n/a" if v is None else f"{v:6.2f}"
    print("seed  sensing  energy  traffic  acc    acc8-12  anomalies  fa_ok")
    for r in rows:
        print(f"{r['seed']:4d}  " + "  ".join(fmt(r[k]) for k in COLUMNS)
              + f"  {r['anomalies']:9d}  {r['fa_months_ok']:5d}")
    if len(rows) > 1:
        for k in COLUMNS:
            v = np.array([r[k] for r in rows if r[k] is not None])
            print(f"{k:20s} mean {v.mean():6.2f}  min {v.min():6.2f}  max {v.max():6.2f}")


if __name__ == "__main__":
    main()
