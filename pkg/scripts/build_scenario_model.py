"""Write the default (synthetic) scenario model shipped with the package.

The seven transition matrices are built from per-period action weights and
a handful of pairwise affinities (cooking -> eating, washing -> dressing...).
They are plausible hand-made values, not learned from any dataset.

    python scripts/build_scenario_model.py [--out src/adlmon/data/scenario_model.json]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from adlmon.catalog import load_catalog

QUESTIONNAIRES = ["seeing", "hearing", "speaking", "memory", "understanding", "judgement", "behaviour"]

# f = (f_min, f_max) per day when the action is scheduled that day; an open
# f_max on the leisure fillers guarantees every day can reach sd
BEHAVIOUR = {
    "eating": dict(f=[2, 3], duration_s=[900, 2400]),
    "washing": dict(f=[1, 1], duration_s=[600, 1800]),
    "dressing": dict(f=[1, 2], duration_s=[300, 900]),
    "grooming": dict(f=[1, 2], duration_s=[300, 1200]),
    "toileting": dict(f=[2, 5], duration_s=[120, 600]),
    "transfers": dict(f=[1, 6], duration_s=[60, 180]),
    "walking_inside": dict(f=[1, 10], duration_s=[60, 600]),
    "walking_outside": dict(f=[1, 1], duration_s=[1200, 5400], daily_prob=0.5),
    "stairs": dict(f=[1, 2], duration_s=[60, 300], daily_prob=0.5),
    **{q: dict(f=[1, 1], duration_s=[300, 900], daily_prob=1 / 7) for q in QUESTIONNAIRES},
    "housekeeping": dict(f=[1, 1], duration_s=[1800, 5400], daily_prob=0.9, weekdays=[4]),
    "meal_preparation": dict(f=[1, 3], duration_s=[600, 2700]),
    "shopping": dict(f=[1, 1], duration_s=[1800, 5400], daily_prob=0.5, weekdays=[1, 3, 5]),
    "laundry": dict(f=[1, 1], duration_s=[1800, 3600], daily_prob=0.8, weekdays=[0, 3]),
    "telephone_use": dict(f=[0, 4], duration_s=[60, 900]),
    "transportation": dict(f=[1, 1], duration_s=[3600, 10800], daily_prob=0.7, weekdays=[6]),
    "medication_use": dict(f=[1, 3], duration_s=[60, 300]),
    "budget_management": dict(f=[1, 1], duration_s=[600, 1800], daily_prob=0.8, weekdays=[0]),
    "watching_tv": dict(f=[0, None], duration_s=[1800, 10800]),
    "reading": dict(f=[0, None], duration_s=[900, 3600]),
    "sleeping": dict(f=[0, 1], duration_s=[1200, 5400]),
    "weight": dict(f=[1, 1], duration_s=[60, 120]),
}

PERIOD_WEIGHTS = {
    "M1": {"washing": 4, "dressing": 4, "grooming": 4, "toileting": 2, "eating": 2,
           "meal_preparation": 2, "medication_use": 3, "weight": 3, "transfers": 2,
           "walking_inside": 2, "housekeeping": 1.5, "laundry": 1.5, "watching_tv": 0.5,
           "reading": 0.5, "sleeping": 0.2, **{q: 0.3 for q in QUESTIONNAIRES}},
    "M2": {"eating": 4, "meal_preparation": 4, "medication_use": 2, "shopping": 2,
           "walking_outside": 1.5, "transportation": 1.5, "telephone_use": 1.5, "toileting": 1.5,
           "washing": 0.3, "dressing": 0.3, "sleeping": 0.5, **{q: 0.3 for q in QUESTIONNAIRES}},
    "M3": {"sleeping": 3, "reading": 3, "watching_tv": 2, "walking_outside": 2, "shopping": 2,
           "telephone_use": 2, "budget_management": 1.5, "stairs": 1.5, "eating": 0.5,
           "meal_preparation": 0.5, **{q: 0.5 for q in QUESTIONNAIRES}},
    "M4": {"eating": 3, "meal_preparation": 3, "watching_tv": 4, "telephone_use": 1.5,
           "reading": 1.5, "medication_use": 2, "toileting": 1.5, "washing": 0.8, "grooming": 1.5,
           **{q: 2 for q in QUESTIONNAIRES}},
    "M5": {"sleeping": 5, "toileting": 3, "walking_inside": 2, "grooming": 1, "washing": 1,
           "dressing": 1, "default": 0.3},
}
FRIDAY_BOOST = {"housekeeping": 6}
SUNDAY_BOOST = {"transportation": 4, "walking_outside": 4}

AFFINITY = {
    ("meal_preparation", "eating"): 5,
    ("eating", "medication_use"): 3,
    ("toileting", "grooming"): 2,
    ("washing", "dressing"): 4,
    ("dressing", "grooming"): 2,
    ("sleeping", "toileting"): 3,
    ("shopping", "walking_outside"): 2,
    **{("watching_tv", q): 3 for q in QUESTIONNAIRES},
}
SELF_WEIGHT = 0.1

# Modality per (profile, group) read off the shading of the x-update table:
# inf -> autonomous, x/1 -> supervision, x/2 -> help, x/3 -> dependent;
# IADL becomes dependent where the table stops monitoring it (P11-P14).
ABILITIES = [
    [0, 0, 0, 0, -1],
    [0, 0, 0, 0, -1],
    [0, 0, -1, -1, -2],
    [0, -1, -1, 0, -2],
    [-1, 0, -1, -1, -3],
    [-1, -1, -1, -1, -3],
    [-1, -1, -1, -2, -3],
    [-1, -1, -1, -2, -3],
    [-2, -2, -1, -1, -3],
    [-2, -1, -1, -2, -3],
    [-2, -2, -1, -2, -3],
    [-3, -2, -1, -2, -3],
    [-3, -3, -1, -2, -3],
    [-3, -3, -2, -3, -3],
]
# share of days an activity is not achieved; category II activities with
# x = 3 then land near the middle of the matching score interval
FAILURE_PROB = {"0": 0.0, "-1": 0.4, "-2": 0.65, "-3": 0.9}
# category I activities are scored on whether they happen at all within x
# days, so their failures come in spells long enough to stretch the cycle
FAILURE_SPELL_DAYS = {"-1": 12, "-2": 30, "-3": 60}
EPISODES_PER_MONTH = [1, 1, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3, 3]


def period_vector(actions, weights):
    default = weights.get("default", 1.0)
    return np.array([weights.get(a, default) for a in actions], dtype=float)


def to_matrix(actions, w):
    n = len(actions)
    m = np.tile(w, (n, 1))
    for (i, j), k in AFFINITY.items():
        if i in actions and j in actions:
            m[actions.index(i), actions.index(j)] *= k
    m[np.arange(n), np.arange(n)] *= SELF_WEIGHT
    return m / m.sum(axis=1, keepdims=True)


def build(catalog_path=None):
    catalog = load_catalog(catalog_path)
    actions = [a.id for a in catalog if a.id in BEHAVIOUR]
    vecs = {p: period_vector(actions, PERIOD_WEIGHTS[p]) for p in ("M1", "M2", "M3", "M4", "M5")}
    day_avg = np.mean([vecs[p] for p in ("M1", "M2", "M3", "M4")], axis=0)
    friday = day_avg * period_vector(actions, {**FRIDAY_BOOST, "default": 1.0})
    sunday = day_avg * period_vector(actions, {**SUNDAY_BOOST, "default": 1.0})
    mats = {p: to_matrix(actions, v) for p, v in vecs.items()}
    mats["M6"] = to_matrix(actions, friday)
    mats["M7"] = to_matrix(actions, sunday)
    return {
        "version": 1,
        "synthetic": True,
        "note": "hand-made default matrices and behaviour; replace with learned values if available",
        "actions": actions,
        "matrices": {k: mats[k].tolist() for k in sorted(mats)},
        "behaviour": {a: BEHAVIOUR[a] for a in actions},
        "transition_s": [60, 900],
        "sd_s": 16 * 3600,
        "wake_s": [7 * 3600, 8 * 3600],
        "night_activity": "sleeping",
        "abilities": ABILITIES,
        "failure_prob": FAILURE_PROB,
        "failure_spell_days": FAILURE_SPELL_DAYS,
        "duration_stretch": 0.25,
        "anomalies": {"run_days": 3, "episodes_per_month": EPISODES_PER_MONTH,
                      "duration_out_share": 0.25},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--catalog", default=None)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1]
                                         / "src" / "adlmon" / "data" / "scenario_model.json"))
    args = ap.parse_args()
    doc = build(args.catalog)
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {args.out} ({len(doc['actions'])} actions)")


if __name__ == "__main__":
    main()
