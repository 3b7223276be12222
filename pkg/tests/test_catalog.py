import copy
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from adlmon.catalog import (
    COMPUTED,
    GROUPS,
    INF,
    CatalogError,
    Modality,
    classify_profile,
    disability_score,
    parse_catalog,
    smaf_score,
)

# profile, mean disability, category; transcribed from the iso-SMAF table
PROFILE_TABLE = [
    (1, -9.33, 1), (2, -13.23, 1), (3, -19.76, 1), (4, -23.69, 2), (5, -28.54, 3),
    (6, -32.04, 2), (7, -39.19, 3), (8, -42.24, 3), (9, -48.15, 2), (10, -53.02, 3),
    (11, -58.47, 4), (12, -58.71, 4), (13, -64.98, 4), (14, -73.77, 4),
]


def interval_oracle(s, x, P):
    """Direct reading of the four half-open intervals of width P/(4x)."""
    step = Fraction(P) / (4 * Fraction(x))
    s = Fraction(s)
    if 0 <= s < step:
        return -3
    if step <= s < 2 * step:
        return -2
    if 2 * step <= s < 3 * step:
        return -1
    if 3 * step <= s <= 4 * step:
        return 0
    raise AssertionError("outside [0, P/x]")


def test_default_catalog_sizes(catalog):
    assert len(catalog) == 29
    assert catalog.n_sub_activities == 9
    assert len(catalog.profiles) == 14
    assert catalog.x_update.shape == (14, 5)


def test_profile_table_transcription(catalog):
    got = [(r.profile, r.mean_disability, r.category) for r in catalog.profiles.rows]
    assert got == PROFILE_TABLE


def test_computed_activities(catalog):
    assert {a.id for a in catalog if a.x_initial == COMPUTED} == {"walking_inside", "orientation"}


def test_category_II_has_count_range(catalog):
    for a in catalog:
        if a.category == "II":
            assert a.normal_count_range is not None


def test_empty_catalog_rejected(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["activities"] = []
    with pytest.raises(CatalogError, match="empty catalog"):
        parse_catalog(doc)


def test_self_loop_rejected(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["relations"] = [["washing", "washing"]]
    with pytest.raises(CatalogError, match="cyclic relation graph"):
        parse_catalog(doc)


def test_longer_cycle_rejected(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["relations"] = [["washing", "dressing"], ["dressing", "grooming"], ["grooming", "washing"]]
    with pytest.raises(CatalogError, match="cyclic"):
        parse_catalog(doc)


def test_duplicate_id_rejected(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["activities"].append(dict(doc["activities"][0]))
    with pytest.raises(CatalogError, match="duplicate"):
        parse_catalog(doc)


def test_matrix_shape_mismatch(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["x_update_matrix"] = doc["x_update_matrix"][:-1]
    with pytest.raises(CatalogError, match="shape mismatch"):
        parse_catalog(doc)


def test_unknown_relation_endpoint(catalog_doc):
    doc = copy.deepcopy(catalog_doc)
    doc["relations"] = [["washing", "flying"]]
    with pytest.raises(CatalogError, match="unknown activity"):
        parse_catalog(doc)


def test_divisors_never_exceed_three(catalog):
    for p in range(1, 15):
        for g in GROUPS:
            d = catalog.x_update.divisor(p, g)
            assert d == INF or d in (1, 2, 3)


def test_subactivities_resolve(catalog):
    assert catalog.resolve("make_tea") == "meal_preparation"
    assert catalog.resolve("hair_dry") == "grooming"
    assert catalog.resolve("eating") == "eating"


# --- scoring ---------------------------------------------------------------

@pytest.mark.parametrize("s,x,P,expected", [
    (8, 3, 30, Modality.AUTONOMOUS),
    (0, 3, 30, Modality.DEPENDENT),
    (5, 3, 30, Modality.SUPERVISION),
    (10, 10, 100, Modality.AUTONOMOUS),
    (10, 3, 30, Modality.AUTONOMOUS),
])
def test_smaf_examples(s, x, P, expected):
    assert smaf_score(s, x, P) == expected


def test_smaf_over_capacity():
    with pytest.raises(ValueError, match="exceeds window capacity"):
        smaf_score(11, 3, 30)


def test_smaf_brute_force_small_windows():
    # every (x, P) with P/x <= 20, integer and quarter-step sub-scores
    checked = 0
    for P in range(1, 101):
        for x in range(1, P + 1):
            cap = Fraction(P, x)
            if cap > 20:
                continue
            step = cap / 4
            points = {Fraction(k) for k in range(int(cap) + 1)} | {k * step for k in range(5)}
            for s in points:
                assert smaf_score(s, x, P) == interval_oracle(s, x, P), (s, x, P)
                checked += 1
    assert checked > 1000


def test_smaf_partition_exhaustive():
    # the four intervals tile [0, P/x]: every modality is reached, in order
    for x in range(1, 31):
        P = 30 * x  # P/x = 30
        values = [smaf_score(Fraction(k, 8), x, P) for k in range(0, 30 * 8 + 1)]
        assert values == sorted(values)
        assert set(values) == {-3, -2, -1, 0}


@given(st.integers(1, 30), st.fractions(min_value=0, max_value=30))
def test_smaf_matches_oracle(x, s):
    cap = Fraction(30, x)
    if s > cap:
        with pytest.raises(ValueError):
            smaf_score(s, x, 30)
    else:
        assert smaf_score(s, x, 30) == interval_oracle(s, x, 30)


def test_disability_examples():
    assert disability_score([0] * 29) == 0
    assert disability_score([-3] * 29) == -87
    assert disability_score([-1] * 10 + [0] * 19) == -10
    with pytest.raises(ValueError):
        disability_score([0] * 28)
    with pytest.raises(ValueError):
        disability_score([0] * 28 + [-4])


@given(st.lists(st.sampled_from([0, -1, -2, -3]), min_size=29, max_size=29))
def test_disability_is_exact_sum(scores):
    assert disability_score(scores) == sum(scores)


def test_classify_examples(catalog):
    t = catalog.profiles
    assert classify_profile(-9.33, t) == 1
    assert classify_profile(-73.77, t) == 14
    assert classify_profile(0, t) == 1
    assert classify_profile(-87, t) == 14
    assert classify_profile(-11.28, t) == 1


def test_classify_boundaries(catalog):
    t = catalog.profiles
    for (p, a, _), (q, b, _) in zip(PROFILE_TABLE, PROFILE_TABLE[1:]):
        mid = (Fraction(str(a)) + Fraction(str(b))) / 2
        assert classify_profile(float(mid), t) == p  # tie to the lower number
        eps = Fraction(1, 1000)
        assert classify_profile(float(mid + eps), t) == p
        assert classify_profile(float(mid - eps), t) == q


@given(st.floats(-87, 0), st.floats(-87, 0))
def test_classify_follows_table_order(catalog, a, b):
    # the published means are non-increasing, so nearest-mean is monotone
    t = catalog.profiles
    if a >= b:
        assert classify_profile(a, t) <= classify_profile(b, t)


@given(st.floats(-87, 0))
def test_classify_is_nearest(catalog, d):
    t = catalog.profiles
    p = classify_profile(d, t)
    best = min(abs(d - m) for _, m, _ in PROFILE_TABLE)
    assert math.isclose(abs(d - t.mean(p)), best, abs_tol=1e-9)
