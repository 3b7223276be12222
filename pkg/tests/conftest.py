import copy
import json

import pytest

from adlmon.catalog import default_catalog_path, load_catalog, parse_catalog
from adlmon.engine import run, run_continuous
from adlmon.evaluation import build_report
from adlmon.generator import DECLINE_SCHEDULE, generate_year, load_scenario_model
from adlmon.resources import load_sensor_params

SEED = 42


def _default_doc():
    return json.loads(default_catalog_path().read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def catalog_doc():
    return _default_doc()


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def model():
    return load_scenario_model()


@pytest.fixture(scope="session")
def params():
    return load_sensor_params()


def small_catalog(activities, relations=(), divisor=1):
    """Default profile table with a hand-made activity list and a uniform x-update matrix."""
    doc = copy.deepcopy(_default_doc())
    doc["activities"] = activities
    doc["relations"] = [list(r) for r in relations]
    doc["x_update_matrix"] = [[divisor] * len(doc["groups"]) for _ in doc["profiles"]]
    return parse_catalog(doc)


def year_run(catalog, model, schedule, seed=SEED):
    events, truth = generate_year(model, catalog, schedule, seed=seed)
    adaptive = run(events, catalog)
    continuous = run_continuous(events, catalog)
    return events, truth, adaptive, continuous, build_report(adaptive, continuous, truth)


@pytest.fixture(scope="session")
def decline_year(catalog, model):
    return year_run(catalog, model, DECLINE_SCHEDULE)
