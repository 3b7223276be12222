import json
import subprocess
import sys

import pytest

from adlmon.cli import CONFIG_ENV, RunConfig, load_config, main
from adlmon.evaluation import SERIES
from adlmon.scenario import check_scenario, read_ground_truth, read_scenario

DAY = 86_400
RUN_FILES = ["scenario.csv", "ground_truth.csv", "adaptive/detections.csv",
             "adaptive/assessments.csv", "report.json", "comparison.csv"]


def short_config(tmp_path, **extra):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"horizon_s": 60 * DAY, "schedule": [[1, 1, 1], [2, 12, 6]], **extra}))
    return str(p)


def test_generate_writes_parseable_files(tmp_path):
    out = tmp_path / "run"
    assert main(["generate", "--config", short_config(tmp_path), "--out", str(out), "--quiet"]) == 0
    events = read_scenario(out / "scenario.csv")
    check_scenario(events)
    assert events[-1].end_s <= 60 * DAY
    read_ground_truth(out / "ground_truth.csv")
    assert json.loads((out / "config.json").read_text())["seed"] == 42


def test_missing_matrices_path(tmp_path, capsys):
    cfg = short_config(tmp_path, matrices="nope.json")
    assert main(["generate", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    err = capsys.readouterr().err.strip()
    assert "nope.json" in err and "matrices" in err
    assert len(err.splitlines()) == 1


def test_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("adlmon: error:")


def test_unknown_config_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"sead": 1}')
    with pytest.raises(ValueError, match="unknown keys"):
        load_config(p)


def test_bad_config_values():
    with pytest.raises(ValueError):
        RunConfig(horizon_s=0)
    with pytest.raises(ValueError):
        RunConfig(seed=-1)


def test_usage_error_exit_code(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run", "--mode", "sometimes", "--out", str(tmp_path)])
    assert e.value.code == 1


def test_adaptive_only_run(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--mode", "adaptive", "--config", short_config(tmp_path),
                 "--out", str(out), "--quiet"]) == 0
    assert (out / "adaptive" / "ledger.csv").is_file()
    assert (out / "adaptive" / "ledger_activities.csv").is_file()
    assert not (out / "report.json").exists()
    assert not (out / "continuous").exists()


def test_report_requires_completed_run(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 2
    assert "not a completed run directory" in capsys.readouterr().err


def test_run_then_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", short_config(tmp_path), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert 0 <= summary["energy_saving_pct"] <= 100
    assert main(["report", "--config", short_config(tmp_path), "--out", str(out), "--quiet"]) == 0
    names = sorted(p.name for p in (out / "series").iterdir())
    assert names == sorted([f"{n}.csv" for n in SERIES] + ["summary.json"])
    # the rebuilt report agrees with the one written by run
    rebuilt = json.loads((out / "series" / "summary.json").read_text())
    assert rebuilt["energy_saving_pct"] == pytest.approx(summary["energy_saving_pct"], abs=1e-6)


def test_rerun_byte_identical(tmp_path):
    cfg = short_config(tmp_path)
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in RUN_FILES:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_seed_override_changes_scenario(tmp_path):
    cfg = short_config(tmp_path)
    main(["generate", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"])
    main(["generate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7", "--quiet"])
    assert (tmp_path / "a" / "scenario.csv").read_bytes() != (tmp_path / "b" / "scenario.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "config.json").read_text())["seed"] == 7


def test_explicit_anomalies(tmp_path):
    cfg = short_config(tmp_path, anomalies=[{"day": 10, "activity_id": "eating", "kind": "MissingFrequency"}])
    out = tmp_path / "run"
    assert main(["generate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    truth = read_ground_truth(out / "ground_truth.csv")
    assert [(g.t_s // DAY, g.activity_id, g.kind) for g in truth] == [(10, "eating", "MissingFrequency")]


def test_config_from_environment(tmp_path):
    cfg = short_config(tmp_path, seed=5)
    out = tmp_path / "run"
    proc = subprocess.run([sys.executable, "-m", "adlmon.cli", "generate", "--out", str(out), "--quiet"],
                          env={CONFIG_ENV: cfg, "PATH": ""}, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((out / "config.json").read_text())["seed"] == 5
