import json
import subprocess
import sys

import pytest

from conftest import small_plan
from liftbid.cli import main
from liftbid.config import resolved_text
from liftbid.harness.experiment import run_ab_experiment, run_logging_campaign, train_bundles
from liftbid.harness.metrics import compute_metrics
from liftbid.learning import LossMode

SEED = 3
MODES = [m.value for m in LossMode]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    plan = small_plan()
    cfg = root / "small.config"
    cfg.write_text(resolved_text(plan))
    logs, run = root / "logs", root / "run"
    assert main(["simulate-log", str(cfg), "--seed", str(SEED), "--out", str(logs)]) == 0
    for mode in MODES:
        assert main(["train", str(cfg), "--logs", str(logs), "--mode", mode]) == 0
    assert main(["experiment", str(cfg), "--bundles-dir", str(logs / "bundles"),
                 "--seed", str(SEED), "--out", str(run)]) == 0
    return plan, cfg, logs, run


def test_pipeline_artifacts(pipeline):
    _, _, logs, run = pipeline
    for name in ("impressions.jsonl", "labels.csv", "users.csv", "pctr.json"):
        assert (logs / "logging" / name).exists()
    for mode in MODES:
        assert (logs / "bundles" / f"{mode}.json").exists()
    for name in ("report.csv", "report.json", "pacing.csv", "phi_bins.csv", "config.resolved", "run.json"):
        assert (run / name).exists()
    report = json.loads((run / "report.json").read_text())
    assert all(v[0] == 1.0 for v in report["normalized"]["baseline"].values())


def test_train_twice_is_byte_identical(pipeline, tmp_path):
    _, cfg, logs, _ = pipeline
    for mode in MODES:
        out = tmp_path / f"{mode}.json"
        assert main(["train", str(cfg), "--logs", str(logs), "--mode", mode, "--out", str(out)]) == 0
        assert out.read_bytes() == (logs / "bundles" / f"{mode}.json").read_bytes()


def test_report_recompute_is_byte_identical(pipeline, tmp_path):
    _, _, _, run = pipeline
    before = {f: (run / f).read_bytes() for f in ("report.csv", "report.json")}
    assert main(["report", "--run-dir", str(run), "--format", "csv"]) == 0
    assert main(["report", "--run-dir", str(run), "--format", "json"]) == 0
    assert {f: (run / f).read_bytes() for f in before} == before


def test_cli_matches_in_process_pipeline(pipeline):
    plan, _, _, run = pipeline
    campaign = run_logging_campaign(plan, SEED)
    bundles = train_bundles(campaign, plan, plan.seed)
    report = compute_metrics(run_ab_experiment(plan, bundles, SEED), plan.cpc)
    assert json.loads((run / "report.json").read_text()) == json.loads(json.dumps(report.to_dict()))


def test_missing_key_exits_nonzero_with_key_and_line(tmp_path, capsys):
    text = resolved_text(small_plan()).replace("  kappa: 0.5\n", "")
    cfg = tmp_path / "bad.config"
    cfg.write_text(text)
    assert main(["simulate-log", str(cfg), "--out", str(tmp_path / "o")]) != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["key"] == "pacing.kappa"
    assert err["line"] == text.splitlines().index("pacing:") + 1
    assert not (tmp_path / "o").exists()


def test_usage_errors(tmp_path, capsys):
    cfg = tmp_path / "c.config"
    cfg.write_text(resolved_text(small_plan()))
    assert main(["train", str(cfg), "--logs", str(tmp_path), "--mode", "erm"]) == 2
    assert main(["experiment", str(cfg), "--bundles-dir", str(tmp_path)]) == 2
    assert main(["report", "--run-dir", str(tmp_path)]) == 2
    errs = [json.loads(line) for line in capsys.readouterr().err.strip().splitlines()]
    assert all(e["error"] == "usage" for e in errs)


def test_default_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LIFTBID_OUT", str(tmp_path / "root"))
    cfg = tmp_path / "tiny.config"
    cfg.write_text(resolved_text(small_plan(population=500, logging_days=1)))
    assert main(["simulate-log", str(cfg), "--seed", "4"]) == 0
    assert (tmp_path / "root" / "tiny-seed4" / "logging" / "labels.csv").exists()


def test_console_entry_point_runs():
    out = subprocess.run([sys.executable, "-m", "liftbid.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate-log" in out.stdout
