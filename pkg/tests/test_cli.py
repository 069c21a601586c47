"""End-to-end command-line runs against the bundled configuration."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
CONFIG = REPO / "configs" / "gcw_twin.json"


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "cascadeshare.cli", *args],
        capture_output=True, text=True, cwd=cwd or REPO,
    )


@pytest.fixture(scope="module")
def optimize_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("opt")
    proc = run_cli("optimize", "--config", str(CONFIG), "--out-dir", str(out))
    assert proc.returncode == 0, proc.stderr
    return out


class TestOptimize:
    def test_final_thresholds_are_one_third(self, optimize_out):
        doc = json.loads((optimize_out / "policy.json").read_text())
        assert doc["primary"]["thresholds"][-1] == 1.0 / 3.0
        assert doc["secondary"]["final_threshold"] == 1.0 / 3.0

    def test_value_csvs_emitted(self, optimize_out):
        for i in range(4):
            assert (optimize_out / f"values_stage_{i}.csv").exists()
            assert (optimize_out / f"values2_with_stage_{i}.csv").exists()
            assert (optimize_out / f"values2_without_stage_{i}.csv").exists()

    def test_value_csv_round_trips_bit_exact(self, optimize_out):
        with open(optimize_out / "values_stage_0.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0].keys() == {"pi", "value"}
        for row in rows:
            v = float(row["value"])
            assert repr(v) == row["value"]

    def test_policy_json_serialize_parse_fixpoint(self, optimize_out):
        text = (optimize_out / "policy.json").read_text()
        doc = json.loads(text)
        again = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        assert again == text

    def test_budget_json_schema(self, optimize_out):
        doc = json.loads((optimize_out / "budget.json").read_text())
        assert set(doc) == {"lambda", "E1_mJ", "E2_mJ", "baseline_mJ", "total_mJ", "slack"}
        assert doc["baseline_mJ"] == pytest.approx(0.1152)

    def test_robustified_models_round_trip(self, optimize_out):
        from cascadeshare.robust import stage_model_from_json

        doc = json.loads((optimize_out / "models.json").read_text())
        assert set(doc) == {"primary", "secondary", "shared"}
        for stage_doc in doc["primary"]:
            assert {"nominal", "uncertainty", "cost_mJ", "robust", "breakpoints"} <= set(stage_doc)
            stage = stage_model_from_json(stage_doc)
            assert stage.robust is not None and stage.breakpoints is not None


class TestSimulate:
    def test_reports_are_byte_identical_for_fixed_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            proc = run_cli("simulate", "--config", str(CONFIG), "--trials", "5000",
                           "--seed", "7", "--out-dir", str(out))
            assert proc.returncode == 0, proc.stderr
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_trials_dump(self, tmp_path):
        proc = run_cli("simulate", "--config", str(CONFIG), "--trials", "50",
                       "--seed", "1", "--dump-trials", "--out-dir", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        with open(tmp_path / "trials.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 50
        assert {"trial", "x1", "x2", "actions1", "actions2", "xhat1", "xhat2",
                "stop_stage1", "stop_stage2", "energy_mJ"} == set(rows[0])


class TestCheck:
    def test_twin_config_passes_sharing_condition(self, tmp_path):
        proc = run_cli("check", "--config", str(CONFIG), "--out-dir", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        doc = json.loads(proc.stdout)
        assert doc["sharing_all_pass"] is True
        assert all(s["passes"] for s in doc["sharing"])
        assert len(doc["sharing"]) == 3


class TestTwinAndSweep:
    def test_twin_report(self, tmp_path):
        proc = run_cli("twin", "--config", str(CONFIG), "--out-dir", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        rows = json.loads((tmp_path / "report.json").read_text())["rows"]
        assert [r["prior"] for r in rows] == [0.05, 0.10, 0.15, 0.20]
        for r in rows:
            saving = r["saving"] if r["saving"] is not None else float("inf")
            assert saving > 1.0
            assert r["risk2_shared"] <= r["risk2_ablated"] + 1e-12
        assert (tmp_path / "twin.csv").exists()

    def test_sweep_csv(self, tmp_path):
        proc = run_cli("sweep", "--config", str(CONFIG), "--priors", "0.1,0.2",
                       "--out-dir", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        with open(tmp_path / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert "miss1" in rows[0] and "risk2" in rows[0]


class TestEstimate:
    def test_pmf_from_stream(self, tmp_path):
        stream = tmp_path / "scores.csv"
        with open(stream, "w", newline="\n") as fh:
            w = csv.writer(fh)
            w.writerow(["score", "label"])
            for i in range(50):
                w.writerow([i / 50.0, int(i >= 25)])
        proc = run_cli("estimate", str(stream), "--bins", "5", "--out-dir", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        doc = json.loads((tmp_path / "scores_pmf.json").read_text())
        assert doc["bins"] == 5
        assert len(doc["edges"]) == 6
        assert abs(sum(doc["p0"]) - 1.0) < 1e-10

    def test_bad_header_is_config_error(self, tmp_path):
        stream = tmp_path / "bad.csv"
        stream.write_text("x,y\n1,0\n")
        proc = run_cli("estimate", str(stream), "--out-dir", str(tmp_path))
        assert proc.returncode == 2
        err = json.loads(proc.stderr)
        assert err["error"] == "config_error"


class TestErrorPaths:
    def test_missing_config_exits_2(self, tmp_path):
        proc = run_cli("optimize", "--config", str(tmp_path / "nope.json"),
                       "--out-dir", str(tmp_path))
        assert proc.returncode == 2
        assert json.loads(proc.stderr)["error"] == "config_error"

    def test_both_lambda_and_budget_rejected(self, tmp_path):
        doc = json.loads(CONFIG.read_text())
        doc["budget"] = {"budget_mJ": 50.0, "baseline_mJ": 0.1152}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        proc = run_cli("optimize", "--config", str(bad), "--out-dir", str(tmp_path))
        assert proc.returncode == 2

    def test_degenerate_uncertainty_exits_3(self, tmp_path):
        doc = json.loads(CONFIG.read_text())
        doc["primary"]["stages"][0]["uncertainty"] = {
            "eps0": 0.45, "eps1": 0.45, "nu0": 0.45, "nu1": 0.45}
        del doc["secondary"]
        bad = tmp_path / "degen.json"
        bad.write_text(json.dumps(doc))
        proc = run_cli("optimize", "--config", str(bad), "--out-dir", str(tmp_path))
        assert proc.returncode == 3
        assert json.loads(proc.stderr)["error"] == "solver_failure"

    def test_enumeration_cap_exits_4(self, tmp_path):
        proc = run_cli("check", "--config", str(CONFIG), "--allow-early-positive",
                       "--out-dir", str(tmp_path))
        assert proc.returncode == 4
        assert json.loads(proc.stderr)["error"] == "enumeration_cap"

    def test_bracket_failure_exits_5(self, tmp_path):
        doc = json.loads(CONFIG.read_text())
        del doc["lambda"]
        doc["budget"] = {"budget_mJ": 1.0, "baseline_mJ": 0.9,
                         "lambda_bracket": [0.0, 1e-9]}
        del doc["secondary"]
        bad = tmp_path / "tight.json"
        bad.write_text(json.dumps(doc))
        proc = run_cli("optimize", "--config", str(bad), "--out-dir", str(tmp_path))
        assert proc.returncode == 5
        assert json.loads(proc.stderr)["error"] == "bracket_failure"

    def test_unknown_flag_is_an_error(self, tmp_path):
        proc = run_cli("optimize", "--config", str(CONFIG), "--frobnicate")
        assert proc.returncode == 2

    def test_help_lists_documented_flags(self):
        proc = run_cli("simulate", "--help")
        assert proc.returncode == 0
        for flag in ("--config", "--lambda", "--budget-mJ", "--grid", "--trials",
                     "--seed", "--out-dir", "--no-sharing", "--dump-trials"):
            assert flag in proc.stdout
        proc2 = run_cli("check", "--help")
        assert "--allow-early-positive" in proc2.stdout
