"""End-to-end CLI behavior: outputs, formats, exit codes, determinism."""

import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from panel_causal import (
    EstimatorConfig,
    ModelSpec,
    cluster_bootstrap,
    estimate_did,
    estimate_or,
    load_csv,
    parse_table,
    write_csv,
)
from panel_causal.cli import run

from helpers import make_dataset


def _simulate(tmp_path, name="panel.csv", scenario="HOM", n=120, seed=0, replicate=0):
    out = tmp_path / name
    rc = run([
        "simulate", "--scenario", scenario, "--n", str(n),
        "--seed", str(seed), "--replicate", str(replicate),
        "--output", str(out),
    ])
    assert rc == 0
    return out


def _text_payload(text):
    payload = {}
    for line in text.strip().split("\n"):
        key, _, value = line.partition(" ")
        payload[key] = value
    return payload


class TestParsing:
    def test_version(self, capsys):
        assert run(["--version"]) == 0
        assert "panel-causal" in capsys.readouterr().out

    def test_missing_command_is_usage_error(self, capsys):
        assert run([]) == 2

    def test_unknown_choice_is_usage_error(self, tmp_path, capsys):
        rc = run(["simulate", "--scenario", "LONDON",
                  "--output", str(tmp_path / "x.csv")])
        assert rc == 2


class TestSimulate:
    def test_writes_a_loadable_panel(self, tmp_path):
        path = _simulate(tmp_path, n=150, seed=4)
        data = load_csv(str(path))
        assert data.n == 150
        assert data.covariate_names == ("x1", "x2", "v")

    def test_bytes_depend_on_seed_and_replicate_only(self, tmp_path):
        a = _simulate(tmp_path, "a.csv", seed=1).read_bytes()
        b = _simulate(tmp_path, "b.csv", seed=1).read_bytes()
        c = _simulate(tmp_path, "c.csv", seed=1, replicate=3).read_bytes()
        d = _simulate(tmp_path, "d.csv", seed=2).read_bytes()
        assert a == b
        assert a != c
        assert a != d


class TestEstimate:
    def test_did_text_output(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "did",
                  "--estimand", "att"])
        assert rc == 0
        payload = _text_payload(capsys.readouterr().out)
        assert payload["method"] == "DID"
        assert payload["estimand"] == "ATT"
        want = estimate_did(load_csv(str(path))).value
        assert float(payload["value"]) == want

    def test_did_does_not_answer_ate(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "did",
                  "--estimand", "ate"])
        assert rc == 2
        assert capsys.readouterr().err.startswith("ERROR:InvalidArgument:")

    def test_inline_covariates_build_a_main_effects_model(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "or",
                  "--covariates", "x1,x2"])
        assert rc == 0
        payload = _text_payload(capsys.readouterr().out)
        data = load_csv(str(path))
        spec = ModelSpec(outcome_terms=("1", "treat", "x1", "x2"))
        assert float(payload["value"]) == estimate_or(data, spec)["ATE"].value

    def test_json_format_and_relative_effect(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "did",
                  "--estimand", "att", "--relative", "--format", "json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        data = load_csv(str(path))
        assert payload["relative_pct"] == pytest.approx(
            100.0 * payload["value"] / float(np.mean(data.y0)), abs=1e-12
        )

    def test_spec_file_and_inline_flags_are_exclusive(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        spec = tmp_path / "spec.json"
        spec.write_text('{"outcome_terms": ["1", "treat", "x1"]}')
        rc = run(["estimate", "--input", str(path), "--method", "or",
                  "--spec", str(spec), "--covariates", "x1"])
        assert rc == 2
        assert capsys.readouterr().err.startswith("ERROR:InvalidArgument:")

    def test_inline_flags_reject_interactions(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "or",
                  "--covariates", "x1:treat"])
        assert rc == 2
        assert "use --spec" in capsys.readouterr().err

    def test_spec_file_supports_interactions(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "outcome_terms": ["1", "time", "treat", "x1", "x1:treat"],
            "random_effect": "unit_intercept",
        }))
        rc = run(["estimate", "--input", str(path), "--method", "glmm",
                  "--estimand", "att", "--spec", str(spec)])
        assert rc == 0
        assert "value" in _text_payload(capsys.readouterr().out)

    def test_broken_spec_file(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        spec = tmp_path / "spec.json"
        spec.write_text("{not json")
        rc = run(["estimate", "--input", str(path), "--method", "or",
                  "--spec", str(spec)])
        assert rc == 2
        assert capsys.readouterr().err.startswith("ERROR:InvalidArgument:")

    def test_missing_outcome_model(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "glmm"])
        assert rc == 2
        assert "outcome model" in capsys.readouterr().err

    def test_missing_input_file_is_io_failure(self, tmp_path, capsys):
        rc = run(["estimate", "--input", str(tmp_path / "absent.csv"),
                  "--method", "did", "--estimand", "att"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("ERROR:IO:")

    def test_empty_covariate_list_is_a_validation_problem(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["estimate", "--input", str(path), "--method", "glmm",
                  "--covariates", ""])
        assert rc == 2
        assert capsys.readouterr().err.startswith("ERROR:InvalidArgument:")

    def test_computation_failure_exits_one(self, tmp_path, capsys):
        n = 30
        d = np.repeat([1, 0], n // 2)
        s = d - 0.5  # separates the classes perfectly
        rng_y = np.linspace(0.0, 1.0, n)
        data = make_dataset(rng_y, rng_y + d, d, covariates=[s], names=("s",))
        path = tmp_path / "separated.csv"
        write_csv(data, str(path))
        rc = run(["estimate", "--input", str(path), "--method", "ipw",
                  "--ps-covariates", "s"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("ERROR:Separation:")


class TestBootstrap:
    def test_matches_library_call(self, tmp_path, capsys):
        path = _simulate(tmp_path, n=90)
        rc = run(["bootstrap", "--input", str(path), "--method", "did",
                  "--estimand", "att", "--B", "25", "--seed", "11",
                  "--format", "json", "--threads", "1"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        data = load_csv(str(path))
        cfg = EstimatorConfig(method="DID", estimand="ATT")
        res = cluster_bootstrap(data, cfg, B=25, seed=11)
        assert payload["point"] == res.point
        assert payload["boot_mean"] == res.boot_mean
        assert payload["se"] == res.se
        assert payload["ci_lower"] == res.ci_lower
        assert payload["ci_upper"] == res.ci_upper
        assert payload["B"] == 25
        assert payload["n_failed"] == res.n_failed

    def test_threads_leave_bytes_unchanged(self, tmp_path):
        path = _simulate(tmp_path, n=90)
        outs = []
        for tag, threads in (("t1", "1"), ("t3", "3")):
            out = tmp_path / f"{tag}.json"
            rc = run(["bootstrap", "--input", str(path), "--method", "did",
                      "--estimand", "att", "--B", "30", "--seed", "2",
                      "--format", "json", "--threads", threads,
                      "--output", str(out)])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestDiagnose:
    def test_balance_only(self, tmp_path, capsys):
        path = _simulate(tmp_path, n=200)
        rc = run(["diagnose", "--input", str(path), "--check", "balance",
                  "--ps-covariates", "x1,x2,v"])
        assert rc == 0
        payload = _text_payload(capsys.readouterr().out)
        assert payload["balance.balanced"] in ("true", "false")
        assert "dr_test.z_ps" not in payload

    def test_dr_test_needs_an_outcome_model(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["diagnose", "--input", str(path), "--check", "dr-test",
                  "--ps-covariates", "x1,x2,v"])
        assert rc == 2
        assert "outcome model" in capsys.readouterr().err

    def test_eliminate_reports_term_lists(self, tmp_path, capsys):
        path = _simulate(tmp_path, n=200, seed=3)
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "outcome_terms": ["1", "time", "treat", "x1", "x2"],
            "ps_terms": ["1", "x1", "x2", "v"],
        }))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = run(["diagnose", "--input", str(path), "--check", "eliminate",
                      "--spec", str(spec)])
        assert rc == 0
        payload = _text_payload(capsys.readouterr().out)
        kept = payload["eliminate.outcome_terms"].split(",")
        assert kept[:3] == ["1", "time", "treat"]
        assert payload["eliminate.ps_terms"].startswith("1")

    def test_needs_some_model(self, tmp_path, capsys):
        path = _simulate(tmp_path)
        rc = run(["diagnose", "--input", str(path)])
        assert rc == 2


class TestStudy:
    def test_text_shows_both_estimands(self, tmp_path, capsys):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = run(["study", "--scenario", "HOM", "--n", "80", "--reps", "2",
                      "--seed", "0", "--threads", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "estimand ATE" in out and "estimand ATT" in out
        assert "glmm-full" in out and "ipwdid-reduced" in out

    def test_csv_round_trips(self, tmp_path):
        out = tmp_path / "study.csv"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = run(["study", "--scenario", "HOM", "--n", "80", "--reps", "2",
                      "--seed", "0", "--format", "csv", "--threads", "2",
                      "--output", str(out)])
        assert rc == 0
        results = parse_table(out.read_text())
        assert len(results) == 1
        assert results[0].scenario_id == "HOM"
        assert results[0].R == 2
        assert len(results[0].cells) == 24  # 12 suite entries x 2 estimands

    def test_json_is_valid(self, tmp_path, capsys):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = run(["study", "--scenario", "HOM", "--n", "80", "--reps", "2",
                      "--seed", "1", "--format", "json", "--threads", "1"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["scenario_id"] == "HOM"
        assert isinstance(payload["cells"], list)


class TestEntryPoint:
    def test_installed_script_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "panel_causal.cli", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "panel-causal" in proc.stdout
