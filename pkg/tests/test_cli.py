"""End-to-end CLI behavior: commands, guards, exit codes, reproducibility."""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from cflearn.cli import main
from cflearn.serialize import read_log, read_params


def write_config(path: Path, **overrides) -> Path:
    config = {
        "task": {
            "num_instances": 40,
            "k": 4,
            "d": 5,
            "seed": 7,
            "reward_noise": 0.0,
            "logger_quality": 0.6,
            "logging_mode": "deterministic",
        },
        "train": {
            "kind": "dpm-r",
            "learning_rate": 0.2,
            "epochs": 15,
            "batch_size": "full",
            "seed": 1,
            "early_stop_patience": 0,
        },
        "splits": [0.5, 0.25, 0.25],
        "split_seed": 2,
        "output_dir": str(path.parent / "out"),
    }
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        if name:
            config[section][name] = value
        else:
            config[section] = value
    path.write_text(yaml.safe_dump(config))
    return path


@pytest.fixture
def workspace(tmp_path):
    config = write_config(tmp_path / "config.yaml")
    out = tmp_path / "out"
    assert main(["generate-log", "--config", str(config)]) == 0
    return config, out


class TestGenerateLog:
    def test_writes_splits_and_truth(self, workspace):
        _, out = workspace
        assert [len(read_log(out / f"{name}.jsonl")) for name in ("train", "validation", "test")] == [20, 10, 10]
        assert (out / "truth.json").exists()

    def test_deterministic_mode_has_no_propensities(self, workspace):
        _, out = workspace
        records = (out / "train.jsonl").read_text().splitlines()[1:]
        assert all("propensity" not in json.loads(line) for line in records)

    def test_rerun_byte_identical(self, workspace, tmp_path):
        config, out = workspace
        again = tmp_path / "again"
        assert main(["generate-log", "--config", str(config), "--out", str(again)]) == 0
        for name in ("train.jsonl", "validation.jsonl", "test.jsonl", "truth.json"):
            assert (out / name).read_bytes() == (again / name).read_bytes()


class TestTrain:
    def test_trains_and_writes_outputs(self, workspace, tmp_path):
        config, out = workspace
        run = tmp_path / "run"
        code = main(
            ["train", "--config", str(config), "--log", str(out / "train.jsonl"), "--out", str(run)]
        )
        assert code == 0
        params, meta = read_params(run / "params.json")
        assert meta["kind"] == "dpm-r"
        assert (run / "trace.csv").exists()
        assert np.all(np.isfinite(params.weights))

    def test_estimator_mode_guard_named_in_error(self, workspace, tmp_path, capsys):
        config, out = workspace
        code = main(
            [
                "train",
                "--config",
                str(config),
                "--log",
                str(out / "train.jsonl"),
                "--estimator",
                "ips",
                "--out",
                str(tmp_path / "bad"),
            ]
        )
        assert code == 1
        assert "propensities" in capsys.readouterr().err

    def test_zero_epochs_returns_initialization(self, tmp_path):
        config = write_config(tmp_path / "config.yaml", **{"train.epochs": 0})
        out = tmp_path / "out"
        assert main(["generate-log", "--config", str(config)]) == 0
        run = tmp_path / "run"
        assert main(
            ["train", "--config", str(config), "--log", str(out / "train.jsonl"), "--out", str(run)]
        ) == 0
        params, _ = read_params(run / "params.json")
        np.testing.assert_array_equal(params.weights, np.zeros(5))

    def test_truth_option_fills_trace_column(self, workspace, tmp_path):
        config, out = workspace
        run = tmp_path / "run-truth"
        code = main(
            [
                "train",
                "--config",
                str(config),
                "--log",
                str(out / "train.jsonl"),
                "--truth",
                str(out / "truth.json"),
                "--out",
                str(run),
            ]
        )
        assert code == 0
        from cflearn.serialize import read_trace

        trace = read_trace(run / "trace.csv")
        assert all(r.true_reward is not None for r in trace.records)

    def test_model_kind_writes_reward_model(self, workspace, tmp_path):
        config, out = workspace
        run = tmp_path / "run-dc"
        code = main(
            [
                "train",
                "--config",
                str(config),
                "--log",
                str(out / "train.jsonl"),
                "--estimator",
                "cdc",
                "--out",
                str(run),
            ]
        )
        assert code == 0
        assert (run / "reward_model.json").exists()

    def test_rerun_byte_identical(self, workspace, tmp_path):
        config, out = workspace
        runs = []
        for name in ("r1", "r2"):
            run = tmp_path / name
            assert main(
                ["train", "--config", str(config), "--log", str(out / "train.jsonl"), "--out", str(run)]
            ) == 0
            runs.append(run)
        for artifact in ("params.json", "trace.csv"):
            assert (runs[0] / artifact).read_bytes() == (runs[1] / artifact).read_bytes()


class TestEvaluate:
    def test_report_with_truth_and_self_comparison(self, workspace, tmp_path):
        config, out = workspace
        run = tmp_path / "run"
        main(["train", "--config", str(config), "--log", str(out / "train.jsonl"), "--out", str(run)])

        # evaluating the logger's own weights: improvement must be exactly 0
        truth_payload = json.loads((out / "truth.json").read_text())
        logger_params = {
            "weights": truth_payload["logging_policy"]["weights"],
            "alpha": truth_payload["logging_policy"]["alpha"],
            "kind": "dpm-r",
        }
        (tmp_path / "logger_params.json").write_text(json.dumps(logger_params))
        report_dir = tmp_path / "report"
        code = main(
            [
                "evaluate",
                "--params",
                str(tmp_path / "logger_params.json"),
                "--log",
                str(out / "test.jsonl"),
                "--truth",
                str(out / "truth.json"),
                "--out",
                str(report_dir),
            ]
        )
        assert code == 0
        rows = (report_dir / "report.csv").read_text().splitlines()
        header = rows[0].split(",")
        values = rows[1].split(",")
        improvement = float(values[header.index("improvement")])
        assert abs(improvement) <= 1e-12

    def test_missing_files_fail(self, tmp_path):
        assert main(["evaluate", "--params", str(tmp_path / "missing.json")]) == 1


class TestChecks:
    def test_grad_check_passes(self, tmp_path, capsys):
        out = tmp_path / "gc"
        code = main(["grad-check", "--seed", "0", "--count", "10", "--out", str(out)])
        assert code == 0
        assert (out / "grad_check.csv").exists()
        assert "max rel error" in capsys.readouterr().out

    def test_grad_check_failure_exit_code(self, monkeypatch):
        from cflearn import cli
        from cflearn.gradients import GradCheckResult

        monkeypatch.setattr(
            cli,
            "run_grad_check",
            lambda **kw: [GradCheckResult("ips-dpm", 5, 0.5, 3, 0, 0)],
        )
        assert main(["grad-check", "--count", "5"]) == 2

    def test_degeneracy_probe_passes(self, tmp_path, capsys):
        out = tmp_path / "probes"
        code = main(["degeneracy-probe", "--seed", "0", "--count", "3", "--out", str(out)])
        assert code == 0
        assert (out / "probes.csv").exists()
        assert "0 violated" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["no-such-command"])
        assert excinfo.value.code == 1

    def test_unknown_config_key_exits_one(self, tmp_path, capsys):
        config = write_config(tmp_path / "config.yaml")
        data = yaml.safe_load(config.read_text())
        data["task"]["typo_key"] = 1
        config.write_text(yaml.safe_dump(data))
        assert main(["generate-log", "--config", str(config)]) == 1
        assert "typo_key" in capsys.readouterr().err
