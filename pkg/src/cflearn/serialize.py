"""Bit-exact file formats for logs, policies, models, traces, and reports.

Logs are line-delimited JSON: a one-line header carrying the mode, then one
self-describing record per tuple with its embedded candidate feature matrix.
All floats are written as Python's shortest round-trip decimals, so writing
and re-reading reproduces every value bit for bit, and identical inputs
always produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .domain import Instance, Log, LoggedTuple, Mode, PolicyParams
from .reward import RewardModel
from .simulator import GroundTruth, LoggingPolicy
from .training import EpochRecord, TrainTrace


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _matrix(values) -> list[list[float]]:
    arr = np.asarray(values, dtype=float)
    return [[float(v) for v in row] for row in arr]


def write_log(path: str | Path, log: Log) -> None:
    lines = [json.dumps({"mode": log.mode.value})]
    for t in log.tuples:
        record = {
            "id": t.instance.id,
            "features": _matrix(t.instance.candidates),
            "chosen": int(t.chosen),
            "reward": float(t.reward),
        }
        if t.propensity is not None:
            record["propensity"] = float(t.propensity)
        lines.append(json.dumps(record))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_log(path: str | Path) -> Log:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty log file")
    header = json.loads(lines[0])
    mode = Mode(header["mode"])
    tuples = []
    for line in lines[1:]:
        record = json.loads(line)
        instance = Instance(id=record["id"], candidates=np.array(record["features"], dtype=float))
        tuples.append(
            LoggedTuple(
                instance=instance,
                chosen=int(record["chosen"]),
                reward=float(record["reward"]),
                propensity=record.get("propensity"),
            )
        )
    return Log(tuple(tuples), mode)


def write_truth(path: str | Path, truth: GroundTruth, logging_policy: LoggingPolicy) -> None:
    payload = {
        "reward_weights": _floats(truth.reward_weights),
        "rewards": {key: _floats(vals) for key, vals in truth.rewards.items()},
        "logging_policy": {
            "weights": _floats(logging_policy.params.weights),
            "alpha": float(logging_policy.params.alpha),
            "mode": logging_policy.mode.value,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_truth(path: str | Path) -> tuple[GroundTruth, LoggingPolicy]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    truth = GroundTruth(
        reward_weights=np.array(payload["reward_weights"], dtype=float),
        rewards={key: np.array(vals, dtype=float) for key, vals in payload["rewards"].items()},
    )
    logger = payload["logging_policy"]
    policy = LoggingPolicy(
        params=PolicyParams(np.array(logger["weights"], dtype=float), alpha=logger["alpha"]),
        mode=Mode(logger["mode"]),
    )
    return truth, policy


def write_params(path: str | Path, params: PolicyParams, extra: dict | None = None) -> None:
    payload = {"weights": _floats(params.weights), "alpha": float(params.alpha)}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_params(path: str | Path) -> tuple[PolicyParams, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    params = PolicyParams(np.array(payload.pop("weights"), dtype=float), alpha=payload.pop("alpha"))
    return params, payload


def write_reward_model(path: str | Path, model: RewardModel) -> None:
    payload = {
        "weights": _floats(model.weights),
        "intercept": float(model.intercept),
        "ridge_lambda": float(model.ridge_lambda),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_reward_model(path: str | Path) -> RewardModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return RewardModel(
        weights=np.array(payload["weights"], dtype=float),
        intercept=float(payload["intercept"]),
        ridge_lambda=float(payload["ridge_lambda"]),
    )


TRACE_COLUMNS = ["epoch", "train_value", "validation_value", "true_reward", "mass_on_dmax", "grad_norm"]


def write_trace(path: str | Path, trace: TrainTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for rec in trace.records:
            writer.writerow(
                [
                    rec.epoch,
                    repr(rec.train_value),
                    repr(rec.validation_value),
                    "" if rec.true_reward is None else repr(rec.true_reward),
                    repr(rec.mass_on_dmax),
                    repr(rec.grad_norm),
                ]
            )


def read_trace(path: str | Path) -> TrainTrace:
    trace = TrainTrace()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {header}")
        for row in reader:
            trace.records.append(
                EpochRecord(
                    epoch=int(row[0]),
                    train_value=float(row[1]),
                    validation_value=float(row[2]),
                    true_reward=None if row[3] == "" else float(row[3]),
                    mass_on_dmax=float(row[4]),
                    grad_norm=float(row[5]),
                )
            )
    return trace


def write_csv(path: str | Path, columns: list[str], rows: list[list]) -> None:
    """Generic report writer; floats are written as shortest round-trip decimals."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                ["" if v is None else repr(v) if isinstance(v, float) else v for v in row]
            )
