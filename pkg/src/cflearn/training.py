"""Gradient-ascent training over any counterfactual objective.

Training maximizes the configured estimator on the train log with the
update ``w <- w + lr * grad``, evaluates the same objective on a held-out
validation log after every epoch, and optionally stops early when the
validation value has not improved for a configured number of epochs.  The
true expected reward never steers training; it is recorded in the trace
only when a simulator ground truth is supplied, for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _packed
from .domain import Instance, Log, PolicyParams, policy_probs
from .errors import ConfigurationError, DegenerateSupportError
from .estimators import (
    EstimatorKind,
    check_mode,
    diagnostics,
    objective_value,
)
from .gradients import (
    doubly_controlled_terms,
    ips_dpm_terms,
    reweighted_terms,
)
from .reward import RewardModel, estimate_c_hat, fit_reward_model


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    ``batch_size`` is a tuple count or "full".  ``normalize`` controls where
    self-normalized weights are renormalized during minibatch steps: within
    the batch ("batch") or against the full train log ("full").  ``c_refresh``
    controls how often the control scalar of the cDC/cDR objectives is
    re-estimated, since it depends on the current weights.
    """

    kind: EstimatorKind
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int | str = "full"
    seed: int = 0
    early_stop_patience: int = 0
    c_refresh: str = "epoch"  # "epoch" | "once"
    ridge_lambda: float = 1e-3
    normalize: str = "batch"  # "batch" | "full"
    init: str = "zeros"  # "zeros" | "gaussian"
    init_sigma: float = 0.01
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.kind, str):
            self.kind = EstimatorKind(self.kind)
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.early_stop_patience < 0:
            raise ValueError(f"early_stop_patience must be non-negative, got {self.early_stop_patience}")
        if self.batch_size != "full" and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ValueError(f'batch_size must be a positive integer or "full", got {self.batch_size}')
        if self.c_refresh not in ("epoch", "once"):
            raise ValueError(f'c_refresh must be "epoch" or "once", got {self.c_refresh}')
        if self.normalize not in ("batch", "full"):
            raise ValueError(f'normalize must be "batch" or "full", got {self.normalize}')
        if self.init not in ("zeros", "gaussian"):
            raise ValueError(f'init must be "zeros" or "gaussian", got {self.init}')
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be non-negative, got {self.ridge_lambda}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_value: float
    validation_value: float
    true_reward: float | None
    mass_on_dmax: float
    grad_norm: float


@dataclass
class TrainTrace:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False
    halted: str | None = None  # set when a degenerate-support error aborted training


def initial_params(config: TrainConfig, dim: int) -> PolicyParams:
    """Starting weights: zeros (uniform policy) or a small seeded Gaussian."""
    if config.init == "zeros":
        weights = np.zeros(dim)
    else:
        weights = np.random.default_rng(config.seed).standard_normal(dim) * config.init_sigma
    return PolicyParams(weights, alpha=config.alpha)


def _batches(rng: np.random.Generator, n: int, batch_size: int) -> list[np.ndarray]:
    if batch_size >= n:
        return [np.arange(n)]
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def _gradient_terms(
    kind: EstimatorKind,
    params: PolicyParams,
    packed: _packed.PackedLog,
    model: RewardModel | None,
    c_hat: float,
) -> np.ndarray:
    if kind.uses_reward_model:
        return doubly_controlled_terms(params, packed, model, c_hat)
    if kind.reweighted:
        return reweighted_terms(params, packed)
    return ips_dpm_terms(params, packed)


def _batch_gradient(
    config: TrainConfig,
    params: PolicyParams,
    packed: _packed.PackedLog,
    idx: np.ndarray,
    model: RewardModel | None,
    c_hat: float,
) -> np.ndarray:
    if idx.size == packed.n:
        return _gradient_terms(config.kind, params, packed, model, c_hat).mean(axis=0)
    if config.normalize == "batch":
        sub = packed.subset(idx)
        return _gradient_terms(config.kind, params, sub, model, c_hat).mean(axis=0)
    terms = _gradient_terms(config.kind, params, packed, model, c_hat)
    return terms[idx].mean(axis=0)


def train(
    config: TrainConfig,
    train_log: Log,
    validation_log: Log,
    initial: PolicyParams | None = None,
    truth=None,
) -> tuple[PolicyParams, TrainTrace]:
    """Run gradient ascent; return the final (or best-validation) params and trace.

    Fully deterministic given the config: the only randomness is batch
    shuffling (and optionally the Gaussian init) from the config seed.  A
    degenerate-support error during an epoch is recorded on the trace and
    training halts with the best parameters seen so far.
    """
    check_mode(config.kind, train_log)
    check_mode(config.kind, validation_log)
    if len(train_log.tuples) == 0:
        raise ValueError("train log is empty")
    packed = _packed.get(train_log)
    n = packed.n
    batch_size = n if config.batch_size == "full" else int(config.batch_size)
    if batch_size > n:
        raise ConfigurationError(f"batch_size {batch_size} exceeds log size {n}")

    params = initial if initial is not None else initial_params(config, packed.dim)
    if params.dim != packed.dim:
        raise ConfigurationError(
            f"initial weight dimension {params.dim} does not match features ({packed.dim})"
        )

    model = None
    if config.kind.uses_reward_model:
        model = fit_reward_model(train_log, config.ridge_lambda)

    rng = np.random.default_rng(config.seed)
    trace = TrainTrace()
    truth_instances = [t.instance for t in train_log.tuples] if truth is not None else None

    best_value = -np.inf
    best_params = params
    stale = 0
    c_hat = 1.0

    for epoch in range(1, config.epochs + 1):
        try:
            if config.kind.estimates_control and (epoch == 1 or config.c_refresh == "epoch"):
                c_hat = estimate_c_hat(params, train_log, model).c_hat
            for idx in _batches(rng, n, batch_size):
                step = _batch_gradient(config, params, packed, idx, model, c_hat)
                params = PolicyParams(params.weights + config.learning_rate * step, params.alpha)

            train_value = objective_value(config.kind, params, train_log, model, c_hat)
            validation_value = objective_value(config.kind, params, validation_log, model, c_hat)
            diag = diagnostics(params, train_log)
            grad_norm = float(
                np.linalg.norm(_gradient_terms(config.kind, params, packed, model, c_hat).mean(axis=0))
            )
        except DegenerateSupportError as err:
            trace.halted = str(err)
            break

        true_reward = (
            evaluate_truth(params, truth_instances, truth) if truth is not None else None
        )
        trace.records.append(
            EpochRecord(
                epoch=epoch,
                train_value=train_value,
                validation_value=validation_value,
                true_reward=true_reward,
                mass_on_dmax=diag.mass_on_dmax,
                grad_norm=grad_norm,
            )
        )

        if validation_value > best_value:
            best_value = validation_value
            best_params = params
            trace.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if config.early_stop_patience > 0 and stale >= config.early_stop_patience:
                trace.stopped_early = True
                break

    # best_params starts at the initial params, so a halt before any epoch
    # completes hands back the starting point, not a half-stepped state
    if trace.halted is not None or config.early_stop_patience > 0:
        return best_params, trace
    return params, trace


def evaluate_truth(params: PolicyParams, instances: list[Instance], truth) -> float:
    """Exact expected true reward of the policy by full enumeration.

    ``truth`` is any callable mapping an instance to its per-candidate true
    rewards (a :class:`~cflearn.simulator.GroundTruth` qualifies).
    """
    total = 0.0
    for inst in instances:
        total += float(policy_probs(params, inst) @ np.asarray(truth(inst), dtype=float))
    return total / len(instances)
