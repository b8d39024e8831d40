"""Executable probes of the estimators' degenerate maximizers.

The plain importance-weighted value is maximized by raising every logged
output to probability 1, regardless of its reward.  The self-normalized
value is maximized by putting positive probability on at least one tuple
with the maximal logged reward and zero on everything else, so training it
without a brake drives all normalized weight onto the max-reward tuples.

The probes test these statements exactly as quantified: over raw per-tuple
probability assignments, decoupled from any parametric policy.  A separate
collapse run shows parametric softmax training approaching the same fixed
point, and early stopping interrupting it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import Log, Mode
from .errors import DegenerateSupportError
from .estimators import dmax_mask
from .simulator import TaskSpec, generate_task, roll_log
from .training import TrainConfig, TrainTrace, train

DEGENERATE_VALUE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DmaxPartition:
    """Tuple indices attaining the maximal logged reward, and the rest."""

    dmax_indices: np.ndarray
    rest_indices: np.ndarray
    delta_max: float


@dataclass(frozen=True)
class ProbeResult:
    theorem: str
    holds: bool
    skipped: bool = False
    reason: str = ""
    reference_value: float | None = None  # value at the degenerate maximizer
    worst_challenger: float | None = None  # highest value any challenger reached
    witness: str = ""


def partition_dmax(log: Log) -> DmaxPartition:
    """Exact-equality partition of the log by maximal reward."""
    if len(log.tuples) == 0:
        raise ValueError("log is empty")
    rewards = np.array([t.reward for t in log.tuples])
    mask = dmax_mask(rewards)
    return DmaxPartition(
        dmax_indices=np.nonzero(mask)[0],
        rest_indices=np.nonzero(~mask)[0],
        delta_max=float(rewards.max()),
    )


def _log_arrays(log: Log) -> tuple[np.ndarray, np.ndarray]:
    rewards = np.array([t.reward for t in log.tuples])
    if log.mode is Mode.STOCHASTIC:
        propensities = np.array([t.propensity for t in log.tuples])
    else:
        propensities = np.ones(len(log.tuples))
    return rewards, propensities


def assignment_value(assignment: np.ndarray, log: Log) -> float:
    """Plain importance-weighted value of a raw probability assignment:
    (1/n) sum_t delta_t pi_t / mu_t."""
    rewards, propensities = _log_arrays(log)
    assignment = np.asarray(assignment, dtype=float)
    return float((rewards * assignment / propensities).mean())


def assignment_value_reweighted(assignment: np.ndarray, log: Log) -> float:
    """Self-normalized value of a raw probability assignment:
    sum(delta pi/mu) / sum(pi/mu)."""
    rewards, propensities = _log_arrays(log)
    weights = np.asarray(assignment, dtype=float) / propensities
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateSupportError("assignment puts zero mass on every tuple")
    return float((rewards * weights).sum() / total)


def probe_theorem1(log: Log, seed: int = 0, trials: int = 200) -> ProbeResult:
    """Check that pi == 1 everywhere strictly dominates any assignment with
    some pi_t < 1, for the plain importance-weighted value.

    Requires every logged reward to be strictly positive; otherwise the
    probe is skipped with an explicit status.
    """
    rewards, _ = _log_arrays(log)
    if np.any(rewards <= 0.0):
        return ProbeResult(
            theorem="all-mass-maximizer",
            holds=False,
            skipped=True,
            reason="hypothesis violated: some logged reward is zero",
        )
    n = len(log.tuples)
    reference = assignment_value(np.ones(n), log)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(trials):
        challenger = rng.random(n)  # every coordinate < 1
        value = assignment_value(challenger, log)
        worst = max(worst, value)
        if value >= reference:
            return ProbeResult(
                theorem="all-mass-maximizer",
                holds=False,
                reference_value=reference,
                worst_challenger=worst,
                witness="assignment with a coordinate below 1 reached the reference value",
            )
    return ProbeResult(
        theorem="all-mass-maximizer",
        holds=True,
        reference_value=reference,
        worst_challenger=worst,
        witness="all logged outputs at probability 1",
    )


def _positive(rng: np.random.Generator) -> float:
    return 1.0 - rng.random()  # in (0, 1]


def probe_theorem2(log: Log, seed: int = 0, trials: int = 200) -> ProbeResult:
    """Check the degenerate maximizer of the self-normalized value.

    Any assignment confined to the max-reward tuples evaluates exactly to
    the maximal reward; assignments with mass outside fall strictly below;
    assignments with no mass on the max-reward tuples fall strictly below
    the degenerate value.  Skipped when every tuple already attains the
    maximum or the maximum is zero.
    """
    part = partition_dmax(log)
    if part.delta_max <= 0.0:
        return ProbeResult(
            theorem="dmax-collapse",
            holds=False,
            skipped=True,
            reason="hypothesis violated: maximal reward is zero",
        )
    if part.rest_indices.size == 0:
        return ProbeResult(
            theorem="dmax-collapse",
            holds=False,
            skipped=True,
            reason="hypothesis violated: every tuple attains the maximal reward",
        )

    n = len(log.tuples)
    rng = np.random.default_rng(seed)
    dmax, rest = part.dmax_indices, part.rest_indices
    worst = -np.inf

    def fail(witness: str, value: float) -> ProbeResult:
        return ProbeResult(
            theorem="dmax-collapse",
            holds=False,
            reference_value=part.delta_max,
            worst_challenger=max(worst, value),
            witness=witness,
        )

    for _ in range(trials):
        # mass confined to the max-reward tuples: value must equal delta_max
        assignment = np.zeros(n)
        assignment[dmax] = rng.random(dmax.size)
        assignment[dmax[int(rng.integers(dmax.size))]] = _positive(rng)
        value = assignment_value_reweighted(assignment, log)
        if abs(value - part.delta_max) > DEGENERATE_VALUE_TOL:
            return fail("mass confined to max-reward tuples missed delta_max", value)

        # positive mass outside: strictly below delta_max
        assignment = rng.random(n)
        assignment[rest[int(rng.integers(rest.size))]] = _positive(rng)
        value = assignment_value_reweighted(assignment, log)
        worst = max(worst, value)
        if value >= part.delta_max:
            return fail("assignment with mass outside the max-reward set reached delta_max", value)

        # no mass on the max-reward tuples: strictly below the degenerate value
        assignment = np.zeros(n)
        assignment[rest] = rng.random(rest.size)
        assignment[rest[int(rng.integers(rest.size))]] = _positive(rng)
        value = assignment_value_reweighted(assignment, log)
        worst = max(worst, value)
        if value >= part.delta_max:
            return fail("assignment avoiding the max-reward set reached the degenerate value", value)

    return ProbeResult(
        theorem="dmax-collapse",
        holds=True,
        reference_value=part.delta_max,
        worst_challenger=worst,
        witness="positive mass on a max-reward tuple, zero elsewhere",
    )


def collapse_run(spec: TaskSpec, config: TrainConfig, with_truth: bool = True) -> TrainTrace:
    """Train on a small synthetic log and trace the weight collapse.

    Generates twice ``spec.num_instances`` instances from the task seed, logs
    one tuple per instance under a logging mode matching the estimator, and
    trains on the first half with the second half as the validation log.  The
    returned trace carries mass_on_dmax per epoch (and the true expected
    reward when ``with_truth``).
    """
    doubled = replace(
        spec,
        num_instances=2 * spec.num_instances,
        logging_mode=config.kind.required_mode,
    )
    instances, truth, logger = generate_task(doubled)
    log = roll_log(instances, truth, logger, rng=spec.seed)
    half = spec.num_instances
    train_log = Log(log.tuples[:half], log.mode)
    validation_log = Log(log.tuples[half:], log.mode)
    _, trace = train(config, train_log, validation_log, truth=truth if with_truth else None)
    return trace
