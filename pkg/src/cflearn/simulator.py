"""Synthetic candidate-set tasks with known ground truth.

A task draws Gaussian candidate features, defines the true reward of a
candidate as a clipped sigmoid of a hidden linear score (plus optional
noise), and derives a logging policy whose weights interpolate between the
hidden reward weights and an unrelated random direction.  ``logger_quality``
1 therefore gives an oracle logger and 0 an unrelated one, mimicking an
out-of-domain system asked to act on in-domain inputs.

Rewards are quantized to a 1e-6 grid so that the max-reward partition of a
log, which uses exact float equality, never depends on accidental
near-ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Instance, Log, LoggedTuple, Mode, PolicyParams, policy_probs

REWARD_QUANTUM = 1e-6


@dataclass(frozen=True)
class TaskSpec:
    """Shape and difficulty of one synthetic task."""

    num_instances: int
    k: int
    d: int
    seed: int
    reward_noise: float = 0.0
    logger_quality: float = 1.0
    logging_mode: Mode = Mode.DETERMINISTIC
    logger_alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.num_instances < 1 or self.k < 2 or self.d < 1:
            raise ValueError(
                f"need num_instances >= 1, k >= 2, d >= 1; got "
                f"({self.num_instances}, {self.k}, {self.d})"
            )
        if self.reward_noise < 0:
            raise ValueError(f"reward_noise must be non-negative, got {self.reward_noise}")
        if not 0.0 <= self.logger_quality <= 1.0:
            raise ValueError(f"logger_quality must lie in [0, 1], got {self.logger_quality}")
        if self.logger_alpha <= 0:
            raise ValueError(f"logger_alpha must be positive, got {self.logger_alpha}")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Hidden reward weights and the true reward of every candidate."""

    reward_weights: np.ndarray
    rewards: dict[str, np.ndarray]  # instance id -> (k,) true rewards

    def __call__(self, instance: Instance) -> np.ndarray:
        return self.rewards[instance.id]


@dataclass(frozen=True, eq=False)
class LoggingPolicy:
    """The historical system: a softmax policy acted on deterministically
    (argmax, lowest index on ties) or by sampling with recorded propensity."""

    params: PolicyParams
    mode: Mode


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _quantize(rewards: np.ndarray) -> np.ndarray:
    return np.round(rewards / REWARD_QUANTUM) * REWARD_QUANTUM


def generate_task(spec: TaskSpec) -> tuple[list[Instance], GroundTruth, LoggingPolicy]:
    """Instances, ground truth, and logging policy, all fixed by the seed."""
    rng = np.random.default_rng(spec.seed)
    scale = 1.0 / np.sqrt(spec.d)
    hidden = rng.standard_normal(spec.d) * scale
    features = rng.standard_normal((spec.num_instances, spec.k, spec.d))
    noise = (
        rng.standard_normal((spec.num_instances, spec.k)) * spec.reward_noise
        if spec.reward_noise > 0
        else np.zeros((spec.num_instances, spec.k))
    )
    perturbation = rng.standard_normal(spec.d) * scale

    raw = _sigmoid(features @ hidden) + noise
    all_rewards = _quantize(np.clip(raw, 0.0, 1.0))

    instances = []
    rewards = {}
    for i in range(spec.num_instances):
        inst = Instance(id=f"i{i:05d}", candidates=features[i])
        instances.append(inst)
        rewards[inst.id] = all_rewards[i]

    logger_weights = spec.logger_quality * hidden + (1.0 - spec.logger_quality) * perturbation
    policy = LoggingPolicy(
        params=PolicyParams(logger_weights, alpha=spec.logger_alpha),
        mode=spec.logging_mode,
    )
    return instances, GroundTruth(reward_weights=hidden, rewards=rewards), policy


def _sample_index(probs: np.ndarray, u: float) -> int:
    cumulative = np.cumsum(probs)
    idx = int(np.searchsorted(cumulative, u, side="right"))
    if idx >= probs.size or probs[idx] <= 0.0:
        idx = int(np.max(np.nonzero(probs > 0.0)[0]))
    return idx


def roll_log(
    instances: list[Instance],
    truth: GroundTruth,
    logging_policy: LoggingPolicy,
    rng: np.random.Generator | int = 0,
) -> Log:
    """One logged tuple per instance under the logging policy.

    Deterministic mode picks the argmax candidate (lowest index on ties)
    and records no propensity; stochastic mode samples a candidate and
    records its probability.  ``rng`` seeds the stochastic draws.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    tuples = []
    for inst in instances:
        probs = policy_probs(logging_policy.params, inst)
        if logging_policy.mode is Mode.DETERMINISTIC:
            chosen = int(np.argmax(probs))
            propensity = None
        else:
            chosen = _sample_index(probs, rng.random())
            propensity = float(probs[chosen])
        tuples.append(
            LoggedTuple(
                instance=inst,
                chosen=chosen,
                reward=float(truth(inst)[chosen]),
                propensity=propensity,
            )
        )
    return Log(tuple(tuples), logging_policy.mode)


def split(
    log: Log, fractions: tuple[float, float, float], seed: int
) -> tuple[Log, Log, Log]:
    """Seeded disjoint (train, validation, test) partition preserving mode.

    Sizes follow the rounded cumulative fractions, so exact fractions give
    exact sizes.  Splits with fraction 0 come back empty.
    """
    n = len(log.tuples)
    if n == 0:
        raise ValueError("cannot split an empty log")
    fracs = np.asarray(fractions, dtype=float)
    if fracs.size != 3 or np.any(fracs < 0) or abs(fracs.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 non-negative values summing to 1, got {fractions}")
    boundaries = np.round(np.cumsum(fracs) * n).astype(int)
    boundaries[-1] = n
    perm = np.random.default_rng(seed).permutation(n)
    parts = []
    start = 0
    for stop in boundaries:
        chosen = np.sort(perm[start:stop])
        parts.append(Log(tuple(log.tuples[i] for i in chosen), log.mode))
        start = stop
    return parts[0], parts[1], parts[2]


def logging_policy_truth(
    logging_policy: LoggingPolicy, instances: list[Instance], truth: GroundTruth
) -> float:
    """True expected reward the logger itself achieves on these instances.

    Deterministic loggers earn the reward of their argmax choice; stochastic
    loggers the policy expectation.
    """
    total = 0.0
    for inst in instances:
        probs = policy_probs(logging_policy.params, inst)
        rewards = truth(inst)
        if logging_policy.mode is Mode.DETERMINISTIC:
            total += float(rewards[int(np.argmax(probs))])
        else:
            total += float(probs @ rewards)
    return total / len(instances)
