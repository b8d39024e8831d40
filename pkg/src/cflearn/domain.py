"""Data model for logged candidate-set prediction and the softmax policy.

An :class:`Instance` is an input together with the finite, ordered list of
candidate outputs it admits, each represented by a feature vector.  A
:class:`LoggedTuple` records which candidate a historical system chose for
one instance, the reward that choice received, and (under stochastic
logging) the probability with which it was chosen.  The target policy is a
softmax (Gibbs) distribution over each candidate set with scores
``alpha * weights . features``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, LogConsistencyError


class Mode(Enum):
    """Logging regime of a data log."""

    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True, eq=False)
class Instance:
    """An input with its finite candidate set.

    ``candidates`` is a (k, d) matrix whose row i holds the feature vector
    of output i.  Candidate order is stable: index i always denotes the
    same output, and every instance in an experiment shares the feature
    dimension d.
    """

    id: str
    candidates: np.ndarray

    def __post_init__(self) -> None:
        feats = np.asarray(self.candidates, dtype=float)
        if feats.ndim != 2:
            raise ConfigurationError(
                f"instance {self.id!r}: candidates must be a (k, d) matrix, "
                f"got shape {feats.shape}"
            )
        if feats.shape[0] < 2:
            raise ConfigurationError(
                f"instance {self.id!r}: need at least 2 candidates, got {feats.shape[0]}"
            )
        if not np.all(np.isfinite(feats)):
            raise ConfigurationError(f"instance {self.id!r}: non-finite feature values")
        object.__setattr__(self, "candidates", feats)

    @property
    def k(self) -> int:
        return self.candidates.shape[0]

    @property
    def dim(self) -> int:
        return self.candidates.shape[1]


@dataclass(frozen=True, eq=False)
class LoggedTuple:
    """One logged decision: instance, chosen candidate, reward, and the
    propensity of the choice when the logger was stochastic."""

    instance: Instance
    chosen: int
    reward: float
    propensity: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.chosen < self.instance.k:
            raise ConfigurationError(
                f"chosen index {self.chosen} out of range for instance "
                f"{self.instance.id!r} with {self.instance.k} candidates"
            )
        if not 0.0 <= self.reward <= 1.0:
            raise ConfigurationError(f"reward {self.reward} outside [0, 1]")
        if self.propensity is not None and not 0.0 < self.propensity <= 1.0:
            raise ConfigurationError(f"propensity {self.propensity} outside (0, 1]")


@dataclass(eq=False)
class Log:
    """A sequence of logged decisions produced under a single regime.

    The mode flag is authoritative: stochastic logs carry a propensity on
    every tuple, deterministic logs on none.  Treat instances of this class
    as immutable once constructed.
    """

    tuples: tuple[LoggedTuple, ...]
    mode: Mode

    def __post_init__(self) -> None:
        self.tuples = tuple(self.tuples)
        for t in self.tuples:
            has_propensity = t.propensity is not None
            if self.mode is Mode.STOCHASTIC and not has_propensity:
                raise LogConsistencyError(
                    "stochastic log contains a tuple without a propensity"
                )
            if self.mode is Mode.DETERMINISTIC and has_propensity:
                raise LogConsistencyError(
                    "deterministic log contains a tuple with a propensity"
                )

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Weight vector and smoothing scale of the softmax policy."""

    weights: np.ndarray
    alpha: float = 1.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ConfigurationError(f"weights must be a vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("weights contain non-finite values")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ConfigurationError(f"alpha must be a positive real, got {self.alpha}")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def _check_dim(params: PolicyParams, instance: Instance) -> None:
    if params.dim != instance.dim:
        raise ConfigurationError(
            f"weight dimension {params.dim} does not match feature dimension "
            f"{instance.dim} of instance {instance.id!r}"
        )


def policy_probs(params: PolicyParams, instance: Instance) -> np.ndarray:
    """Softmax choice probabilities over the candidates of ``instance``.

    Scores are ``alpha * weights . features``; the exponentials are taken
    after subtracting the maximum score so large scores cannot overflow.
    """
    _check_dim(params, instance)
    scores = params.alpha * (instance.candidates @ params.weights)
    scores -= scores.max()
    np.exp(scores, out=scores)
    return scores / scores.sum()


def log_prob_gradient(params: PolicyParams, instance: Instance, y: int) -> np.ndarray:
    """Gradient of log pi_w(y | x) with respect to the weights.

    Equals ``alpha * (phi(x, y) - E_pi[phi])``, the score-function form for
    the softmax family; the expectation runs over the full candidate set.
    """
    probs = policy_probs(params, instance)
    return params.alpha * (instance.candidates[int(y)] - probs @ instance.candidates)
