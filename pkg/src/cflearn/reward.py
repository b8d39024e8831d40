"""Regression reward model and the variance-optimal control scalar.

The direct reward model is a ridge regression of logged rewards on the
features of the chosen candidates; predictions are clipped to [0, 1], the
range rewards live in.  The control scalar is the variance-minimizing
multiplier Cov(X, Y) / Var(Y) of the two weighted per-tuple terms the
doubly controlled objective differences: X_t = delta_t rho_bar_t (observed)
and Y_t = dhat_t rho_bar_t (modelled).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _packed
from .domain import Instance, Log, PolicyParams
from .errors import ConfigurationError, FittingError


@dataclass(frozen=True, eq=False)
class RewardModel:
    """Linear reward regressor; predictions are clipped to [0, 1] at use."""

    weights: np.ndarray
    intercept: float
    ridge_lambda: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def predict_features(self, features: np.ndarray) -> np.ndarray:
        """Clipped predictions for feature arrays of shape (..., d)."""
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != self.dim:
            raise ConfigurationError(
                f"reward model dimension {self.dim} does not match features "
                f"with last axis {features.shape[-1]}"
            )
        return np.clip(features @ self.weights + self.intercept, 0.0, 1.0)


@dataclass(frozen=True)
class ControlScalar:
    """Cov/Var ratio with its ingredients; c_hat falls back to 0 when the
    control variate is (numerically) constant."""

    c_hat: float
    cov_xy: float
    var_y: float


VAR_FLOOR = 1e-12


def fit_reward_model(log: Log, ridge_lambda: float = 1e-3) -> RewardModel:
    """Least-squares fit of logged rewards on chosen-candidate features.

    The L2 penalty applies to the weights only, never the intercept, and the
    system is solved by normal equations, which for ridge_lambda > 0 always
    have a unique solution.  A singular unpenalized system raises
    :class:`FittingError`.
    """
    if len(log.tuples) == 0:
        raise ValueError("log is empty")
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be non-negative, got {ridge_lambda}")
    packed = _packed.get(log)
    features = packed.chosen_features()
    design = np.hstack([np.ones((packed.n, 1)), features])
    gram = design.T @ design
    idx = np.arange(1, design.shape[1])
    gram[idx, idx] += ridge_lambda
    moment = design.T @ packed.rewards
    if ridge_lambda == 0.0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise FittingError(
            "normal equations are singular; use ridge_lambda > 0 for a unique fit"
        )
    try:
        beta = np.linalg.solve(gram, moment)
    except np.linalg.LinAlgError as err:
        raise FittingError(f"normal equations could not be solved: {err}") from err
    return RewardModel(weights=beta[1:], intercept=float(beta[0]), ridge_lambda=float(ridge_lambda))


def predict(model: RewardModel, instance: Instance, y: int) -> float:
    """dhat(x, y), clipped to [0, 1]."""
    return float(model.predict_features(instance.candidates[int(y)]))


def predict_all(model: RewardModel, instance: Instance) -> np.ndarray:
    """dhat(x, y) for every candidate of the instance."""
    return model.predict_features(instance.candidates)


def control_scalar(x: np.ndarray, y: np.ndarray) -> ControlScalar:
    """Cov(X, Y) / Var(Y) from paired samples, with the degenerate fallback."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("control scalar needs two paired samples of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    cov = float(xc @ yc / (x.size - 1))
    var = float(yc @ yc / (x.size - 1))
    if var < VAR_FLOOR:
        return ControlScalar(c_hat=0.0, cov_xy=cov, var_y=var)
    return ControlScalar(c_hat=cov / var, cov_xy=cov, var_y=var)


def estimate_c_hat(params: PolicyParams, log: Log, model: RewardModel) -> ControlScalar:
    """Variance-optimal control scalar of the doubly controlled objective.

    Uses X_t = delta_t rho_bar_t and Y_t = dhat_t rho_bar_t under the
    current policy weights.
    """
    from .estimators import model_values_at_chosen, normalized_weights

    if len(log.tuples) < 2:
        raise ValueError("control scalar estimation needs at least 2 tuples")
    _, rho_bar = normalized_weights(params, log)
    packed = _packed.get(log)
    delta_hat = model_values_at_chosen(model, packed)
    return control_scalar(packed.rewards * rho_bar, delta_hat * rho_bar)
