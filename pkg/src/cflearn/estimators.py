"""Counterfactual value estimators over logged data.

Eight objectives share two building blocks: the per-tuple importance
weight ``rho_t`` (the policy probability of the logged choice, divided by
its propensity on stochastic logs) and its self-normalized form
``rho_bar_t = n * rho_t / sum(rho)``.

============  ===========  ==========================================
kind          log mode     objective
============  ===========  ==========================================
IPS / DPM     stoch / det  (1/n) sum_t  delta_t rho_t
IPS+R/DPM+R   stoch / det  (1/n) sum_t  delta_t rho_bar_t
DR / DC       stoch / det  doubly controlled with c = 1
cDR / cDC     stoch / det  doubly controlled with estimated c
============  ===========  ==========================================

The doubly controlled objective combines the self-normalized correction
with a direct reward model over the full candidate set:

    (1/n) sum_t [ (delta_t - c * dhat_t) rho_bar_t
                  + c * sum_y dhat(x_t, y) pi_w(y | x_t) ].

The inner sum always weights by ``pi_w``: propensities are only logged
for the chosen output, so ``pi/mu`` is undefined off the logged choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from . import _packed
from .domain import Log, LoggedTuple, Mode, PolicyParams, policy_probs
from .errors import DegenerateSupportError, LogConsistencyError

if TYPE_CHECKING:
    from .reward import RewardModel


class EstimatorKind(Enum):
    IPS = "ips"
    DPM = "dpm"
    IPS_R = "ips-r"
    DPM_R = "dpm-r"
    DR = "dr"
    DC = "dc"
    CDR = "cdr"
    CDC = "cdc"

    @property
    def required_mode(self) -> Mode:
        if self in (EstimatorKind.IPS, EstimatorKind.IPS_R, EstimatorKind.DR, EstimatorKind.CDR):
            return Mode.STOCHASTIC
        return Mode.DETERMINISTIC

    @property
    def reweighted(self) -> bool:
        """Whether the objective uses self-normalized weights."""
        return self not in (EstimatorKind.IPS, EstimatorKind.DPM)

    @property
    def uses_reward_model(self) -> bool:
        return self in (EstimatorKind.DR, EstimatorKind.DC, EstimatorKind.CDR, EstimatorKind.CDC)

    @property
    def estimates_control(self) -> bool:
        """Whether the control scalar is estimated from data rather than fixed at 1."""
        return self in (EstimatorKind.CDR, EstimatorKind.CDC)


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    """Value of one estimator plus weight diagnostics."""

    kind: EstimatorKind
    value: float
    weights_used: np.ndarray
    mass_on_dmax: float
    effective_sample_size: float


def check_mode(kind: EstimatorKind, log: Log) -> None:
    """Reject silently running an estimator on the wrong logging regime."""
    if log.mode is kind.required_mode:
        return
    if kind.required_mode is Mode.STOCHASTIC:
        raise LogConsistencyError(
            f"estimator {kind.value} requires logged propensities (stochastic log)"
        )
    raise LogConsistencyError(
        f"estimator {kind.value} expects a deterministic log, got a stochastic one"
    )


def _require_tuples(log: Log) -> None:
    if len(log.tuples) == 0:
        raise ValueError("log is empty")


def rho(params: PolicyParams, tup: LoggedTuple, mode: Mode) -> float:
    """Importance weight of one tuple: pi/mu when stochastic, pi otherwise."""
    prob = float(policy_probs(params, tup.instance)[tup.chosen])
    if mode is Mode.STOCHASTIC:
        if tup.propensity is None:
            raise LogConsistencyError(
                "stochastic weighting needs a logged propensity on every tuple"
            )
        return prob / tup.propensity
    return prob


def rho_weights(params: PolicyParams, log: Log) -> np.ndarray:
    """Per-tuple importance weights for the whole log, in log order."""
    return _packed.get(log).rho(params)


def _normalize(rho_values: np.ndarray) -> np.ndarray:
    total = rho_values.sum()
    if total <= 0.0:
        raise DegenerateSupportError(
            "all importance weights are zero; the self-normalized value is undefined"
        )
    return rho_values.size * rho_values / total


def normalized_weights(params: PolicyParams, log: Log) -> tuple[np.ndarray, np.ndarray]:
    """Raw and self-normalized weights ``(rho, rho_bar)`` for the whole log.

    ``rho_bar_t = n * rho_t / sum(rho)`` so that the plain mean of
    ``delta * rho_bar`` reproduces the ratio form of the reweighted value.
    """
    rho_values = rho_weights(params, log)
    return rho_values, _normalize(rho_values)


def value_ips_dpm(params: PolicyParams, log: Log) -> float:
    """Importance-weighted average reward, (1/n) sum_t delta_t rho_t.

    On a stochastic log this is inverse propensity scoring; on a
    deterministic log no sampling-bias correction is applied.
    """
    _require_tuples(log)
    packed = _packed.get(log)
    return float((packed.rewards * packed.rho(params)).mean())


def value_reweighted(params: PolicyParams, log: Log) -> float:
    """Self-normalized importance-weighted reward.

    Equals sum(delta * rho) / sum(rho), computed as the mean of
    ``delta * rho_bar``.  Raises :class:`DegenerateSupportError` when every
    weight is zero, where the ratio is undefined.
    """
    _require_tuples(log)
    packed = _packed.get(log)
    rho_bar = _normalize(packed.rho(params))
    return float((packed.rewards * rho_bar).mean())


def _direct_values(params: PolicyParams, packed: _packed.PackedLog, model: "RewardModel") -> np.ndarray:
    """sum_y dhat(x_t, y) pi_w(y | x_t) for every tuple, in log order."""
    out = np.empty(packed.n)
    for g, probs in packed.iter_group_probs(params):
        preds = model.predict_features(g.feats)
        out[g.idx] = (preds * probs).sum(axis=1)
    return out


def value_doubly_controlled(
    params: PolicyParams, log: Log, reward_model: "RewardModel", c_hat: float
) -> float:
    """Doubly controlled value: reweighted correction plus scaled direct model.

    ``c_hat = 1`` gives the DC (deterministic) / DR (stochastic) objective;
    ``c_hat = 0`` reduces exactly to the reweighted value.
    """
    _require_tuples(log)
    packed = _packed.get(log)
    rho_bar = _normalize(packed.rho(params))
    delta_hat = model_values_at_chosen(reward_model, packed)
    direct = _direct_values(params, packed, reward_model)
    terms = (packed.rewards - c_hat * delta_hat) * rho_bar + c_hat * direct
    return float(terms.mean())


def model_values_at_chosen(model: "RewardModel", packed: _packed.PackedLog) -> np.ndarray:
    """dhat(x_t, y_t) for every tuple, in log order."""
    return model.predict_features(packed.chosen_features())


def dmax_mask(rewards: np.ndarray) -> np.ndarray:
    """Boolean mask of tuples attaining the maximal logged reward (exact equality)."""
    return rewards == rewards.max()


@dataclass(frozen=True, eq=False)
class WeightDiagnostics:
    """Concentration diagnostics of the self-normalized weights."""

    weights: np.ndarray          # rho_bar, in log order
    mass_on_dmax: float          # share of normalized weight on max-reward tuples
    effective_sample_size: float  # (sum rho)^2 / sum rho^2, in (0, n]


def diagnostics(params: PolicyParams, log: Log) -> WeightDiagnostics:
    """Weight-concentration diagnostics of the policy on this log."""
    _require_tuples(log)
    packed = _packed.get(log)
    rho_values = packed.rho(params)
    rho_bar = _normalize(rho_values)
    mass = float(rho_bar[dmax_mask(packed.rewards)].sum() / packed.n)
    ess = float(rho_values.sum() ** 2 / (rho_values**2).sum())
    return WeightDiagnostics(weights=rho_bar, mass_on_dmax=mass, effective_sample_size=ess)


def objective_value(
    kind: EstimatorKind,
    params: PolicyParams,
    log: Log,
    reward_model: "RewardModel | None" = None,
    c_hat: float | None = None,
) -> float:
    """Value of any estimator kind, with mode compatibility enforced."""
    check_mode(kind, log)
    if not kind.uses_reward_model:
        if kind.reweighted:
            return value_reweighted(params, log)
        return value_ips_dpm(params, log)
    if reward_model is None:
        raise ValueError(f"estimator {kind.value} needs a reward model")
    c = resolve_control(kind, params, log, reward_model, c_hat)
    return value_doubly_controlled(params, log, reward_model, c)


def resolve_control(
    kind: EstimatorKind,
    params: PolicyParams,
    log: Log,
    reward_model: "RewardModel",
    c_hat: float | None,
) -> float:
    """Control scalar for a doubly-controlled kind: fixed 1, given, or estimated."""
    if c_hat is not None:
        return float(c_hat)
    if not kind.estimates_control:
        return 1.0
    from .reward import estimate_c_hat  # import here: reward builds on this module

    return estimate_c_hat(params, log, reward_model).c_hat


def evaluate_policy(
    kind: EstimatorKind,
    params: PolicyParams,
    log: Log,
    reward_model: "RewardModel | None" = None,
    c_hat: float | None = None,
) -> EstimatorReport:
    """Full report: estimator value plus weight diagnostics."""
    value = objective_value(kind, params, log, reward_model, c_hat)
    diag = diagnostics(params, log)
    weights = diag.weights if kind.reweighted else rho_weights(params, log)
    return EstimatorReport(
        kind=kind,
        value=value,
        weights_used=weights,
        mass_on_dmax=diag.mass_on_dmax,
        effective_sample_size=diag.effective_sample_size,
    )
