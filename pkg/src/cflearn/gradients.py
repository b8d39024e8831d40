"""Analytic gradients of the counterfactual objectives, with a
finite-difference verification harness.

All three families reduce to per-tuple contribution matrices that are
averaged in log order:

    plain:       delta_t rho_t g_t
    reweighted:  delta_t rho_bar_t (g_t - gbar)
    controlled:  (delta_t - c dhat_t) rho_bar_t (g_t - gbar)
                 + c sum_y dhat(x_t, y) pi_w(y|x_t) g_{t,y}

where ``g_t = grad log pi_w(y_t | x_t)`` and ``gbar`` is the
rho_bar-weighted mean gradient ``(1/n) sum_u rho_bar_u g_u``.  Since
``(1/n) sum rho_bar = 1``, the centering makes the reweighted gradient the
exact derivative of the self-normalized value, which the finite-difference
harness confirms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _packed
from .domain import Instance, Log, LoggedTuple, Mode, PolicyParams
from .errors import DegenerateSupportError
from .estimators import (
    EstimatorKind,
    _normalize,
    check_mode,
    model_values_at_chosen,
    resolve_control,
    value_doubly_controlled,
    value_ips_dpm,
    value_reweighted,
)
from .reward import RewardModel

FD_STEP = 1e-5
FD_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class GradientReport:
    kind: EstimatorKind
    gradient: np.ndarray
    fd_max_rel_error: float | None = None


def _require_tuples(packed: _packed.PackedLog) -> None:
    if packed.n == 0:
        raise ValueError("log is empty")


def ips_dpm_terms(params: PolicyParams, packed: _packed.PackedLog) -> np.ndarray:
    _require_tuples(packed)
    rho = packed.rho(params)
    grads = packed.chosen_grads(params)
    return (packed.rewards * rho)[:, None] * grads


def reweighted_terms(params: PolicyParams, packed: _packed.PackedLog) -> np.ndarray:
    _require_tuples(packed)
    rho_bar = _normalize(packed.rho(params))
    grads = packed.chosen_grads(params)
    mean_grad = (rho_bar[:, None] * grads).mean(axis=0)
    return (packed.rewards * rho_bar)[:, None] * (grads - mean_grad)


def _direct_grads(
    params: PolicyParams, packed: _packed.PackedLog, model: RewardModel
) -> np.ndarray:
    """grad of sum_y dhat(x_t, y) pi_w(y | x_t) for every tuple, in log order."""
    out = np.empty((packed.n, packed.dim))
    for g, probs in packed.iter_group_probs(params):
        preds = model.predict_features(g.feats)
        weighted = preds * probs
        totals = weighted.sum(axis=1)
        expected = np.einsum("mk,mkd->md", probs, g.feats)
        raw = np.einsum("mk,mkd->md", weighted, g.feats) - totals[:, None] * expected
        out[g.idx] = params.alpha * raw
    return out


def doubly_controlled_terms(
    params: PolicyParams, packed: _packed.PackedLog, model: RewardModel, c_hat: float
) -> np.ndarray:
    _require_tuples(packed)
    rho_bar = _normalize(packed.rho(params))
    grads = packed.chosen_grads(params)
    mean_grad = (rho_bar[:, None] * grads).mean(axis=0)
    delta_hat = model_values_at_chosen(model, packed)
    coeff = (packed.rewards - c_hat * delta_hat) * rho_bar
    return coeff[:, None] * (grads - mean_grad) + c_hat * _direct_grads(params, packed, model)


def grad_ips_dpm(params: PolicyParams, log: Log) -> np.ndarray:
    """(1/n) sum_t delta_t rho_t grad log pi_w(y_t | x_t)."""
    return ips_dpm_terms(params, _packed.get(log)).mean(axis=0)


def grad_reweighted(params: PolicyParams, log: Log) -> np.ndarray:
    """Exact gradient of the self-normalized value."""
    return reweighted_terms(params, _packed.get(log)).mean(axis=0)


def grad_doubly_controlled(
    params: PolicyParams, log: Log, reward_model: RewardModel, c_hat: float
) -> np.ndarray:
    """Exact gradient of the doubly controlled value at fixed c_hat."""
    return doubly_controlled_terms(params, _packed.get(log), reward_model, c_hat).mean(axis=0)


def gradient(
    kind: EstimatorKind,
    params: PolicyParams,
    log: Log,
    reward_model: RewardModel | None = None,
    c_hat: float | None = None,
) -> np.ndarray:
    """Gradient of any estimator kind, with mode compatibility enforced."""
    check_mode(kind, log)
    if not kind.uses_reward_model:
        if kind.reweighted:
            return grad_reweighted(params, log)
        return grad_ips_dpm(params, log)
    if reward_model is None:
        raise ValueError(f"estimator {kind.value} needs a reward model")
    c = resolve_control(kind, params, log, reward_model, c_hat)
    return grad_doubly_controlled(params, log, reward_model, c)


def gradient_report(
    kind: EstimatorKind,
    params: PolicyParams,
    log: Log,
    reward_model: RewardModel | None = None,
    c_hat: float | None = None,
    verify: bool = False,
) -> GradientReport:
    """Gradient of one estimator, optionally verified against finite differences."""
    grad = gradient(kind, params, log, reward_model, c_hat)
    fd_error = None
    if verify:
        if kind.uses_reward_model:
            c = resolve_control(kind, params, log, reward_model, c_hat)
            fd_error = fd_check(
                lambda p: value_doubly_controlled(p, log, reward_model, c),
                lambda p: grad_doubly_controlled(p, log, reward_model, c),
                params,
            )
        elif kind.reweighted:
            fd_error = fd_check(
                lambda p: value_reweighted(p, log), lambda p: grad_reweighted(p, log), params
            )
        else:
            fd_error = fd_check(
                lambda p: value_ips_dpm(p, log), lambda p: grad_ips_dpm(p, log), params
            )
    return GradientReport(kind=kind, gradient=grad, fd_max_rel_error=fd_error)


def fd_check(
    value_fn: Callable[[PolicyParams], float],
    grad_fn: Callable[[PolicyParams], np.ndarray],
    params: PolicyParams,
    step: float = FD_STEP,
) -> float:
    """Max relative disagreement between ``grad_fn`` and central differences.

    Per coordinate j the error is |analytic_j - numeric_j| / max(1, |analytic_j|);
    the maximum over coordinates is returned.  Singularities raised by
    ``value_fn`` propagate to the caller rather than being masked.
    """
    analytic = np.asarray(grad_fn(params), dtype=float)
    weights = params.weights
    worst = 0.0
    for j in range(weights.size):
        bump = np.zeros_like(weights)
        bump[j] = step
        hi = value_fn(PolicyParams(weights + bump, params.alpha))
        lo = value_fn(PolicyParams(weights - bump, params.alpha))
        numeric = (hi - lo) / (2.0 * step)
        err = abs(analytic[j] - numeric) / max(1.0, abs(analytic[j]))
        worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class GradCheckResult:
    family: str
    problems: int
    max_rel_error: float
    failures: int
    singular: int
    constant_cases: int  # single-tuple self-normalized objectives (exactly constant)


def random_problem(rng: np.random.Generator, n_max: int = 10, k_max: int = 5, d_max: int = 6):
    """A small random (params, log, model, c_hat) problem for gradient checks."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(2, k_max + 1))
    d = int(rng.integers(1, d_max + 1))
    stochastic = bool(rng.integers(0, 2))
    tuples = []
    for t in range(n):
        inst = Instance(id=f"p{t}", candidates=rng.standard_normal((k, d)))
        chosen = int(rng.integers(0, k))
        reward = float(rng.uniform(0.0, 1.0))
        propensity = float(rng.uniform(0.05, 1.0)) if stochastic else None
        tuples.append(LoggedTuple(inst, chosen, reward, propensity))
    mode = Mode.STOCHASTIC if stochastic else Mode.DETERMINISTIC
    log = Log(tuple(tuples), mode)
    params = PolicyParams(rng.standard_normal(d), alpha=float(rng.uniform(0.5, 2.0)))
    model = RewardModel(
        weights=rng.standard_normal(d) / np.sqrt(d),
        intercept=float(rng.uniform(0.0, 1.0)),
        ridge_lambda=0.0,
    )
    c_hat = float(rng.uniform(0.0, 2.0))
    return params, log, model, c_hat


def default_families() -> dict:
    """family name -> builder(problem) -> (value_fn, grad_fn)."""

    def ips_dpm(problem):
        _, log, _, _ = problem
        return (lambda p: value_ips_dpm(p, log)), (lambda p: grad_ips_dpm(p, log))

    def reweighted(problem):
        _, log, _, _ = problem
        return (lambda p: value_reweighted(p, log)), (lambda p: grad_reweighted(p, log))

    def doubly_controlled(problem):
        _, log, model, c_hat = problem
        return (
            lambda p: value_doubly_controlled(p, log, model, c_hat),
            lambda p: grad_doubly_controlled(p, log, model, c_hat),
        )

    return {
        "ips-dpm": ips_dpm,
        "reweighted": reweighted,
        "doubly-controlled": doubly_controlled,
    }


def run_grad_check(
    seed: int,
    count: int = 100,
    n_max: int = 10,
    k_max: int = 5,
    d_max: int = 6,
    families: dict | None = None,
    tolerance: float = FD_TOLERANCE,
) -> list[GradCheckResult]:
    """Finite-difference check of each gradient family on seeded random problems."""
    families = families if families is not None else default_families()
    rng = np.random.default_rng(seed)
    problems = [random_problem(rng, n_max, k_max, d_max) for _ in range(count)]
    results = []
    for name, build in families.items():
        worst = 0.0
        failures = 0
        singular = 0
        constant = 0
        for problem in problems:
            params, log, _, _ = problem
            if name != "ips-dpm" and len(log) == 1:
                constant += 1
            value_fn, grad_fn = build(problem)
            try:
                err = fd_check(value_fn, grad_fn, params)
            except DegenerateSupportError:
                singular += 1
                continue
            worst = max(worst, err)
            if err >= tolerance:
                failures += 1
        results.append(
            GradCheckResult(
                family=name,
                problems=len(problems) - singular,
                max_rel_error=worst,
                failures=failures,
                singular=singular,
                constant_cases=constant,
            )
        )
    return results
