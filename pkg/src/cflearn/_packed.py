"""Vectorized, whole-log views used by the estimator and gradient code.

Tuples are stacked into dense arrays, grouped by candidate-set size so logs
with mixed k still vectorize.  Per-tuple results are always scattered back
into log order before any reduction, which keeps reductions in a fixed
order and results reproducible.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .domain import Log, Mode, PolicyParams
from .errors import ConfigurationError


@dataclass
class Group:
    """Tuples sharing one candidate-set size k."""

    idx: np.ndarray     # (m,) positions in the packed log
    feats: np.ndarray   # (m, k, d)
    chosen: np.ndarray  # (m,)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    np.exp(shifted, out=shifted)
    return shifted / shifted.sum(axis=-1, keepdims=True)


class PackedLog:
    """Dense array view over a :class:`Log`."""

    __slots__ = ("n", "dim", "mode", "rewards", "propensities", "groups", "__weakref__")

    def __init__(self, n, dim, mode, rewards, propensities, groups):
        self.n = n
        self.dim = dim
        self.mode = mode
        self.rewards = rewards
        self.propensities = propensities
        self.groups = groups

    @classmethod
    def from_log(cls, log: Log) -> "PackedLog":
        n = len(log.tuples)
        rewards = np.array([t.reward for t in log.tuples], dtype=float)
        propensities = None
        if log.mode is Mode.STOCHASTIC:
            propensities = np.array([t.propensity for t in log.tuples], dtype=float)

        dims = {t.instance.dim for t in log.tuples}
        if len(dims) > 1:
            raise ConfigurationError(f"log mixes feature dimensions {sorted(dims)}")
        dim = dims.pop() if dims else 0

        by_k: dict[int, list[int]] = {}
        for pos, t in enumerate(log.tuples):
            by_k.setdefault(t.instance.k, []).append(pos)
        groups = []
        for k, positions in by_k.items():
            idx = np.asarray(positions, dtype=np.intp)
            feats = np.stack([log.tuples[p].instance.candidates for p in positions])
            chosen = np.array([log.tuples[p].chosen for p in positions], dtype=np.intp)
            groups.append(Group(idx=idx, feats=feats, chosen=chosen))
        return cls(n, dim, log.mode, rewards, propensities, groups)

    def subset(self, order: np.ndarray) -> "PackedLog":
        """A packed view restricted to the given positions, in the given order."""
        order = np.asarray(order, dtype=np.intp)
        inverse = np.full(self.n, -1, dtype=np.intp)
        inverse[order] = np.arange(order.size)
        groups = []
        for g in self.groups:
            new_idx = inverse[g.idx]
            rows = np.nonzero(new_idx >= 0)[0]
            if rows.size:
                groups.append(
                    Group(idx=new_idx[rows], feats=g.feats[rows], chosen=g.chosen[rows])
                )
        propensities = None if self.propensities is None else self.propensities[order]
        return PackedLog(
            order.size, self.dim, self.mode, self.rewards[order], propensities, groups
        )

    def _check_params(self, params: PolicyParams) -> None:
        if params.dim != self.dim:
            raise ConfigurationError(
                f"weight dimension {params.dim} does not match log feature "
                f"dimension {self.dim}"
            )

    def iter_group_probs(self, params: PolicyParams):
        """Yield (group, probs) with probs of shape (m, k)."""
        self._check_params(params)
        for g in self.groups:
            yield g, _softmax(params.alpha * (g.feats @ params.weights))

    def chosen_probs(self, params: PolicyParams) -> np.ndarray:
        """pi_w(y_t | x_t) for every tuple, in log order."""
        out = np.empty(self.n)
        for g, probs in self.iter_group_probs(params):
            out[g.idx] = probs[np.arange(g.chosen.size), g.chosen]
        return out

    def chosen_features(self) -> np.ndarray:
        """phi(x_t, y_t) for every tuple, in log order."""
        out = np.empty((self.n, self.dim))
        for g in self.groups:
            out[g.idx] = g.feats[np.arange(g.chosen.size), g.chosen]
        return out

    def chosen_grads(self, params: PolicyParams) -> np.ndarray:
        """grad log pi_w(y_t | x_t) for every tuple, in log order."""
        out = np.empty((self.n, self.dim))
        for g, probs in self.iter_group_probs(params):
            expected = np.einsum("mk,mkd->md", probs, g.feats)
            picked = g.feats[np.arange(g.chosen.size), g.chosen]
            out[g.idx] = params.alpha * (picked - expected)
        return out

    def rho(self, params: PolicyParams) -> np.ndarray:
        """Per-tuple importance weight: pi/mu on stochastic logs, pi otherwise."""
        probs = self.chosen_probs(params)
        if self.mode is Mode.STOCHASTIC:
            return probs / self.propensities
        return probs


_CACHE: "weakref.WeakKeyDictionary[Log, PackedLog]" = weakref.WeakKeyDictionary()


def get(log: Log) -> PackedLog:
    """Packed view of ``log``, cached for the lifetime of the log object."""
    packed = _CACHE.get(log)
    if packed is None:
        packed = PackedLog.from_log(log)
        _CACHE[log] = packed
    return packed
