"""
Value-level GRPO kernel over rollout groups.

Inputs are sequence-level log-probabilities produced by an external policy;
nothing here is differentiable. Functions accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .io import GROUP_RESULT_SCHEMA, GROUP_SCHEMA, check_schema

DEFAULT_EPSILON = 0.2
DEFAULT_BETA = 0.01
DEFAULT_GROUP_SIZE = 8
MAX_LOG_RATIO = 50.0


def _finite(*arrays):
    out = [np.asarray(a, dtype=float) for a in arrays]
    for a in out:
        if not np.all(np.isfinite(a)):
            raise ValueError("log-probabilities must be finite")
    return out


def group_advantages(rewards: Sequence[float]) -> np.ndarray | None:
    """Group-normalized advantages, or ``None`` when the group must be skipped.

    Uses the population standard deviation. A group whose rewards are all equal
    carries no learning signal and is skipped instead of being smoothed.
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValueError(f"need a 1-d group of at least 2 rewards, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    if np.all(r == r[0]):
        return None
    # rescale before squaring so tiny spreads do not underflow, then recentre
    # because the first mean can be off by an ulp of the rewards
    c = r - r.mean()
    c = c / np.max(np.abs(c))
    c = c - c.mean()
    return c / np.sqrt(np.mean(c**2))


def prob_ratio(logp_current, logp_old, max_log_ratio: float = MAX_LOG_RATIO):
    """``pi_theta / pi_old`` from log-probabilities, with the log-ratio clamped."""
    cur, old = _finite(logp_current, logp_old)
    out = np.exp(np.clip(cur - old, -max_log_ratio, max_log_ratio))
    return float(out) if out.ndim == 0 else out


def clipped_term(ratio, advantage, epsilon: float = DEFAULT_EPSILON):
    """Pessimistic clipped surrogate ``min(r*A, clip(r, 1-eps, 1+eps)*A)``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    r = np.asarray(ratio, dtype=float)
    a = np.asarray(advantage, dtype=float)
    out = np.minimum(r * a, np.clip(r, 1.0 - epsilon, 1.0 + epsilon) * a)
    return float(out) if out.ndim == 0 else out


def kl_estimate(logp_ref, logp_current, max_log_ratio: float = MAX_LOG_RATIO):
    """Per-sample KL penalty ``u - log(u) - 1`` with ``u = pi_ref / pi_theta``.

    Evaluated as ``expm1(d) - d`` for ``d = log u`` so values near ``u = 1``
    keep full precision and are never negative.
    """
    ref, cur = _finite(logp_ref, logp_current)
    d = np.clip(ref - cur, -max_log_ratio, max_log_ratio)
    small = np.abs(d) < 1e-4
    # series branch: expm1(d) - d cancels to 0 for |d| below ~1e-16
    series = d * d * (0.5 + d * (1.0 / 6.0 + d / 24.0))
    out = np.maximum(np.where(small, series, np.expm1(d) - d), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GrpoConfig:
    epsilon: float = DEFAULT_EPSILON
    beta: float = DEFAULT_BETA
    max_log_ratio: float = MAX_LOG_RATIO

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True)
class RolloutGroup:
    rewards: np.ndarray
    logp_current: np.ndarray
    logp_old: np.ndarray
    logp_ref: np.ndarray
    group_id: str = ""

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.rewards, self.logp_current, self.logp_old, self.logp_ref)]
        sizes = {a.shape for a in arrays}
        if len(sizes) != 1 or arrays[0].ndim != 1:
            raise ValueError(f"group {self.group_id!r}: fields must be equal-length vectors")
        if arrays[0].size < 2:
            raise ValueError(f"group {self.group_id!r}: need at least 2 rollouts")
        for name, a in zip(("rewards", "logp_current", "logp_old", "logp_ref"), arrays):
            object.__setattr__(self, name, a)
        _finite(*arrays)

    @property
    def size(self) -> int:
        return int(self.rewards.size)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RolloutGroup":
        check_schema(d, GROUP_SCHEMA)
        return cls(
            rewards=d["rewards"],
            logp_current=d["logp_current"],
            logp_old=d.get("logp_old", d["logp_current"]),
            logp_ref=d["logp_ref"],
            group_id=str(d.get("group_id", "")),
        )


@dataclass
class GroupObjective:
    group_id: str
    skipped: bool
    objective: float | None = None
    advantages: np.ndarray | None = None
    ratios: np.ndarray | None = None
    surrogate: np.ndarray | None = None
    kl: np.ndarray | None = None
    terms: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def lst(a):
            return None if a is None else [float(x) for x in a]

        return {
            "schema": GROUP_RESULT_SCHEMA,
            "group_id": self.group_id,
            "skipped": self.skipped,
            "objective": self.objective,
            "advantages": lst(self.advantages),
            "ratios": lst(self.ratios),
            "kl": lst(self.kl),
            "terms": lst(self.terms),
        }


def group_objective(group: RolloutGroup, cfg: GrpoConfig = GrpoConfig()) -> GroupObjective:
    """Mean over the group of ``clipped_term - beta * kl``; skipped groups carry no value."""
    adv = group_advantages(group.rewards)
    if adv is None:
        return GroupObjective(group.group_id, skipped=True)
    ratios = prob_ratio(group.logp_current, group.logp_old, cfg.max_log_ratio)
    surrogate = clipped_term(ratios, adv, cfg.epsilon)
    kl = kl_estimate(group.logp_ref, group.logp_current, cfg.max_log_ratio)
    terms = surrogate - cfg.beta * kl
    return GroupObjective(
        group.group_id,
        skipped=False,
        objective=float(np.mean(terms)),
        advantages=adv,
        ratios=ratios,
        surrogate=surrogate,
        kl=kl,
        terms=terms,
    )
