"""
scikit-learn style wrappers.

The functional modules stay the source of truth; these classes expose them
through ``fit`` / ``transform`` / ``predict`` with ``get_params`` support so
they can sit inside pipelines, grid searches and joblib-based tooling.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .grpo import DEFAULT_BETA, DEFAULT_EPSILON, GrpoConfig, RolloutGroup, group_advantages, group_objective
from .ingest import DEFAULT_MIN_EDGE, GroundingInstance, GroundingPool, build_pool
from .reward import total_reward
from .synth.inter import DEFAULT_K, synth_inter_dataset
from .synth.intra import synth_intra_dataset
from .synth.samples import MultiImageSample, TargetTuple, targets_from_dicts
from .synth.templates import TemplatePool


def check_pool(X) -> GroundingPool:
    """Accept a pool, a sequence of instances, or a sequence of instance dicts."""
    if isinstance(X, GroundingPool):
        pool = X
    else:
        items = list(X)
        if all(isinstance(g, GroundingInstance) for g in items):
            pool = GroundingPool(items)
        elif all(isinstance(g, Mapping) for g in items):
            pool = GroundingPool.from_records(items)
        else:
            raise TypeError("expected GroundingPool, GroundingInstance objects or instance records")
    if len(pool) == 0:
        raise ValueError("empty grounding pool")
    return pool


def check_ground_truth(y) -> list[TargetTuple]:
    if isinstance(y, MultiImageSample):
        return list(y.targets)
    y = list(y)
    if y and isinstance(y[0], Mapping):
        return targets_from_dicts(y)
    return y


def check_reward_groups(X) -> np.ndarray:
    """2-d float array, one rollout group per row, at least two rollouts per group."""
    X = check_array(X, dtype=float, ensure_min_features=2)
    return X


class PoolBuilder(BaseEstimator, TransformerMixin):
    """Source records in, filtered grounding pool out."""

    def __init__(self, min_edge: int = DEFAULT_MIN_EDGE):
        self.min_edge = min_edge

    def fit(self, X=None, y=None):
        if self.min_edge < 0:
            raise ValueError("min_edge must be non-negative")
        self.fitted_ = True
        return self

    def transform(self, X) -> GroundingPool:
        check_is_fitted(self)
        pool, self.report_ = build_pool(X, self.min_edge)
        return pool


class _Synthesizer(BaseEstimator, TransformerMixin):
    def fit(self, X, y=None):
        self.pool_ = check_pool(X)
        self.templates_ = TemplatePool.load(self.templates) if self.templates else TemplatePool.default()
        return self

    def transform(self, X=None) -> list[MultiImageSample]:
        """Synthesize from ``X`` if given, else from the fitted pool."""
        check_is_fitted(self, "pool_")
        pool = self.pool_ if X is None else check_pool(X)
        return list(self._generate(pool))

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).transform(None)


class InterContrastSynthesizer(_Synthesizer):
    def __init__(self, n_samples: int = 100, k: int = DEFAULT_K, seed: int = 0, templates: str | None = None):
        self.n_samples = n_samples
        self.k = k
        self.seed = seed
        self.templates = templates

    def _generate(self, pool):
        return synth_inter_dataset(pool, self.n_samples, self.k, self.templates_, self.seed)


class IntraContrastSynthesizer(_Synthesizer):
    def __init__(self, n_samples: int = 100, seed: int = 0, templates: str | None = None):
        self.n_samples = n_samples
        self.seed = seed
        self.templates = templates

    def _generate(self, pool):
        return synth_intra_dataset(pool, self.n_samples, self.templates_, self.seed)


class SpatialRewardScorer(BaseEstimator):
    """Scores responses (``X``) against ground-truth target sets (``y``).

    ``predict`` returns the total reward per response; ``predict_components``
    returns an ``(n, 2)`` array of ``(r_miou, r_format)``. ``score`` is the mean
    total reward, so higher is better as scikit-learn expects.
    """

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def _breakdowns(self, X: Sequence[str], y: Iterable):
        ys = list(y)
        X = list(X)
        if len(X) != len(ys):
            raise ValueError(f"{len(X)} responses but {len(ys)} ground-truth sets")
        return [total_reward(text, check_ground_truth(gt)) for text, gt in zip(X, ys)]

    def predict_components(self, X, y) -> np.ndarray:
        return np.array([[b.r_miou, b.r_format] for b in self._breakdowns(X, y)], dtype=float).reshape(-1, 2)

    def predict(self, X, y) -> np.ndarray:
        return self.predict_components(X, y).sum(axis=1)

    def score(self, X, y, sample_weight=None) -> float:
        return float(np.average(self.predict(X, y), weights=sample_weight))


class GroupAdvantageTransformer(BaseEstimator, TransformerMixin):
    """Rows of group rewards to rows of advantages; skipped groups become NaN rows."""

    def fit(self, X, y=None):
        check_reward_groups(X)
        self.fitted_ = True
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self)
        X = check_reward_groups(X)
        out = np.full_like(X, np.nan)
        self.skip_mask_ = np.zeros(len(X), dtype=bool)
        for i, row in enumerate(X):
            adv = group_advantages(row)
            if adv is None:
                self.skip_mask_[i] = True
            else:
                out[i] = adv
        return out


class GroupObjectiveEvaluator(BaseEstimator):
    """Evaluates the clipped group objective for batches of ``RolloutGroup``."""

    def __init__(self, epsilon: float = DEFAULT_EPSILON, beta: float = DEFAULT_BETA):
        self.epsilon = epsilon
        self.beta = beta

    def fit(self, X=None, y=None):
        self.config_ = GrpoConfig(self.epsilon, self.beta)
        return self

    def predict(self, X: Iterable[RolloutGroup | Mapping]) -> np.ndarray:
        """Objective per group, NaN for skipped groups."""
        check_is_fitted(self, "config_")
        out = []
        for g in X:
            group = g if isinstance(g, RolloutGroup) else RolloutGroup.from_dict(g)
            res = group_objective(group, self.config_)
            out.append(np.nan if res.skipped else res.objective)
        return np.asarray(out, dtype=float)
