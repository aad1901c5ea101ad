from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..ingest import GroundingPool
from ..synth.samples import INTER, INTRA, MultiImageSample


class MixError(ValueError):
    pass


@dataclass(frozen=True)
class MixPlan:
    """Sample budget for a 1:1 inter/intra mix drawn from a pool without reuse.

    An inter sample consumes ``k_inter`` source instances and an intra sample
    one, so ``x`` samples per branch consume ``(k_inter + 1) * x`` instances.
    """

    pool_size: int
    k_inter: int
    inter: int
    intra: int

    @property
    def total(self) -> int:
        return self.inter + self.intra

    @property
    def consumed(self) -> int:
        return self.k_inter * self.inter + self.intra

    def to_dict(self) -> dict:
        return {
            "pool_size": self.pool_size,
            "k_inter": self.k_inter,
            "ratio": [1, 1],
            "inter": self.inter,
            "intra": self.intra,
            "total": self.total,
            "consumed": self.consumed,
        }


def plan_mix(pool_size: int, k_inter: int = 3) -> MixPlan:
    if k_inter < 1:
        raise MixError("k_inter must be positive")
    x = pool_size // (k_inter + 1)
    if x < 1:
        raise MixError(f"pool of {pool_size} cannot fund one inter ({k_inter} instances) and one intra sample")
    return MixPlan(pool_size, k_inter, x, x)


def partition_pool(pool: GroundingPool, plan: MixPlan, seed: int = 0) -> tuple[GroundingPool, GroundingPool]:
    """Split a pool into disjoint inter and intra sub-pools sized by ``plan``."""
    if plan.consumed > len(pool):
        raise MixError(f"plan consumes {plan.consumed} instances, pool has {len(pool)}")
    order = np.random.default_rng([seed, 3]).permutation(len(pool))
    n_inter = plan.k_inter * plan.inter
    inter = [pool[int(i)] for i in order[:n_inter]]
    intra = [pool[int(i)] for i in order[n_inter : n_inter + plan.intra]]
    return GroundingPool(inter), GroundingPool(intra)


def mix_datasets(
    inter: Iterable[MultiImageSample],
    intra: Iterable[MultiImageSample],
    seed: int = 0,
    enforce_ratio: bool = True,
) -> list[MultiImageSample]:
    """Seeded shuffle of the union of both branches.

    With ``enforce_ratio`` both branches must be non-empty and differ in size
    by at most one sample.
    """
    inter, intra = list(inter), list(intra)
    for branch, items in ((INTER, inter), (INTRA, intra)):
        bad = [s.sample_id for s in items if s.branch != branch]
        if bad:
            raise MixError(f"{branch} stream contains samples of another branch: {bad[:3]}")
    if enforce_ratio and (not inter or not intra or abs(len(inter) - len(intra)) > 1):
        raise MixError(f"1:1 ratio violated: {len(inter)} inter vs {len(intra)} intra samples")
    union = inter + intra
    order = np.random.default_rng([seed, 4]).permutation(len(union))
    return [union[int(i)] for i in order]
