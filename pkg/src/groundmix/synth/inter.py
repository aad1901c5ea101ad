"""
Inter-image contrast: K unrelated annotated images, one of which holds the
query referent while the others act as pure distractors.
"""

from __future__ import annotations

import logging
from typing import Iterator, Sequence

import numpy as np

from ..ingest import GroundingInstance, GroundingPool
from .samples import INTER, ImageSlot, MultiImageSample, TargetTuple
from .templates import TemplatePool

logger = logging.getLogger(__name__)

DEFAULT_K = 3
MAX_RETRIES = 16
MAX_REDRAWS = 16
_BRANCH_SEED = 1


class PoolTooSmallError(ValueError):
    pass


class LabelConflict(Exception):
    """No label of the designated instance is absent from every distractor.

    Callers treat this as a signal to resample.
    """


class InterSynthesisError(RuntimeError):
    pass


def sample_orthogonal(pool: GroundingPool | Sequence[GroundingInstance], k: int, rng) -> list[GroundingInstance]:
    """Draw ``k`` instances without replacement, with pairwise-distinct image references."""
    if k < 1:
        raise ValueError("k must be positive")
    n_images = len({g.image for g in pool})
    if n_images < k:
        raise PoolTooSmallError(f"pool has {n_images} distinct images, need {k}")
    chosen, seen = [], set()
    for idx in rng.permutation(len(pool)):
        g = pool[int(idx)]
        if g.image in seen:
            continue
        chosen.append(g)
        seen.add(g.image)
        if len(chosen) == k:
            break
    return chosen


def compose_inter_sample(
    instances: Sequence[GroundingInstance],
    templates: TemplatePool,
    rng,
    sample_id: str = "inter",
    seed_trace: Sequence[int] = (),
) -> MultiImageSample:
    """Shuffle the instances into slots and pose a query about one of them.

    Raises ``LabelConflict`` when the randomly designated instance has no label
    that is absent from all other instances.
    """
    k = len(instances)
    if len({g.image for g in instances}) != k:
        raise ValueError("instances must have pairwise-distinct images")

    order = rng.permutation(k)  # slot s shows instances[order[s]]
    slot_of = {int(src): slot for slot, src in enumerate(order)}
    designated = int(rng.integers(k))
    target = instances[designated]

    distractor_keys = set()
    for i, g in enumerate(instances):
        if i != designated:
            distractor_keys |= g.label_keys
    candidates = []
    for ann in target.annotations:
        if ann.key not in distractor_keys and ann.key not in candidates:
            candidates.append(ann.key)
    if not candidates:
        raise LabelConflict(f"every label of {target.instance_id} also occurs in a distractor")
    key = candidates[int(rng.integers(len(candidates)))]

    slot = slot_of[designated]
    matching = [a for a in target.annotations if a.key == key]
    targets = tuple(TargetTuple(slot, a.label, a.box) for a in matching)
    template = templates.choose(INTER, rng)

    slots = tuple(
        ImageSlot(g.image, g.instance_id, g.dims.width, g.dims.height)
        for g in (instances[int(src)] for src in order)
    )
    return MultiImageSample(
        sample_id=sample_id,
        branch=INTER,
        slots=slots,
        query=template.render(matching[0].label),
        targets=targets,
        template_id=template.template_id,
        seed_trace=tuple(seed_trace),
    )


def synth_inter_dataset(
    pool: GroundingPool,
    n_samples: int,
    k: int = DEFAULT_K,
    templates: TemplatePool | None = None,
    seed: int = 0,
    max_retries: int = MAX_RETRIES,
    max_redraws: int = MAX_REDRAWS,
) -> Iterator[MultiImageSample]:
    """Yield ``n_samples`` inter samples, each drawn from its own derived generator.

    Sample ``i`` depends only on ``(seed, i)`` and the pool, so any subset of
    indices can be regenerated (or produced in parallel) independently.
    """
    templates = templates or TemplatePool.default()
    for index in range(n_samples):
        rng = np.random.default_rng([seed, _BRANCH_SEED, index])
        yield _one_inter(pool, k, templates, rng, seed, index, max_retries, max_redraws)


def _one_inter(pool, k, templates, rng, seed, index, max_retries, max_redraws) -> MultiImageSample:
    for draw in range(max_redraws):
        instances = sample_orthogonal(pool, k, rng)
        for retry in range(max_retries):
            try:
                return compose_inter_sample(
                    instances,
                    templates,
                    rng,
                    sample_id=f"inter-{index:07d}",
                    seed_trace=(seed, index, draw, retry),
                )
            except LabelConflict:
                continue
        logger.debug("sample %d: instance set %d exhausted label retries", index, draw)
    raise InterSynthesisError(
        f"sample {index}: no conflict-free query after {max_redraws} instance draws "
        f"x {max_retries} retries (seed {seed}); the pool's labels overlap too heavily"
    )
