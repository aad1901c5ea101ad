"""
Intra-image contrast: the original image plus a tight (focus) and a loose
(context) object-centred crop of the same target, in shuffled order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..geometry import Box, CropRegion, ImageDims, PixelBox, remap_box
from ..ingest import Annotation, GroundingInstance, GroundingPool
from .samples import INTRA, ImageSlot, MultiImageSample, TargetTuple
from .templates import TemplatePool

logger = logging.getLogger(__name__)

FOCUS_RATIO = (1.2, 1.5)
CONTEXT_RATIO = (1.8, 2.5)
MAX_CROP_ATTEMPTS = 16
_BRANCH_SEED = 2

ORIGINAL, FOCUS, CONTEXT = "original", "focus", "context"
VIEWS = (ORIGINAL, FOCUS, CONTEXT)


class CropSamplingError(Exception):
    """No admissible crop could be drawn; callers resample."""


class AmbiguousTargetError(Exception):
    """Every label of the instance is shared by several annotations."""


class IntraSynthesisError(RuntimeError):
    pass


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def sample_crop_region(
    dims: ImageDims,
    target: PixelBox,
    ratio_range: tuple[float, float],
    rng,
    placement: str = "random",
) -> tuple[CropRegion, float]:
    """Draw an integer crop around ``target`` at a random object-relative scale.

    Crop sides are ``ratio * target side`` (same ratio on both axes), capped at
    the image extent and never smaller than the target's integer hull. The
    origin is drawn uniformly among positions that keep the target inside the
    crop and the crop inside the image, so an oversized crop near a border is
    shifted rather than shrunk. ``placement="center"`` picks the middle offset.
    """
    lo, hi = ratio_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid ratio range {ratio_range}")
    width, height = dims
    if not (0 <= target.x1 < target.x2 <= width and 0 <= target.y1 < target.y2 <= height):
        raise ValueError(f"target {tuple(target)} not inside image {width}x{height}")

    ratio = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    hx1, hy1 = math.floor(target.x1), math.floor(target.y1)
    hx2, hy2 = math.ceil(target.x2), math.ceil(target.y2)
    cw = min(width, max(hx2 - hx1, _round_half_up(ratio * target.width)))
    ch = min(height, max(hy2 - hy1, _round_half_up(ratio * target.height)))

    x_lo, x_hi = max(0, hx2 - cw), min(hx1, width - cw)
    y_lo, y_hi = max(0, hy2 - ch), min(hy1, height - ch)
    if x_lo > x_hi or y_lo > y_hi:
        raise CropSamplingError(f"no crop placement for {tuple(target)} at ratio {ratio:.3f}")
    if placement == "center":
        x, y = (x_lo + x_hi) // 2, (y_lo + y_hi) // 2
    elif placement == "random":
        x = int(rng.integers(x_lo, x_hi + 1))
        y = int(rng.integers(y_lo, y_hi + 1))
    else:
        raise ValueError(f"unknown placement {placement!r}")
    return CropRegion(x, y, cw, ch, ImageDims(width, height)), ratio


@dataclass(frozen=True)
class ViewSpec:
    kind: str
    crop: CropRegion | None
    ratio: float
    box: Box

    def to_dict(self) -> dict:
        return {
            "view": self.kind,
            "ratio": self.ratio,
            "crop": None if self.crop is None else self.crop.to_list(),
            "bbox_2d": list(self.box),
        }


@dataclass(frozen=True)
class IntraSampleGeometry:
    instance_id: str
    label: str
    pixel_box: PixelBox
    image_dims: ImageDims
    views: tuple[ViewSpec, ViewSpec, ViewSpec]  # original, focus, context
    slot_views: tuple[str, ...]  # view kind shown in each slot

    def view(self, kind: str) -> ViewSpec:
        return next(v for v in self.views if v.kind == kind)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "label": self.label,
            "pixel_box": list(self.pixel_box),
            "image_dims": list(self.image_dims),
            "views": [v.to_dict() for v in self.views],
            "slot_views": list(self.slot_views),
        }


def _pick_annotation(g: GroundingInstance, rng) -> Annotation:
    counts: dict[str, int] = {}
    for a in g.annotations:
        counts[a.key] = counts.get(a.key, 0) + 1
    unique = [a for a in g.annotations if counts[a.key] == 1]
    if not unique:
        raise AmbiguousTargetError(f"{g.instance_id}: no annotation with a unique label")
    return unique[int(rng.integers(len(unique)))]


def _sample_views(g: GroundingInstance, ann: Annotation, rng, max_attempts: int):
    for _ in range(max_attempts):
        focus, r_focus = sample_crop_region(g.dims, ann.pixel_box, FOCUS_RATIO, rng)
        context, r_context = sample_crop_region(g.dims, ann.pixel_box, CONTEXT_RATIO, rng)
        if context.area > focus.area:
            return (focus, r_focus), (context, r_context)
    raise CropSamplingError(
        f"{g.instance_id}: context crop never larger than focus crop "
        f"(target {tuple(ann.pixel_box)} in {tuple(g.dims)})"
    )


def compose_intra_sample(
    g: GroundingInstance,
    templates: TemplatePool,
    rng,
    sample_id: str = "intra",
    seed_trace=(),
    max_crop_attempts: int = MAX_CROP_ATTEMPTS,
) -> tuple[MultiImageSample, IntraSampleGeometry]:
    ann = _pick_annotation(g, rng)
    (focus, r_focus), (context, r_context) = _sample_views(g, ann, rng, max_crop_attempts)
    views = (
        ViewSpec(ORIGINAL, None, 1.0, ann.box),
        ViewSpec(FOCUS, focus, r_focus, remap_box(ann.pixel_box, focus)),
        ViewSpec(CONTEXT, context, r_context, remap_box(ann.pixel_box, context)),
    )
    order = [int(i) for i in rng.permutation(len(views))]
    template = templates.choose(INTRA, rng)

    slots, targets = [], []
    for slot, vi in enumerate(order):
        v = views[vi]
        if v.crop is None:
            slots.append(ImageSlot(g.image, g.instance_id, g.dims.width, g.dims.height, ORIGINAL))
        else:
            slots.append(
                ImageSlot(g.image, g.instance_id, v.crop.width, v.crop.height, v.kind, tuple(v.crop.to_list()))
            )
        targets.append(TargetTuple(slot, ann.label, v.box))

    geometry = IntraSampleGeometry(
        instance_id=g.instance_id,
        label=ann.label,
        pixel_box=ann.pixel_box,
        image_dims=g.dims,
        views=views,
        slot_views=tuple(views[vi].kind for vi in order),
    )
    sample = MultiImageSample(
        sample_id=sample_id,
        branch=INTRA,
        slots=tuple(slots),
        query=template.render(ann.label),
        targets=tuple(targets),
        template_id=template.template_id,
        seed_trace=tuple(seed_trace),
        geometry=geometry.to_dict(),
    )
    return sample, geometry


def synth_intra_dataset(
    pool: GroundingPool,
    n_samples: int,
    templates: TemplatePool | None = None,
    seed: int = 0,
) -> Iterator[MultiImageSample]:
    """Yield ``n_samples`` intra samples, walking the pool in a seeded order.

    Each sample consumes the next source instance; instances that cannot host a
    sample (ambiguous labels, crops that cannot be told apart) are skipped. The
    walk wraps around once the pool is exhausted.
    """
    templates = templates or TemplatePool.default()
    if n_samples <= 0:
        return
    if len(pool) == 0:
        raise IntraSynthesisError("empty pool")
    order = np.random.default_rng([seed, _BRANCH_SEED]).permutation(len(pool))
    cursor = 0
    for index in range(n_samples):
        failures = 0
        while True:
            g = pool[int(order[cursor % len(pool)])]
            attempt = cursor
            cursor += 1
            rng = np.random.default_rng([seed, _BRANCH_SEED, index, attempt])
            try:
                sample, _ = compose_intra_sample(
                    g, templates, rng, sample_id=f"intra-{index:07d}", seed_trace=(seed, index, attempt)
                )
                break
            except (AmbiguousTargetError, CropSamplingError) as exc:
                logger.debug("sample %d: skipping %s: %s", index, g.instance_id, exc)
                failures += 1
                if failures >= len(pool):
                    raise IntraSynthesisError(f"sample {index}: no pool instance can host an intra sample") from exc
        yield sample
