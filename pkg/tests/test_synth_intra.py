import math

import numpy as np
import pytest

from groundmix.geometry import Box, CropRegion, ImageDims, PixelBox, unmap_box
from groundmix.ingest import Annotation, GroundingInstance, GroundingPool
from groundmix.io import dumps
from groundmix.synth.intra import (
    CONTEXT_RATIO,
    FOCUS_RATIO,
    AmbiguousTargetError,
    CropSamplingError,
    compose_intra_sample,
    sample_crop_region,
    synth_intra_dataset,
)
from groundmix.synth.templates import TemplatePool
from helpers import make_pool


def test_crop_ratio_one_is_target():
    crop, r = sample_crop_region(ImageDims(1000, 800), PixelBox(400, 300, 600, 500), (1.0, 1.0), np.random.default_rng(0))
    assert r == 1.0
    assert (crop.x, crop.y, crop.width, crop.height) == (400, 300, 200, 200)


def test_crop_centered_example():
    # slack 80 per axis, midpoint offset
    crop, r = sample_crop_region(
        ImageDims(1000, 800), PixelBox(400, 300, 600, 500), (1.4, 1.4), np.random.default_rng(0), placement="center"
    )
    assert (crop.x, crop.y, crop.width, crop.height) == (360, 260, 280, 280)


def test_crop_rejects_ratio_below_one():
    with pytest.raises(ValueError):
        sample_crop_region(ImageDims(100, 100), PixelBox(10, 10, 20, 20), (0.5, 1.2), np.random.default_rng(0))


@pytest.mark.parametrize("corner", ["tl", "tr", "bl", "br"])
def test_crop_corner_targets_shift_not_shrink(corner):
    W, H = 800, 700
    rng = np.random.default_rng(1)
    for _ in range(300):
        w, h = rng.uniform(20, 300), rng.uniform(20, 300)
        x = 0.0 if corner in ("tl", "bl") else W - w
        y = 0.0 if corner in ("tl", "tr") else H - h
        target = PixelBox(x, y, x + w, y + h)
        crop, r = sample_crop_region(ImageDims(W, H), target, (1.8, 2.5), rng)
        assert crop.contains(target)
        assert crop.x + crop.width <= W and crop.y + crop.height <= H
        # sides follow the sampled ratio unless capped by the image
        assert crop.width == min(W, max(math.ceil(target.x2) - math.floor(target.x1), math.floor(r * w + 0.5)))
        assert crop.height == min(H, max(math.ceil(target.y2) - math.floor(target.y1), math.floor(r * h + 0.5)))


def test_crop_larger_than_image_is_capped():
    crop, _ = sample_crop_region(ImageDims(700, 700), PixelBox(50, 50, 650, 650), (2.0, 2.0), np.random.default_rng(0))
    assert (crop.x, crop.y, crop.width, crop.height) == (0, 0, 700, 700)


def _instance(boxes, labels, dims=(1000, 800)):
    from groundmix.geometry import normalize_box

    d = ImageDims(*dims)
    anns = tuple(Annotation(l, PixelBox(*b), normalize_box(PixelBox(*b), d)) for b, l in zip(boxes, labels))
    return GroundingInstance("src", "src.jpg", d, anns)


def test_compose_structure():
    g = _instance([(400, 300, 600, 500)], ["red umbrella"])
    for seed in range(30):
        s, geo = compose_intra_sample(g, TemplatePool.default(), np.random.default_rng(seed))
        assert s.num_images == 3 and len(s.targets) == 3
        assert sorted(t.img_idx for t in s.targets) == [0, 1, 2]
        assert {t.label for t in s.targets} == {"red umbrella"}
        assert sorted(geo.slot_views) == ["context", "focus", "original"]
        for t, view in zip(s.targets, geo.slot_views):
            assert t.bbox == geo.view(view).box
        orig_slot = geo.slot_views.index("original")
        assert s.targets[orig_slot].bbox == g.annotations[0].box
        assert geo.view("context").crop.area > geo.view("focus").crop.area


def test_compose_ambiguous_labels():
    g = _instance([(0, 0, 100, 100), (200, 200, 300, 300)], ["cup", "Cup"])
    with pytest.raises(AmbiguousTargetError):
        compose_intra_sample(g, TemplatePool.default(), np.random.default_rng(0))


def test_compose_indistinguishable_crops():
    # target fills the image: focus and context crops are both the full image
    g = _instance([(0, 0, 1000, 800)], ["wall"])
    with pytest.raises(CropSamplingError):
        compose_intra_sample(g, TemplatePool.default(), np.random.default_rng(0))


def test_focus_box_for_centered_crop():
    from groundmix.geometry import remap_box

    crop = CropRegion(360, 260, 280, 280, ImageDims(1000, 800))
    assert remap_box(PixelBox(400, 300, 600, 500), crop) == Box(143, 143, 857, 857)


def test_dataset_empty_and_deterministic():
    pool = make_pool(60)
    assert list(synth_intra_dataset(pool, 0)) == []
    a = [dumps(s.to_dict()) for s in synth_intra_dataset(pool, 40, seed=9)]
    b = [dumps(s.to_dict()) for s in synth_intra_dataset(pool, 40, seed=9)]
    assert a == b


def test_dataset_invariants():
    pool = make_pool(300, seed=2)
    for s in synth_intra_dataset(pool, 600, seed=5):
        geo = s.geometry
        dims = ImageDims(*geo["image_dims"])
        target = PixelBox(*geo["pixel_box"])
        views = {v["view"]: v for v in geo["views"]}
        f, c = views["focus"], views["context"]
        assert FOCUS_RATIO[0] <= f["ratio"] <= FOCUS_RATIO[1]
        assert CONTEXT_RATIO[0] <= c["ratio"] <= CONTEXT_RATIO[1]
        fc, cc = CropRegion(*f["crop"], dims), CropRegion(*c["crop"], dims)
        assert fc.contains(target) and cc.contains(target)
        assert cc.area > fc.area
        for slot, t in zip(s.slots, s.targets):
            v = views[slot.view]
            assert list(t.bbox) == v["bbox_2d"]
            if slot.crop is not None:
                assert list(slot.crop) == v["crop"]
                back = unmap_box(t.bbox, CropRegion(*slot.crop, dims))
                step = max(slot.crop[2], slot.crop[3]) / 1000
                assert max(abs(a - b) for a, b in zip(back, target)) <= max(1.0, step) + 1e-9


def test_dataset_empty_pool_errors():
    from groundmix.synth.intra import IntraSynthesisError

    with pytest.raises(IntraSynthesisError):
        list(synth_intra_dataset(GroundingPool([]), 1))
