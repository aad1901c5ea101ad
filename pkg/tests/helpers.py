"""Synthetic pools and independent oracles shared by the test modules."""

from __future__ import annotations

import itertools

import numpy as np

from groundmix.geometry import Box, ImageDims, PixelBox, normalize_box
from groundmix.ingest import Annotation, GroundingInstance, GroundingPool

VOCAB = [f"{adj} {noun}" for adj in ("red", "blue", "small", "striped", "wooden", "old")
         for noun in ("umbrella", "cup", "dog", "bench", "kite", "lamp", "chair", "boat")]


def make_instance(rng, i: int, min_dim=640, max_dim=1920, max_ann=4, vocab=VOCAB) -> GroundingInstance:
    W = int(rng.integers(min_dim, max_dim + 1))
    H = int(rng.integers(min_dim, max_dim + 1))
    dims = ImageDims(W, H)
    anns = []
    for _ in range(int(rng.integers(1, max_ann + 1))):
        w = rng.uniform(0.02, 0.6) * W
        h = rng.uniform(0.02, 0.6) * H
        x = rng.uniform(0, W - w)
        y = rng.uniform(0, H - h)
        pb = PixelBox(x, y, x + w, y + h)
        anns.append(Annotation(vocab[int(rng.integers(len(vocab)))], pb, normalize_box(pb, dims)))
    return GroundingInstance(f"inst-{i:06d}", f"images/{i:06d}.jpg", dims, tuple(anns), "synthetic")


def make_pool(n: int, seed: int = 0, **kw) -> GroundingPool:
    rng = np.random.default_rng(seed)
    return GroundingPool([make_instance(rng, i, **kw) for i in range(n)])


def iou_by_pixels(a, b) -> float:
    """IoU by counting unit cells of the integer grid (independent of the closed form)."""
    cells_a = {(x, y) for x in range(a[0], a[2]) for y in range(a[1], a[3])}
    cells_b = {(x, y) for x in range(b[0], b[2]) for y in range(b[1], b[3])}
    return len(cells_a & cells_b) / len(cells_a | cells_b)


def iou_closed(a, b) -> float:
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def brute_force_r_miou(preds, gts) -> float:
    """Enumerate every partial injection preds -> gts that respects image indices.

    Matchings in different image groups are independent, so the maximum over all
    index-respecting injections is the sum of per-group maxima; each group is
    enumerated exhaustively over (pred subset, ordered gt subset) pairs.
    """
    total = 0.0
    for k in {p[0] for p in preds} | {g[0] for g in gts}:
        ps = [p[1] for p in preds if p[0] == k]
        gs = [g[1] for g in gts if g[0] == k]
        best = 0.0
        for r in range(1, min(len(ps), len(gs)) + 1):
            for pc in itertools.combinations(range(len(ps)), r):
                for gp in itertools.permutations(range(len(gs)), r):
                    best = max(best, sum(iou_closed(ps[a], gs[b]) for a, b in zip(pc, gp)))
        total += best
    return total / max(len(preds), len(gts))


def brute_force_match(preds, gts) -> float:
    """Best total IoU between two box lists by enumeration (no index constraint)."""
    return brute_force_r_miou([(0, p) for p in preds], [(0, g) for g in gts]) * max(len(preds), len(gts))
