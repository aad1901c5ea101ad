"""Synthetic responses derived from ground truth, for exercising the reward."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry import GRID_MAX, Box
from ..parsing import render_response
from ..synth.samples import TargetTuple

BOX_JITTER = "box-jitter"
WRONG_INDEX = "wrong-index"
DROP_TARGET = "drop-target"
DUPLICATE_TARGET = "duplicate-target"
CORRUPT_FORMAT = "corrupt-format"
KINDS = (BOX_JITTER, WRONG_INDEX, DROP_TARGET, DUPLICATE_TARGET, CORRUPT_FORMAT)

CORRUPT_MODES = (
    "drop-answer-tag",
    "drop-think-tag",
    "swap-order",
    "trailing-text",
    "bad-json",
    "missing-field",
    "extra-field",
    "degenerate-box",
    "out-of-range",
    "negative-index",
)

THINK_TEXT = "Compare the images, find the referenced object and read off its box."


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    magnitude: float = 0.0
    mode: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation {self.kind!r}")
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        if self.kind == CORRUPT_FORMAT and self.mode not in CORRUPT_MODES:
            raise ValueError(f"unknown corrupt-format mode {self.mode!r}")


def jitter_box(box: Box, magnitude: float, rng) -> Box:
    """Move each edge by an independent uniform offset in ``[-magnitude, magnitude]``.

    The result is kept a valid grid box (clamped, at least one unit wide).
    """
    if magnitude == 0:
        return box
    off = rng.uniform(-magnitude, magnitude, size=4)
    x1, y1, x2, y2 = (int(round(c + o)) for c, o in zip(box, off))
    x1, x2 = sorted((x1, x2))
    y1, y2 = sorted((y1, y2))
    x1, y1 = min(max(x1, 0), GRID_MAX - 1), min(max(y1, 0), GRID_MAX - 1)
    x2, y2 = min(max(x2, x1 + 1), GRID_MAX), min(max(y2, y1 + 1), GRID_MAX)
    return Box(x1, y1, x2, y2)


def perturb_targets(
    targets: Sequence[TargetTuple], spec: PerturbationSpec, num_images: int | None = None
) -> list[TargetTuple]:
    rng = np.random.default_rng([spec.seed, KINDS.index(spec.kind)])
    out = list(targets)
    if spec.kind == BOX_JITTER:
        out = [TargetTuple(t.img_idx, t.label, jitter_box(t.bbox, spec.magnitude, rng)) for t in out]
    elif spec.kind == WRONG_INDEX:
        k = num_images or (max(t.img_idx for t in out) + 2)
        out = [TargetTuple((t.img_idx + 1) % k, t.label, t.bbox) for t in out]
    elif spec.kind == DROP_TARGET:
        del out[int(rng.integers(len(out)))]
    elif spec.kind == DUPLICATE_TARGET:
        i = int(rng.integers(len(out)))
        out.insert(i + 1, out[i])
    return out


def _corrupt(targets: Sequence[TargetTuple], mode: str) -> str:
    items = [t.to_dict() for t in targets]
    answer = json.dumps(items)
    if mode == "drop-answer-tag":
        return f"<think>{THINK_TEXT}</think>{answer}"
    if mode == "drop-think-tag":
        return f"{THINK_TEXT}<answer>{answer}</answer>"
    if mode == "swap-order":
        return f"<answer>{answer}</answer><think>{THINK_TEXT}</think>"
    if mode == "trailing-text":
        return f"<think>{THINK_TEXT}</think><answer>{answer}</answer> Hope this helps!"
    if mode == "bad-json":
        return f"<think>{THINK_TEXT}</think><answer>{answer[:-1]}</answer>"
    if mode == "missing-field":
        del items[0]["label"]
    elif mode == "extra-field":
        items[0]["score"] = 0.9
    elif mode == "degenerate-box":
        b = items[0]["bbox_2d"]
        items[0]["bbox_2d"] = [b[0], b[1], b[0], b[3]]
    elif mode == "out-of-range":
        items[0]["bbox_2d"][2] = 1000
    elif mode == "negative-index":
        items[0]["img_idx"] = -1
    return f"<think>{THINK_TEXT}</think><answer>{json.dumps(items)}</answer>"


def perturb_response(
    ground_truth: Sequence[TargetTuple], spec: PerturbationSpec, num_images: int | None = None
) -> str:
    """Render a response encoding ``ground_truth`` mutated according to ``spec``."""
    if not ground_truth:
        raise ValueError("ground truth must be non-empty")
    if spec.kind == CORRUPT_FORMAT:
        return _corrupt(ground_truth, spec.mode)
    return render_response(THINK_TEXT, perturb_targets(ground_truth, spec, num_images))
