"""
Seeded property suite for the reward.

Each property is evaluated over random ground-truth sets; failures are listed
with the case seed that reproduces them. The report is plain data and is
byte-identical across reruns with the same arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..geometry import Box, iou
from ..reward import r_miou, total_reward
from ..synth.samples import TargetTuple
from .perturb import (
    BOX_JITTER,
    CORRUPT_FORMAT,
    CORRUPT_MODES,
    DUPLICATE_TARGET,
    WRONG_INDEX,
    PerturbationSpec,
    perturb_response,
)

JITTER_MAGNITUDES = (0, 20, 50, 100, 200)
DEFAULT_CASES = 500


def random_box(rng, min_side: int = 20, max_side: int = 400) -> Box:
    w = int(rng.integers(min_side, max_side + 1))
    h = int(rng.integers(min_side, max_side + 1))
    x1 = int(rng.integers(0, 1000 - w))
    y1 = int(rng.integers(0, 1000 - h))
    return Box(x1, y1, x1 + w, y1 + h)


def random_targets(rng, n: int, n_images: int = 3, label: str = "object") -> list[TargetTuple]:
    return [TargetTuple(int(rng.integers(n_images)), label, random_box(rng)) for _ in range(n)]


def random_pair(rng, max_size: int = 6, n_images: int = 3) -> tuple[list[TargetTuple], list[TargetTuple]]:
    """Random (predictions, ground truth); predictions partly copy or perturb the truth."""
    gts = random_targets(rng, int(rng.integers(1, max_size + 1)), n_images)
    preds = []
    for _ in range(int(rng.integers(0, max_size + 1))):
        roll = rng.random()
        if roll < 0.4:
            g = gts[int(rng.integers(len(gts)))]
            preds.append(TargetTuple(g.img_idx, g.label, g.bbox))
        elif roll < 0.7:
            g = gts[int(rng.integers(len(gts)))]
            dx, dy = (int(v) for v in rng.integers(-60, 61, size=2))
            b = g.bbox
            x1, y1 = min(max(b.x1 + dx, 0), 998), min(max(b.y1 + dy, 0), 998)
            preds.append(TargetTuple(g.img_idx, g.label, Box(x1, y1, max(min(b.x2 + dx, 999), x1 + 1), max(min(b.y2 + dy, 999), y1 + 1))))
        else:
            preds.extend(random_targets(rng, 1, n_images))
    return preds, gts


def exhaustive_r_miou(preds: Sequence[TargetTuple], gts: Sequence[TargetTuple]) -> float:
    """Brute-force maximum over every index-respecting partial injection (small sets only)."""
    if not gts:
        raise ValueError("ground truth must be non-empty")

    def best_from(i: int, used: frozenset) -> float:
        # prediction i either stays unmatched or takes any free same-index truth
        if i == len(preds):
            return 0.0
        best = best_from(i + 1, used)
        for j, g in enumerate(gts):
            if j not in used and g.img_idx == preds[i].img_idx:
                best = max(best, iou(preds[i].bbox, g.bbox) + best_from(i + 1, used | {j}))
        return best

    return best_from(0, frozenset()) / max(len(preds), len(gts))


@dataclass
class PropertyResult:
    passed: bool = True
    checked: int = 0
    failures: list[int] = field(default_factory=list)

    def record(self, ok: bool, case_seed: int):
        self.checked += 1
        if not ok:
            self.passed = False
            if len(self.failures) < 20:
                self.failures.append(case_seed)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checked": self.checked, "failures": self.failures}


@dataclass
class SuiteReport:
    seed: int
    n_cases: int
    properties: dict[str, PropertyResult] = field(default_factory=dict)
    curves: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties.values())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_cases": self.n_cases,
            "passed": self.passed,
            "properties": {k: v.to_dict() for k, v in self.properties.items()},
            "curves": self.curves,
        }


def jitter_curve(n_cases: int, seed: int, magnitudes=JITTER_MAGNITUDES) -> dict[float, float]:
    """Mean r_miou of jittered single-target responses per jitter magnitude."""
    curve = {}
    for m in magnitudes:
        scores = []
        for case in range(n_cases):
            rng = np.random.default_rng([seed, 10, case])
            gts = random_targets(rng, 1)
            spec = PerturbationSpec(BOX_JITTER, magnitude=m, seed=seed * 1_000_003 + case)
            scores.append(total_reward(perturb_response(gts, spec, 3), gts).r_miou)
        curve[m] = float(np.mean(scores))
    return curve


def run_reward_suite(n_cases: int = DEFAULT_CASES, seed: int = 0) -> SuiteReport:
    report = SuiteReport(seed=seed, n_cases=n_cases)
    props = report.properties

    curve = jitter_curve(n_cases, seed)
    report.curves["jitter"] = {str(m): v for m, v in curve.items()}
    mono = props.setdefault("jitter_monotone", PropertyResult())
    values = list(curve.values())
    for i in range(1, len(values)):
        mono.record(values[i] < values[i - 1], seed)

    wrong = props.setdefault("wrong_index_zero", PropertyResult())
    card = props.setdefault("cardinality_penalty", PropertyResult())
    perm = props.setdefault("permutation_invariance", PropertyResult())
    oracle = props.setdefault("oracle_equivalence", PropertyResult())
    fmt = props.setdefault("corrupt_format_zero", PropertyResult())

    for case in range(n_cases):
        case_seed = seed * 1_000_003 + case
        rng = np.random.default_rng([seed, 20, case])

        single = random_targets(rng, 1)
        b = total_reward(perturb_response(single, PerturbationSpec(WRONG_INDEX, seed=case_seed), 3), single)
        wrong.record(b.r_miou == 0.0 and b.r_format == 1, case_seed)

        gts = random_targets(rng, int(rng.integers(1, 5)))
        dup = total_reward(perturb_response(gts, PerturbationSpec(DUPLICATE_TARGET, seed=case_seed), 3), gts)
        clean, _ = r_miou(gts, gts)
        card.record(dup.r_format == 1 and dup.r_miou < clean, case_seed)

        preds, gts = random_pair(rng)
        base, _ = r_miou(preds, gts)
        shuffled_p = [preds[int(i)] for i in rng.permutation(len(preds))]
        shuffled_g = [gts[int(i)] for i in rng.permutation(len(gts))]
        again, _ = r_miou(shuffled_p, shuffled_g)
        perm.record(abs(base - again) <= 1e-12, case_seed)
        oracle.record(abs(base - exhaustive_r_miou(preds, gts)) <= 1e-9, case_seed)

        mode = CORRUPT_MODES[case % len(CORRUPT_MODES)]
        bad = total_reward(perturb_response(gts, PerturbationSpec(CORRUPT_FORMAT, mode=mode), 3), gts)
        fmt.record(bad.r_format == 0 and bad.total == 0.0, case_seed)
    return report
