"""
Rule-based spatial reward.

``total = r_miou + r_format``, where ``r_format`` is 1 iff the response parses
cleanly and ``r_miou`` is the IoU sum of an optimal one-to-one matching between
predicted and ground-truth boxes, restricted to equal image indices and
divided by the larger of the two set sizes.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .geometry import Box, iou
from .parsing import Violation, parse_response
from .synth.samples import TargetTuple

_TOL = 1e-9


def _hungarian(profit: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Maximum-profit assignment on a square matrix.

    Shortest augmenting path formulation with row/column potentials. Returns the
    column assigned to each row together with the (minimisation) potentials,
    which certify optimality: ``u[i] + v[j] <= -profit[i][j]`` with equality on
    every optimal pair.
    """
    n = len(profit)
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row matched to column j (1-based, 0 = none)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = inf, 0
            row = profit[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = -row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign, u[1:], v[1:]


def _lexicographic_optimum(profit: list[list[float]]) -> list[int]:
    """Among all optimal assignments, the one with the smallest column sequence by row.

    Optimal assignments are exactly the perfect matchings of the tight-edge
    graph under optimal potentials, so the tie-break is a greedy search over
    that graph with a perfect-matching feasibility check per step.
    """
    n = len(profit)
    _, u, v = _hungarian(profit)
    tight = [[j for j in range(n) if abs(-profit[i][j] - u[i] - v[j]) <= _TOL] for i in range(n)]

    def completable(fixed: list[int]) -> bool:
        rows = range(len(fixed), n)
        taken = set(fixed)
        match: dict[int, int] = {}

        def augment(i, seen):
            for j in tight[i]:
                if j in taken or j in seen:
                    continue
                seen.add(j)
                if j not in match or augment(match[j], seen):
                    match[j] = i
                    return True
            return False

        return all(augment(i, set()) for i in rows)

    chosen: list[int] = []
    for i in range(n):
        for j in tight[i]:
            if j in chosen:
                continue
            if completable(chosen + [j]):
                chosen.append(j)
                break
        else:  # pragma: no cover - tight graph always has a perfect matching
            raise RuntimeError("tie-break search failed")
    return chosen


@dataclass(frozen=True)
class GroupMatch:
    pairs: tuple[tuple[int, int, float], ...]  # (pred ordinal, gt ordinal, iou) within the group
    total: float


def match_group(preds: Sequence[Box], gts: Sequence[Box]) -> GroupMatch:
    """Maximum-total-IoU one-to-one matching between two box lists.

    Sets may differ in size; the smaller side is fully matched (possibly with
    zero-IoU pairs). Among optimal matchings the lexicographically smallest
    ``(pred, gt)`` pairing is returned.
    """
    n_p, n_g = len(preds), len(gts)
    if n_p == 0 or n_g == 0:
        return GroupMatch((), 0.0)
    n = max(n_p, n_g)
    profit = [[0.0] * n for _ in range(n)]
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            profit[i][j] = iou(p, g)
    if n == 1:
        assign = [0]
    else:
        assign = _lexicographic_optimum(profit)
    pairs = tuple((i, j, profit[i][j]) for i, j in enumerate(assign) if i < n_p and j < n_g)
    return GroupMatch(pairs, sum(x for _, _, x in pairs))


@dataclass
class MatchDetail:
    # img_idx -> [(prediction ordinal, ground-truth ordinal, iou)], ordinals index the full C / S
    pairs: dict[int, list[tuple[int, int, float]]] = field(default_factory=dict)
    unmatched_predictions: list[int] = field(default_factory=list)
    unmatched_ground_truth: list[int] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.pairs or self.unmatched_predictions or self.unmatched_ground_truth)

    def to_dict(self) -> dict:
        return {
            "pairs": {str(k): [list(p) for p in v] for k, v in sorted(self.pairs.items())},
            "unmatched_predictions": self.unmatched_predictions,
            "unmatched_ground_truth": self.unmatched_ground_truth,
        }


def r_miou(predictions: Sequence[TargetTuple], ground_truth: Sequence[TargetTuple]) -> tuple[float, MatchDetail]:
    """Source-aware set-wise IoU in [0, 1] with its matching detail."""
    if not ground_truth:
        raise ValueError("ground truth must contain at least one target")
    by_idx_p: dict[int, list[int]] = defaultdict(list)
    by_idx_g: dict[int, list[int]] = defaultdict(list)
    for i, p in enumerate(predictions):
        by_idx_p[p.img_idx].append(i)
    for j, g in enumerate(ground_truth):
        by_idx_g[g.img_idx].append(j)

    detail = MatchDetail()
    matched_p, matched_g = set(), set()
    total = 0.0
    for k in sorted(set(by_idx_p) & set(by_idx_g)):
        ps, gs = by_idx_p[k], by_idx_g[k]
        m = match_group([predictions[i].bbox for i in ps], [ground_truth[j].bbox for j in gs])
        detail.pairs[k] = [(ps[a], gs[b], x) for a, b, x in m.pairs]
        matched_p.update(ps[a] for a, _, _ in m.pairs)
        matched_g.update(gs[b] for _, b, _ in m.pairs)
        total += m.total
    detail.unmatched_predictions = [i for i in range(len(predictions)) if i not in matched_p]
    detail.unmatched_ground_truth = [j for j in range(len(ground_truth)) if j not in matched_g]
    return total / max(len(predictions), len(ground_truth)), detail


@dataclass
class RewardBreakdown:
    r_miou: float
    r_format: int
    match: MatchDetail = field(default_factory=MatchDetail)
    violations: list[Violation] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.r_miou + self.r_format

    def to_dict(self) -> dict:
        return {
            "r_miou": self.r_miou,
            "r_format": self.r_format,
            "total": self.total,
            "diagnostics": [v.to_dict() for v in self.violations],
        }


def total_reward(response: str, ground_truth: Sequence[TargetTuple], num_images: int | None = None) -> RewardBreakdown:
    """Score one response against its ground truth; never raises on bad responses.

    ``num_images`` is accepted for the scoring protocol but deliberately not
    used: an out-of-range image index simply earns no spatial credit.
    """
    if not ground_truth:
        raise ValueError("ground truth must contain at least one target")
    parsed = parse_response(response)
    if not parsed.valid:
        return RewardBreakdown(0.0, 0, MatchDetail(), parsed.violations)
    score, detail = r_miou(parsed.targets, ground_truth)
    return RewardBreakdown(score, 1, detail, [])
