"""
Parsing of think-then-answer responses.

A valid response is ``<think>...</think>`` followed by ``<answer>...</answer>``
with nothing but whitespace around or between them. The answer holds one JSON
object or a JSON array of objects, each with exactly ``img_idx``, ``label`` and
``bbox_2d``.

Parsing never raises: problems are reported as ``Violation`` entries whose codes
are a stable external contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from numbers import Real
from typing import Any, Sequence

from .geometry import DEGENERATE, NON_INTEGRAL, OUT_OF_RANGE, Box, validate_box
from .synth.samples import TargetTuple

REQUIRED_FIELDS = ("img_idx", "label", "bbox_2d")

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
ANSWER_OPEN, ANSWER_CLOSE = "<answer>", "</answer>"


class ViolationCode(str, Enum):
    MISSING_THINK_TAGS = "missing-think-tags"
    MISSING_ANSWER_TAGS = "missing-answer-tags"
    TRAILING_CONTENT = "trailing-content"
    UNPARSEABLE_ANSWER = "unparseable-answer"
    MISSING_FIELD = "missing-field"
    MALFORMED_FIELD = "malformed-field"
    DEGENERATE_BOX = "degenerate-box"
    OUT_OF_RANGE_COORDINATE = "out-of-range-coordinate"
    NEGATIVE_INDEX = "negative-index"


VIOLATION_DESCRIPTIONS = {
    ViolationCode.MISSING_THINK_TAGS: "think segment absent, repeated, unclosed, or not first",
    ViolationCode.MISSING_ANSWER_TAGS: "answer segment absent, repeated or unclosed",
    ViolationCode.TRAILING_CONTENT: "non-whitespace text outside the think and answer segments",
    ViolationCode.UNPARSEABLE_ANSWER: "answer is not a JSON object or array of objects",
    ViolationCode.MISSING_FIELD: "target lacks img_idx, label or bbox_2d",
    ViolationCode.MALFORMED_FIELD: "field has the wrong type/shape, or the target has extra fields",
    ViolationCode.DEGENERATE_BOX: "bbox_2d does not satisfy x2 > x1 and y2 > y1",
    ViolationCode.OUT_OF_RANGE_COORDINATE: "a bbox_2d coordinate lies outside [0, 1000)",
    ViolationCode.NEGATIVE_INDEX: "img_idx is negative",
}


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    target: int | None = None  # ordinal of the offending answer object
    detail: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code.value, "target": self.target, "detail": self.detail}


@dataclass
class Candidate:
    """Raw field values of one answer object, before structural checks."""

    img_idx: Any
    label: Any
    bbox_2d: Any


@dataclass
class ParsedResponse:
    think: str | None = None
    answer: str | None = None
    candidates: list[Candidate] | None = None
    targets: list[TargetTuple] | None = None
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code.value for v in self.violations]


def split_response(text: str) -> tuple[str, str] | list[Violation]:
    """Return ``(think, answer)`` inner texts, or the list of tag violations."""
    if not isinstance(text, str):
        return [Violation(ViolationCode.MISSING_THINK_TAGS, detail="response is not text")]
    violations = []
    spans = {}
    for name, open_tag, close_tag, code in (
        ("think", THINK_OPEN, THINK_CLOSE, ViolationCode.MISSING_THINK_TAGS),
        ("answer", ANSWER_OPEN, ANSWER_CLOSE, ViolationCode.MISSING_ANSWER_TAGS),
    ):
        n_open, n_close = text.count(open_tag), text.count(close_tag)
        if n_open != 1 or n_close != 1:
            violations.append(Violation(code, detail=f"{open_tag} x{n_open}, {close_tag} x{n_close}"))
            continue
        start, end = text.index(open_tag), text.index(close_tag)
        if end < start:
            violations.append(Violation(code, detail=f"{close_tag} before {open_tag}"))
            continue
        spans[name] = (start, end + len(close_tag))
    if violations:
        return violations

    (t0, t1), (a0, a1) = spans["think"], spans["answer"]
    if a0 < t1:
        # answer first, or one segment nested inside the other
        return [Violation(ViolationCode.MISSING_THINK_TAGS, detail="think segment must precede the answer")]
    outside = text[:t0] + text[t1:a0] + text[a1:]
    if outside.strip():
        return [Violation(ViolationCode.TRAILING_CONTENT, detail=repr(outside.strip()[:40]))]
    think = text[t0 + len(THINK_OPEN) : t1 - len(THINK_CLOSE)]
    answer = text[a0 + len(ANSWER_OPEN) : a1 - len(ANSWER_CLOSE)]
    return think, answer


def _reject_constant(name):
    raise ValueError(f"non-JSON constant {name}")


def parse_answer(answer: str) -> list[Candidate] | list[Violation]:
    """Parse the answer segment into raw candidates.

    Field-level problems of every object are aggregated; if any exist, the
    violations are returned instead of candidates.
    """
    try:
        data = json.loads(answer, parse_constant=_reject_constant)
    except (ValueError, RecursionError) as exc:
        return [Violation(ViolationCode.UNPARSEABLE_ANSWER, detail=str(exc)[:80])]
    if isinstance(data, dict):
        items = [data]
    elif isinstance(data, list) and all(isinstance(x, dict) for x in data):
        items = data
    else:
        return [Violation(ViolationCode.UNPARSEABLE_ANSWER, detail="expected an object or a list of objects")]

    violations, candidates = [], []
    for i, obj in enumerate(items):
        missing = [f for f in REQUIRED_FIELDS if f not in obj]
        extra = sorted(set(obj) - set(REQUIRED_FIELDS))
        if missing:
            violations.append(Violation(ViolationCode.MISSING_FIELD, i, ",".join(missing)))
        if extra:
            violations.append(Violation(ViolationCode.MALFORMED_FIELD, i, "extra fields " + ",".join(extra)))
        if "img_idx" in obj and not _is_int(obj["img_idx"]):
            violations.append(Violation(ViolationCode.MALFORMED_FIELD, i, "img_idx must be an integer"))
        if "label" in obj and not (isinstance(obj["label"], str) and obj["label"].strip()):
            violations.append(Violation(ViolationCode.MALFORMED_FIELD, i, "label must be non-empty text"))
        if "bbox_2d" in obj and not _is_box_shape(obj["bbox_2d"]):
            violations.append(Violation(ViolationCode.MALFORMED_FIELD, i, "bbox_2d must be 4 numbers"))
        if not missing:
            candidates.append(Candidate(obj["img_idx"], obj["label"], obj["bbox_2d"]))
    return violations or candidates


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_box_shape(v) -> bool:
    return (
        isinstance(v, list)
        and len(v) == 4
        and all(isinstance(c, Real) and not isinstance(c, bool) and (isinstance(c, int) or math.isfinite(c)) for c in v)
    )


_BOX_REASON_CODES = {
    NON_INTEGRAL: ViolationCode.MALFORMED_FIELD,
    OUT_OF_RANGE: ViolationCode.OUT_OF_RANGE_COORDINATE,
    DEGENERATE: ViolationCode.DEGENERATE_BOX,
}


def check_structural_validity(candidates: Sequence[Candidate]) -> list[TargetTuple] | list[Violation]:
    """All-or-nothing box and index checks over parsed candidates."""
    violations, targets = [], []
    for i, c in enumerate(candidates):
        ok = True
        if c.img_idx < 0:
            violations.append(Violation(ViolationCode.NEGATIVE_INDEX, i, str(c.img_idx)))
            ok = False
        verdict = validate_box(c.bbox_2d)
        for reason in verdict.reasons:
            code = _BOX_REASON_CODES.get(reason, ViolationCode.MALFORMED_FIELD)
            violations.append(Violation(code, i, f"bbox_2d {c.bbox_2d}: {reason}"))
            ok = False
        if ok:
            targets.append(TargetTuple(c.img_idx, c.label, Box(*(int(v) for v in c.bbox_2d))))
    return violations or targets


def parse_response(text: str) -> ParsedResponse:
    """Run every stage; the result is valid iff it carries no violations."""
    out = ParsedResponse()
    split = split_response(text)
    if isinstance(split, list):
        out.violations = split
        return out
    out.think, out.answer = split
    parsed = parse_answer(out.answer)
    if parsed and isinstance(parsed[0], Violation):
        out.violations = parsed
        return out
    out.candidates = parsed
    checked = check_structural_validity(parsed)
    if checked and isinstance(checked[0], Violation):
        out.violations = checked
        return out
    out.targets = checked
    return out


def render_answer(targets: Sequence[TargetTuple]) -> str:
    return json.dumps([t.to_dict() for t in targets], ensure_ascii=False)


def render_response(think: str, targets: Sequence[TargetTuple]) -> str:
    return f"{THINK_OPEN}{think}{THINK_CLOSE}{ANSWER_OPEN}{render_answer(targets)}{ANSWER_CLOSE}"
