"""
Conversion of heterogeneous source annotations into a unified grounding pool.

A source record is one image with one or more ``(label, box, convention)``
annotations. Boxes are converted to xyxy pixels, clipped to the image,
normalized to the grid and dropped if they do not survive. Images whose short
edge is below ``min_edge`` are filtered out.
"""

from __future__ import annotations

import logging
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .geometry import Box, GeometryError, ImageDims, PixelBox, normalize_box
from .io import POOL_SCHEMA, SOURCE_SCHEMA, check_schema

logger = logging.getLogger(__name__)

DEFAULT_MIN_EDGE = 640
CONVENTIONS = ("xyxy-pixel", "xywh-pixel")

# drop reasons reported by build_pool
MALFORMED = "malformed-record"
NO_VALID_ANNOTATIONS = "no-valid-annotations"
BELOW_MIN_EDGE = "below-min-edge"
DUPLICATE_ID = "duplicate-id"


class IngestError(ValueError):
    """A source record cannot be interpreted (unknown convention, missing dims, ...)."""


class Rejection(Exception):
    """A well-formed record that yields no usable instance."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def normalize_label(label: str) -> str:
    """Canonical form used for all label comparisons."""
    return unicodedata.normalize("NFKC", label).casefold().strip()


@dataclass(frozen=True)
class SourceAnnotation:
    label: str
    box: tuple[float, float, float, float]
    convention: str = "xyxy-pixel"


@dataclass(frozen=True)
class SourceRecord:
    dataset: str
    image: str
    dims: ImageDims
    annotations: tuple[SourceAnnotation, ...]
    record_id: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping) -> "SourceRecord":
        check_schema(d, SOURCE_SCHEMA)
        try:
            width, height = int(d["width"]), int(d["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"missing or invalid image dims: {exc}") from exc
        if width < 1 or height < 1:
            raise IngestError(f"non-positive image dims {width}x{height}")
        if "image" not in d:
            raise IngestError("missing image reference")
        default_conv = d.get("convention", "xyxy-pixel")
        anns = []
        for raw in d.get("annotations") or ():
            try:
                label = raw["label"]
                box = tuple(float(v) for v in raw["box"])
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"malformed annotation {raw!r}") from exc
            if not isinstance(label, str) or len(box) != 4:
                raise IngestError(f"malformed annotation {raw!r}")
            conv = raw.get("convention", default_conv)
            if conv not in CONVENTIONS:
                raise IngestError(f"unknown box convention {conv!r}")
            anns.append(SourceAnnotation(label, box, conv))
        if not anns:
            raise IngestError("record has no annotations")
        rid = d.get("id")
        return cls(
            dataset=str(d.get("dataset", "unknown")),
            image=str(d["image"]),
            dims=ImageDims(width, height),
            annotations=tuple(anns),
            record_id=None if rid is None else str(rid),
        )


@dataclass(frozen=True)
class Annotation:
    label: str
    pixel_box: PixelBox
    box: Box

    @property
    def key(self) -> str:
        return normalize_label(self.label)


@dataclass(frozen=True)
class GroundingInstance:
    instance_id: str
    image: str
    dims: ImageDims
    annotations: tuple[Annotation, ...]
    dataset: str = "unknown"

    @property
    def label_keys(self) -> frozenset[str]:
        return frozenset(a.key for a in self.annotations)

    def to_dict(self) -> dict:
        return {
            "schema": POOL_SCHEMA,
            "id": self.instance_id,
            "dataset": self.dataset,
            "image": self.image,
            "width": self.dims.width,
            "height": self.dims.height,
            "annotations": [
                {"label": a.label, "pixel_box": list(a.pixel_box), "bbox_2d": list(a.box)}
                for a in self.annotations
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundingInstance":
        check_schema(d, POOL_SCHEMA)
        return cls(
            instance_id=str(d["id"]),
            image=str(d["image"]),
            dims=ImageDims(int(d["width"]), int(d["height"])),
            annotations=tuple(
                Annotation(a["label"], PixelBox(*map(float, a["pixel_box"])), Box(*map(int, a["bbox_2d"])))
                for a in d["annotations"]
            ),
            dataset=str(d.get("dataset", "unknown")),
        )


def _to_xyxy(box, convention: str) -> PixelBox:
    if convention == "xyxy-pixel":
        return PixelBox(*box)
    if convention == "xywh-pixel":
        x, y, w, h = box
        return PixelBox(x, y, x + w, y + h)
    raise IngestError(f"unknown box convention {convention!r}")


def unify_record(record: SourceRecord | Mapping, instance_id: str | None = None) -> GroundingInstance:
    """Convert one source record into a grounding instance.

    Annotations that are degenerate (before or after normalization) are dropped;
    raises ``Rejection`` if none survive and ``IngestError`` for malformed input.
    """
    if not isinstance(record, SourceRecord):
        record = SourceRecord.from_dict(record)
    width, height = record.dims
    kept = []
    for ann in record.annotations:
        px = _to_xyxy(ann.box, ann.convention)
        # source boxes often overshoot the border by a fraction of a pixel
        px = PixelBox(
            min(max(px.x1, 0.0), width),
            min(max(px.y1, 0.0), height),
            min(max(px.x2, 0.0), width),
            min(max(px.y2, 0.0), height),
        )
        try:
            box = normalize_box(px, record.dims)
        except GeometryError as exc:
            logger.debug("dropping annotation %r of %s: %s", ann.label, record.image, exc)
            continue
        if not ann.label.strip():
            continue
        kept.append(Annotation(ann.label, px, box))
    if not kept:
        raise Rejection(NO_VALID_ANNOTATIONS, record.image)
    return GroundingInstance(
        instance_id=instance_id or record.record_id or record.image,
        image=record.image,
        dims=record.dims,
        annotations=tuple(kept),
        dataset=record.dataset,
    )


def filter_instance(instance: GroundingInstance, min_edge: int = DEFAULT_MIN_EDGE) -> str | None:
    """Return ``None`` to keep the instance, otherwise the drop reason (boundary inclusive)."""
    if min(instance.dims) < min_edge:
        return BELOW_MIN_EDGE
    return None


@dataclass
class GroundingPool:
    instances: list[GroundingInstance] = field(default_factory=list)

    def __post_init__(self):
        ids = [g.instance_id for g in self.instances]
        if len(set(ids)) != len(ids):
            dup = next(i for i, c in Counter(ids).items() if c > 1)
            raise ValueError(f"duplicate instance id {dup!r}")
        self._by_label: dict[str, list[str]] = defaultdict(list)
        self._by_id = {g.instance_id: g for g in self.instances}
        for g in self.instances:
            for key in sorted(g.label_keys):
                self._by_label[key].append(g.instance_id)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[GroundingInstance]:
        return iter(self.instances)

    def __getitem__(self, idx: int) -> GroundingInstance:
        return self.instances[idx]

    def get(self, instance_id: str) -> GroundingInstance:
        return self._by_id[instance_id]

    def with_label(self, label: str) -> list[str]:
        """Ids of instances carrying an annotation with this label (normalized exact match)."""
        return list(self._by_label.get(normalize_label(label), ()))

    @property
    def labels(self) -> list[str]:
        return sorted(self._by_label)

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "GroundingPool":
        return cls([GroundingInstance.from_dict(r) for r in records])

    def to_records(self) -> Iterator[dict]:
        for g in self.instances:
            yield g.to_dict()


@dataclass
class IngestReport:
    total: int = 0
    kept: int = 0
    dropped: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {"total": self.total, "kept": self.kept, "dropped": dict(sorted(self.dropped.items()))}


def build_pool(
    records: Iterable[SourceRecord | Mapping], min_edge: int = DEFAULT_MIN_EDGE
) -> tuple[GroundingPool, IngestReport]:
    """Unify and filter a stream of source records.

    Records without an explicit id get ``<dataset>-<ordinal>``. The pool is
    ordered by instance id so that the result does not depend on input order
    beyond id assignment.
    """
    report = IngestReport()
    by_id: dict[str, GroundingInstance] = {}
    for ordinal, raw in enumerate(records):
        report.total += 1
        try:
            rec = raw if isinstance(raw, SourceRecord) else SourceRecord.from_dict(raw)
            default_id = f"{rec.dataset}-{ordinal:08d}"
            inst = unify_record(rec, instance_id=rec.record_id or default_id)
        except (IngestError, ValueError, TypeError) as exc:
            report.dropped[MALFORMED] += 1
            logger.debug("record %d malformed: %s", ordinal, exc)
            continue
        except Rejection as rej:
            report.dropped[rej.reason] += 1
            continue
        reason = filter_instance(inst, min_edge)
        if reason is not None:
            report.dropped[reason] += 1
            continue
        if inst.instance_id in by_id:
            report.dropped[DUPLICATE_ID] += 1
            continue
        by_id[inst.instance_id] = inst
        report.kept += 1
    pool = GroundingPool([by_id[k] for k in sorted(by_id)])
    return pool, report
