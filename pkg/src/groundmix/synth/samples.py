"""Target tuples and the multi-image sample record shared by both synthesis branches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..geometry import Box, as_box
from ..io import SAMPLE_SCHEMA, check_schema

INTER = "inter"
INTRA = "intra"
BRANCHES = (INTER, INTRA)


@dataclass(frozen=True)
class TargetTuple:
    img_idx: int
    label: str
    bbox: Box

    def to_dict(self) -> dict:
        return {"img_idx": self.img_idx, "label": self.label, "bbox_2d": list(self.bbox)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TargetTuple":
        idx = d["img_idx"]
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise ValueError(f"invalid img_idx {idx!r}")
        return cls(idx, str(d["label"]), as_box(d["bbox_2d"]))


def targets_from_dicts(items: Sequence[Mapping]) -> list[TargetTuple]:
    return [TargetTuple.from_dict(d) for d in items]


@dataclass(frozen=True)
class ImageSlot:
    """One image position of a sample: a source image or a crop of it."""

    image: str
    instance_id: str
    width: int
    height: int
    view: str = "original"
    crop: tuple[int, int, int, int] | None = None  # x, y, w, h in source pixels

    def to_dict(self) -> dict:
        return {
            "image": self.image,
            "instance_id": self.instance_id,
            "width": self.width,
            "height": self.height,
            "view": self.view,
            "crop": None if self.crop is None else list(self.crop),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ImageSlot":
        crop = d.get("crop")
        return cls(
            image=str(d["image"]),
            instance_id=str(d["instance_id"]),
            width=int(d["width"]),
            height=int(d["height"]),
            view=str(d.get("view", "original")),
            crop=None if crop is None else tuple(int(v) for v in crop),
        )


@dataclass(frozen=True)
class MultiImageSample:
    sample_id: str
    branch: str
    slots: tuple[ImageSlot, ...]
    query: str
    targets: tuple[TargetTuple, ...]
    template_id: str
    seed_trace: tuple[int, ...] = ()
    geometry: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}")
        k = len(self.slots)
        for t in self.targets:
            if not 0 <= t.img_idx < k:
                raise ValueError(f"target img_idx {t.img_idx} out of range for {k} slots")

    @property
    def num_images(self) -> int:
        return len(self.slots)

    def to_dict(self) -> dict:
        d = {
            "schema": SAMPLE_SCHEMA,
            "sample_id": self.sample_id,
            "branch": self.branch,
            "slots": [s.to_dict() for s in self.slots],
            "query": self.query,
            "targets": [t.to_dict() for t in self.targets],
            "template_id": self.template_id,
            "seed_trace": list(self.seed_trace),
        }
        if self.geometry is not None:
            d["geometry"] = self.geometry
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "MultiImageSample":
        check_schema(d, SAMPLE_SCHEMA)
        return cls(
            sample_id=str(d["sample_id"]),
            branch=str(d["branch"]),
            slots=tuple(ImageSlot.from_dict(s) for s in d["slots"]),
            query=str(d["query"]),
            targets=tuple(targets_from_dicts(d["targets"])),
            template_id=str(d.get("template_id", "")),
            seed_trace=tuple(int(v) for v in d.get("seed_trace", ())),
            geometry=d.get("geometry"),
        )
