"""Cut crop views out of source images so samples can be fed to a model."""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path
from typing import Iterable, Iterator

from PIL import Image

from .samples import MultiImageSample


def materialize(
    samples: Iterable[MultiImageSample], image_root: str | Path, out_dir: str | Path
) -> Iterator[MultiImageSample]:
    """Write every crop slot to ``out_dir`` and yield samples pointing at the files.

    Original-view slots keep referencing the source image. Crop files are PNG,
    named ``<sample_id>_<slot>.png``. Image paths in the yielded samples are
    relative to ``out_dir`` so the output directory can be moved as a whole.
    """
    image_root, out_dir = Path(image_root), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sample in samples:
        slots = []
        for i, slot in enumerate(sample.slots):
            src = image_root / slot.image
            if slot.crop is None:
                slots.append(dataclasses.replace(slot, image=Path(os.path.relpath(src, out_dir)).as_posix()))
                continue
            x, y, w, h = slot.crop
            with Image.open(src) as im:
                if im.width < x + w or im.height < y + h:
                    raise ValueError(f"{src}: image {im.size} smaller than crop {slot.crop}")
                view = im.crop((x, y, x + w, y + h))
                dest = out_dir / f"{sample.sample_id}_{i}.png"
                view.save(dest)
            slots.append(dataclasses.replace(slot, image=dest.name))
        yield dataclasses.replace(sample, slots=tuple(slots))
