"""Multi-image sample synthesis: inter-image and intra-image contrast branches."""

from .inter import compose_inter_sample, sample_orthogonal, synth_inter_dataset
from .intra import compose_intra_sample, sample_crop_region, synth_intra_dataset
from .samples import INTER, INTRA, ImageSlot, MultiImageSample, TargetTuple
from .templates import Template, TemplatePool

__all__ = [
    "INTER",
    "INTRA",
    "ImageSlot",
    "MultiImageSample",
    "TargetTuple",
    "Template",
    "TemplatePool",
    "compose_inter_sample",
    "compose_intra_sample",
    "sample_crop_region",
    "sample_orthogonal",
    "synth_inter_dataset",
    "synth_intra_dataset",
]
