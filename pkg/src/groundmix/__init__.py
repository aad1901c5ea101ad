"""Multi-image grounding data synthesis and rule-based spatial rewards."""

from .geometry import Box, CropRegion, ImageDims, PixelBox, iou, normalize_box, remap_box, validate_box
from .grpo import GrpoConfig, RolloutGroup, group_advantages, group_objective
from .ingest import GroundingInstance, GroundingPool, build_pool
from .parsing import ViolationCode, parse_response
from .reward import RewardBreakdown, match_group, r_miou, total_reward
from .synth.inter import synth_inter_dataset
from .synth.intra import synth_intra_dataset
from .synth.samples import MultiImageSample, TargetTuple

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CropRegion",
    "GroundingInstance",
    "GroundingPool",
    "GrpoConfig",
    "ImageDims",
    "MultiImageSample",
    "PixelBox",
    "RewardBreakdown",
    "RolloutGroup",
    "TargetTuple",
    "ViolationCode",
    "build_pool",
    "group_advantages",
    "group_objective",
    "iou",
    "match_group",
    "normalize_box",
    "parse_response",
    "r_miou",
    "remap_box",
    "synth_inter_dataset",
    "synth_intra_dataset",
    "total_reward",
    "validate_box",
]
