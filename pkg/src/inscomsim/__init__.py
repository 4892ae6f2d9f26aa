"""Desk-scale simulator for instance-filtered image transmission over an
AWGN channel with a variable-rate block codec."""

from .channel import ChannelConfig, equalize, noise_sigma, transmit
from .codec import (
    BlockLatents,
    RateAllocation,
    RateConfig,
    SymbolFrame,
    allocate,
    analysis,
    decode,
    encode,
    synthesize,
)
from .filtering import (
    Mask,
    TaskCriteria,
    compose_and_apply,
    critical_instances,
    filter_instance,
    filter_semantic,
    instance_mask,
    semantic_mask,
)
from .metrics import TrialResult, account, mse_tc, psnr, tc_psnr
from .pipeline import SweepConfig, build_task_mask, run_pipeline, run_trial, sweep
from .scene import (
    Image,
    Instance,
    SceneGraph,
    SegmentationMap,
    Triplet,
    ValidationReport,
    lookup_instance,
    validate_scene,
)
from .synth import SyntheticSpec, gen_synthetic

__version__ = "0.1.0"

__all__ = [
    "BlockLatents",
    "ChannelConfig",
    "Image",
    "Instance",
    "Mask",
    "RateAllocation",
    "RateConfig",
    "SceneGraph",
    "SegmentationMap",
    "SweepConfig",
    "SymbolFrame",
    "SyntheticSpec",
    "TaskCriteria",
    "TrialResult",
    "Triplet",
    "ValidationReport",
    "account",
    "allocate",
    "analysis",
    "build_task_mask",
    "compose_and_apply",
    "critical_instances",
    "decode",
    "encode",
    "equalize",
    "filter_instance",
    "filter_semantic",
    "gen_synthetic",
    "instance_mask",
    "lookup_instance",
    "mse_tc",
    "noise_sigma",
    "psnr",
    "run_pipeline",
    "run_trial",
    "semantic_mask",
    "sweep",
    "synthesize",
    "tc_psnr",
    "transmit",
    "validate_scene",
]
