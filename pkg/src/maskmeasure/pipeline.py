"""End-to-end composition: refine -> skeleton -> segments -> measurement.

Errors raised inside a stage are re-raised as StageError so callers (and
the CLI) can attribute failures to the stage that produced them.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, PipelineError, StageError
from .grasp import (DEFAULT_SMOOTHING_WINDOW, DEFAULT_TOP_K, GraspWeights,
                    stability_scores, top_k)
from .mask_ops import MaskConfig, as_mask, refine
from .project import CameraIntrinsics, MeasurementReport, build_report
from .segments import SamplingConfig, StationSegment, extract_segments
from .skeleton import Skeleton, construct_general, construct_rod

GEOMETRY_MODES = ("rod", "general")


@dataclass
class RunConfig:
    geometry: str = "rod"
    mask: MaskConfig = field(default_factory=MaskConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    weights: GraspWeights = field(default_factory=GraspWeights)
    window: int = DEFAULT_SMOOTHING_WINDOW
    top_k: int = DEFAULT_TOP_K
    overlay: bool = False

    def __post_init__(self):
        if self.geometry not in GEOMETRY_MODES:
            raise ValueError(f"geometry must be one of {GEOMETRY_MODES}")


@dataclass
class PipelineResult:
    """Report plus the intermediates useful for overlays and diagnostics."""

    report: MeasurementReport
    refined_mask: np.ndarray
    skeleton: Skeleton
    segments: list[StationSegment]


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError as exc:
        raise StageError(name, exc) from exc


def run_measure(mask: np.ndarray, depth: np.ndarray, intr: CameraIntrinsics,
                cfg: RunConfig | None = None) -> PipelineResult:
    """Run the full measurement pipeline on in-memory arrays."""
    cfg = cfg or RunConfig()
    mask = as_mask(mask)
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != mask.shape:
        raise DimensionMismatchError(
            f"mask is {mask.shape[1]}x{mask.shape[0]} but depth is "
            f"{depth.shape[1]}x{depth.shape[0]}")
    refined = _stage("mask_ops", refine, mask, cfg.mask)
    build = construct_rod if cfg.geometry == "rod" else construct_general
    skel = _stage("skeleton", build, refined)
    segs = _stage("segments", extract_segments, skel, refined, depth,
                  cfg.sampling)
    report = _stage("project", build_report, segs, intr)
    return PipelineResult(report=report, refined_mask=refined, skeleton=skel,
                          segments=segs)


def run_grasp(mask: np.ndarray, depth: np.ndarray, intr: CameraIntrinsics,
              cfg: RunConfig | None = None):
    """Measurement pipeline followed by grasp ranking; returns
    (PipelineResult, ranked top-k candidates)."""
    cfg = cfg or RunConfig()
    result = run_measure(mask, depth, intr, cfg)
    ranked = _stage("grasp", stability_scores, result.report, cfg.weights,
                    cfg.window)
    return result, top_k(ranked, cfg.top_k)
