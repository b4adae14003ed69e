"""Grasp candidate scoring for a parallel gripper.

Every measured station is a candidate grip: its chord endpoints are the
finger contact points. The stability score blends a force-closure proxy
(thin grips near the center of gravity are easier to hold) with a
form-closure indicator (the grip sits in a concave waist of the diameter
profile):

    S = w1 * (1 - d_hat) + w2 * (1 - p_hat) + w3 * cond

with d_hat the min-max normalized grip diameter, p_hat the normalized
distance from the grip segment to the CoG, and cond a 0/1 concavity flag.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import ConfigError, TooFewStationsError
from .project import MeasurementReport

log = logging.getLogger(__name__)

DEFAULT_WEIGHTS = (0.35, 0.35, 0.30)
DEFAULT_SMOOTHING_WINDOW = 5
DEFAULT_TOP_K = 7

WEIGHT_SUM_TOL = 1e-9


@dataclass
class GraspWeights:
    w1: float = DEFAULT_WEIGHTS[0]
    w2: float = DEFAULT_WEIGHTS[1]
    w3: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise ConfigError("grasp weights must be non-negative")
        if abs(self.w1 + self.w2 + self.w3 - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(
                f"grasp weights must sum to 1, got {self.w1 + self.w2 + self.w3}")


@dataclass
class GraspCandidate:
    station_index: int
    score: float
    d_hat: float
    p_hat: float
    cond: int
    grip_points3d: np.ndarray   # (2, 3) finger contact points


def center_of_gravity(report: MeasurementReport) -> np.ndarray:
    """Uniform-density centroid of the frustum stack.

    Each slice between consecutive stations is weighted by its frustum
    volume and located at the midpoint of the two station midpoints; slices
    touching a degenerate (zero-diameter) station are skipped, matching the
    volume computation.
    """
    mids = report.midpoints3d
    diams = report.diameters
    if len(mids) < 2:
        raise TooFewStationsError("center of gravity needs >= 2 stations")
    total_v = 0.0
    weighted = np.zeros(3)
    for k in range(len(mids) - 1):
        da, db = diams[k], diams[k + 1]
        if da <= 0.0 or db <= 0.0:
            continue
        lk = float(np.linalg.norm(mids[k + 1] - mids[k]))
        vk = (np.pi / 3.0) * lk * ((da / 2) ** 2 + da * db / 4 + (db / 2) ** 2)
        weighted += vk * (mids[k] + mids[k + 1]) / 2.0
        total_v += vk
    if total_v <= 0.0:
        # fully degenerate profile: fall back to the unweighted midpoint mean
        return mids.mean(axis=0)
    return weighted / total_v


def concavity_condition(diams: np.ndarray,
                        window: int = DEFAULT_SMOOTHING_WINDOW) -> np.ndarray:
    """0/1 flag per station: 1 where the moving-average-smoothed diameter
    profile attains a strict local minimum within the window.

    Plateau minima contribute a single flag at the station nearest the
    plateau center. Stations within half a window of either end get 0.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    diams = np.asarray(diams, dtype=np.float64)
    n = len(diams)
    cond = np.zeros(n, dtype=np.int64)
    if n < 3:
        return cond
    smoothed = uniform_filter1d(diams, size=window, mode="nearest")
    half = window // 2
    # runs of equal smoothed value that are lower than both neighbors
    i = 0
    while i < n:
        j = i
        while j + 1 < n and smoothed[j + 1] == smoothed[i]:
            j += 1
        interior = i > 0 and j < n - 1
        if interior and smoothed[i - 1] > smoothed[i] < smoothed[j + 1]:
            rep = (i + j) // 2
            lo, hi = rep - half, rep + half + 1
            if lo >= 0 and hi <= n and smoothed[rep] == smoothed[lo:hi].min():
                cond[rep] = 1
        i = j + 1
    cond[:half] = 0
    cond[n - half:] = 0
    return cond


def _segment_distance(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Distance from a point to the finite segment [a, b]; the perpendicular
    foot is clamped to the nearest endpoint when it falls outside."""
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((point - a) @ ab / denom, 0, 1))
    return float(np.linalg.norm(point - (a + t * ab)))


def _minmax(values: np.ndarray, name: str) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi - lo <= 0.0:
        log.info("degenerate normalization: all %s equal, using 0", name)
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def stability_scores(report: MeasurementReport,
                     weights: GraspWeights | None = None,
                     window: int = DEFAULT_SMOOTHING_WINDOW) -> list[GraspCandidate]:
    """Score every station and return candidates ranked best-first.

    Ties are broken by smaller normalized CoG distance, then smaller station
    index. Degenerate (zero-diameter) stations are not candidates.
    """
    weights = weights or GraspWeights()
    keep = report.diameters > 0.0
    if keep.sum() < 3:
        raise TooFewStationsError("grasp scoring needs >= 3 usable stations")
    idx = np.nonzero(keep)[0]
    diams = report.diameters[idx]
    ends = report.endpoints3d[idx]
    cog = center_of_gravity(report)

    d_hat = _minmax(diams, "diameters")
    p = np.array([_segment_distance(cog, e[0], e[1]) for e in ends])
    p_hat = _minmax(p, "CoG distances")
    cond = concavity_condition(diams, window)
    scores = (weights.w1 * (1.0 - d_hat) + weights.w2 * (1.0 - p_hat)
              + weights.w3 * cond)

    order = sorted(range(len(idx)),
                   key=lambda i: (-scores[i], p_hat[i],
                                  report.station_indices[idx[i]]))
    return [GraspCandidate(
        station_index=int(report.station_indices[idx[i]]),
        score=float(scores[i]),
        d_hat=float(d_hat[i]),
        p_hat=float(p_hat[i]),
        cond=int(cond[i]),
        grip_points3d=ends[i].copy(),
    ) for i in order]


def top_k(candidates: list[GraspCandidate], k: int) -> list[GraspCandidate]:
    """First min(k, len) candidates of the ranked list."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    return candidates[:k]
