"""Perpendicular line segments at sampled skeleton stations, with depth
recovery.

At each sampled station the local slope is estimated by central differences
along the skeleton; two rays are marched perpendicular to it until the mask
boundary. Depth samples collected along each ray pass a relative gate
against the station depth, and the median of the surviving samples becomes
the endpoint depth. This sidesteps the missing or unreliable depth readings
that plague object contours.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSlopeError
from .mask_ops import as_mask
from .skeleton import Skeleton

log = logging.getLogger(__name__)

STATION_DEPTH_SEARCH_WINDOW = 5  # skeleton steps searched when d0 is missing


@dataclass
class SamplingConfig:
    stride: int = 5            # skeleton indices between stations
    slope_offset: int = 5      # half-width of the slope finite difference
    depth_gate: float = 0.1    # relative gate around the station depth
    march_step: float = 0.5    # px, perpendicular march step

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.slope_offset < 1:
            raise ValueError("slope_offset must be >= 1")
        if not 0.0 < self.depth_gate < 1.0:
            raise ValueError("depth_gate must be in (0, 1)")
        if self.march_step <= 0.0:
            raise ValueError("march_step must be > 0")


@dataclass
class StationSegment:
    """One perpendicular chord: sub-pixel endpoints and recovered depths.

    Missing endpoint depths are NaN; downstream decides how to handle them.
    """

    station_index: int
    p1: np.ndarray     # (2,) float, (x, y)
    p2: np.ndarray
    d1: float          # meters, NaN if the ray collected no valid depth
    d2: float
    theta: float       # local skeleton slope, radians, in (-pi/2, pi/2]


def depth_valid(value: float) -> bool:
    """Valid depth readings are finite and strictly positive."""
    return bool(np.isfinite(value)) and value > 0.0


def sample_stations(skel: Skeleton, stride: int) -> np.ndarray:
    """Station indices {0, stride, 2*stride, ...} plus the last index."""
    n = len(skel)
    if n == 0:
        raise ValueError("skeleton is empty")
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return np.array(idx, dtype=np.int64)


def local_slope(skel: Skeleton, k: int, slope_offset: int) -> float:
    """Central-difference slope at station k, one-sided near the ends.

    The result lies in (-pi/2, pi/2]; vertical runs map to pi/2.
    """
    pts = skel.points
    n = len(pts)
    if not 0 <= k < n:
        raise IndexError(f"station index {k} out of range for {n} points")
    i0, i1 = k - slope_offset, k + slope_offset
    if i0 < 0 and i1 > n - 1:
        i0, i1 = 0, n - 1
    elif i0 < 0:
        i0, i1 = k, min(k + slope_offset, n - 1)
    elif i1 > n - 1:
        i0, i1 = max(k - slope_offset, 0), k
    dx = pts[i1, 0] - pts[i0, 0]
    dy = pts[i1, 1] - pts[i0, 1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateSlopeError(f"difference points coincide at station {k}")
    theta = math.atan2(dy, dx)
    if theta <= -math.pi / 2:
        theta += math.pi
    elif theta > math.pi / 2:
        theta -= math.pi
    return theta


def _pixel_of(x: float, y: float):
    return int(math.floor(x + 0.5)), int(math.floor(y + 0.5))


def _station_depth(skel: Skeleton, k: int, depth: np.ndarray):
    """Depth at the station pixel, falling back to the nearest valid depth
    within a few steps along the skeleton."""
    h, w = depth.shape
    n = len(skel)
    for off in range(STATION_DEPTH_SEARCH_WINDOW + 1):
        for j in (k - off, k + off) if off else (k,):
            if not 0 <= j < n:
                continue
            xi, yi = _pixel_of(*skel.points[j])
            if 0 <= xi < w and 0 <= yi < h and depth_valid(depth[yi, xi]):
                return float(depth[yi, xi])
    return None


def _march(origin, direction, sign, mask, depth, d0, gate, step):
    """March from origin along sign*direction until the next sample leaves
    the mask. Returns (endpoint, gated depth samples)."""
    h, w = mask.shape
    px = origin[0]
    py = origin[1]
    samples = []
    last_pixel = None
    limit = int(math.ceil((h + w) / step)) + 1
    for _ in range(limit):
        qx = px + sign * step * direction[0]
        qy = py + sign * step * direction[1]
        xi, yi = _pixel_of(qx, qy)
        if not (0 <= xi < w and 0 <= yi < h and mask[yi, xi]):
            break
        px, py = qx, qy
        if (xi, yi) != last_pixel:
            last_pixel = (xi, yi)
            d = float(depth[yi, xi])
            if depth_valid(d) and abs(d - d0) < gate * d0:
                samples.append(d)
    return np.array([px, py]), samples


def line_depth(skel: Skeleton, stations: np.ndarray, slopes: np.ndarray,
               mask: np.ndarray, depth: np.ndarray,
               cfg: SamplingConfig | None = None) -> list[StationSegment]:
    """Identify the perpendicular chord and its endpoint depths at every
    station.

    Endpoints are the last in-mask positions of the two rays; each endpoint
    depth is the median of that ray's depth samples passing the relative
    gate |d - d0| < depth_gate * d0 (duplicate samples from the same pixel
    are collapsed first). Rays with no surviving sample yield NaN. Stations
    whose reference depth d0 cannot be recovered are skipped and logged.
    """
    cfg = cfg or SamplingConfig()
    mask = as_mask(mask)
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != mask.shape:
        raise ValueError(f"depth shape {depth.shape} != mask shape {mask.shape}")
    segments = []
    for k, theta in zip(stations, slopes):
        d0 = _station_depth(skel, int(k), depth)
        if d0 is None:
            log.warning("station %d skipped: no reference depth within +/-%d "
                        "skeleton steps", k, STATION_DEPTH_SEARCH_WINDOW)
            continue
        origin = skel.points[int(k)]
        direction = (-math.sin(theta), math.cos(theta))
        p1, depths1 = _march(origin, direction, -1.0, mask, depth, d0,
                             cfg.depth_gate, cfg.march_step)
        p2, depths2 = _march(origin, direction, +1.0, mask, depth, d0,
                             cfg.depth_gate, cfg.march_step)
        d1 = float(np.median(depths1)) if depths1 else math.nan
        d2 = float(np.median(depths2)) if depths2 else math.nan
        segments.append(StationSegment(station_index=int(k), p1=p1, p2=p2,
                                       d1=d1, d2=d2, theta=float(theta)))
    return segments


def extract_segments(skel: Skeleton, mask: np.ndarray, depth: np.ndarray,
                     cfg: SamplingConfig | None = None) -> list[StationSegment]:
    """Sample stations, compute slopes, and run the perpendicular march in
    one call."""
    cfg = cfg or SamplingConfig()
    stations = sample_stations(skel, cfg.stride)
    slopes = np.array([local_slope(skel, int(k), cfg.slope_offset)
                       for k in stations])
    return line_depth(skel, stations, slopes, mask, depth, cfg)
