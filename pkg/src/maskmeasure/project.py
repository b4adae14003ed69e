"""2D-3D deprojection and dimensional measurement.

Segment endpoints are lifted into the camera frame with the pinhole model
plus Brown-Conrady distortion; diameters are endpoint distances in 3D, the
length is the polyline length through the segment midpoints, and the volume
is accumulated over the conical frusta spanned by consecutive stations.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadDepthError, NoConvergenceError, NoValidSegmentsError,
                     TooFewStationsError)
from .segments import StationSegment, depth_valid

UNDISTORT_MAX_ITER = 20
UNDISTORT_TOL = 1e-8


@dataclass
class CameraIntrinsics:
    """Pinhole intrinsics with Brown-Conrady coefficients (k1, k2, t1, t2, k3)."""

    fx: float
    fy: float
    cx: float
    cy: float
    dist: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        self.dist = np.asarray(self.dist, dtype=np.float64).reshape(5)

    @classmethod
    def from_json(cls, path) -> "CameraIntrinsics":
        with open(path) as f:
            data = json.load(f)
        return cls(fx=data["fx"], fy=data["fy"], cx=data["cx"], cy=data["cy"],
                   dist=np.array(data.get("dist", [0.0] * 5)))

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"fx": self.fx, "fy": self.fy, "cx": self.cx,
                       "cy": self.cy, "dist": list(map(float, self.dist))}, f,
                      indent=2)


@dataclass
class MeasurementReport:
    """Per-station diameters plus aggregate length and volume, all metric."""

    station_indices: np.ndarray   # (n,) skeleton indices of surviving stations
    diameters: np.ndarray         # (n,) meters
    length: float                 # meters
    volume: float                 # cubic meters
    endpoints3d: np.ndarray       # (n, 2, 3) camera-frame endpoint pairs
    midpoints3d: np.ndarray       # (n, 3) camera-frame segment midpoints
    dropped_stations: list        # stations without any endpoint depth


def _distort_normalized(x: float, y: float, dist: np.ndarray):
    k1, k2, t1, t2, k3 = dist
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * t1 * x * y + t2 * (r2 + 2.0 * x * x)
    yd = y * radial + t1 * (r2 + 2.0 * y * y) + 2.0 * t2 * x * y
    return xd, yd


def _undistort_normalized(xd: float, yd: float, dist: np.ndarray):
    """Invert the distortion model by fixed-point iteration."""
    x, y = xd, yd
    k1, k2, t1, t2, k3 = dist
    delta = math.inf
    for _ in range(UNDISTORT_MAX_ITER):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * t1 * x * y + t2 * (r2 + 2.0 * x * x)
        dy = t1 * (r2 + 2.0 * y * y) + 2.0 * t2 * x * y
        x_new = (xd - dx) / radial
        y_new = (yd - dy) / radial
        delta = max(abs(x_new - x), abs(y_new - y))
        x, y = x_new, y_new
        if delta < UNDISTORT_TOL:
            return x, y
    if not (math.isfinite(x) and math.isfinite(y)) or delta > 1e-6:
        raise NoConvergenceError(
            f"undistortion did not converge (last delta {delta:.3g})")
    return x, y


def project_point(point3d, intr: CameraIntrinsics):
    """Forward model: camera-frame 3D point to (possibly distorted) pixel."""
    X, Y, Z = np.asarray(point3d, dtype=np.float64)
    if Z <= 0:
        raise BadDepthError(f"point behind the camera (Z={Z})")
    xd, yd = _distort_normalized(X / Z, Y / Z, intr.dist)
    return np.array([intr.fx * xd + intr.cx, intr.fy * yd + intr.cy])


def deproject(px, depth: float, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel plus metric depth to a camera-frame 3D point.

    The pixel is undistorted first (iterative inversion of the forward
    model), then scaled by depth: X = (x_n * Z, y_n * Z, Z).
    """
    if not depth_valid(depth):
        raise BadDepthError(f"invalid depth {depth!r}")
    u, v = float(px[0]), float(px[1])
    xd = (u - intr.cx) / intr.fx
    yd = (v - intr.cy) / intr.fy
    if np.any(intr.dist):
        xn, yn = _undistort_normalized(xd, yd, intr.dist)
    else:
        xn, yn = xd, yd
    return np.array([xn * depth, yn * depth, depth])


def _endpoint_depths(seg: StationSegment):
    """Resolve missing endpoint depths by substituting the opposite one;
    None when both are missing."""
    d1 = seg.d1 if depth_valid(seg.d1) else None
    d2 = seg.d2 if depth_valid(seg.d2) else None
    if d1 is None and d2 is None:
        return None
    return (d1 if d1 is not None else d2, d2 if d2 is not None else d1)


def _station_geometry(segments: list[StationSegment], intr: CameraIntrinsics):
    """Deproject every segment with recoverable depth; stations with no
    valid depth at either endpoint are dropped."""
    indices, ends, mids, diams, dropped = [], [], [], [], []
    for seg in segments:
        depths = _endpoint_depths(seg)
        if depths is None:
            dropped.append(seg.station_index)
            continue
        d1, d2 = depths
        x1 = deproject(seg.p1, d1, intr)
        x2 = deproject(seg.p2, d2, intr)
        mid = deproject((seg.p1 + seg.p2) / 2.0, (d1 + d2) / 2.0, intr)
        indices.append(seg.station_index)
        ends.append((x1, x2))
        mids.append(mid)
        diams.append(float(np.linalg.norm(x1 - x2)))
    if not indices:
        raise NoValidSegmentsError("every station lacked endpoint depth")
    return (np.array(indices, dtype=np.int64), np.array(ends),
            np.array(mids), np.array(diams), dropped)


def build_report(segments: list[StationSegment],
                 intr: CameraIntrinsics) -> MeasurementReport:
    """Deproject all station segments and assemble the measurement report."""
    indices, ends, mids, diams, dropped = _station_geometry(segments, intr)
    return MeasurementReport(
        station_indices=indices,
        diameters=diams,
        length=length(mids),
        volume=volume(diams, mids),
        endpoints3d=ends,
        midpoints3d=mids,
        dropped_stations=dropped,
    )


def diameters(segments: list[StationSegment],
              intr: CameraIntrinsics) -> np.ndarray:
    """3D endpoint distance per surviving segment."""
    return _station_geometry(segments, intr)[3]


def length(midpoints3d: np.ndarray) -> float:
    """Polyline length through the station midpoints."""
    mids = np.asarray(midpoints3d, dtype=np.float64).reshape(-1, 3)
    if len(mids) < 2:
        raise TooFewStationsError("length needs at least 2 midpoints")
    return float(np.linalg.norm(np.diff(mids, axis=0), axis=1).sum())


def volume(diams: np.ndarray, midpoints3d: np.ndarray) -> float:
    """Frustum-sum volume over consecutive stations.

    Each slice contributes (pi/3) * l_k * ((Dk/2)^2 + Dk*Dk1/4 + (Dk1/2)^2);
    pairs touching a zero-diameter (degenerate) station are skipped.
    """
    diams = np.asarray(diams, dtype=np.float64)
    mids = np.asarray(midpoints3d, dtype=np.float64).reshape(-1, 3)
    if len(diams) != len(mids):
        raise ValueError("diameters and midpoints must align")
    if len(diams) < 2:
        raise TooFewStationsError("volume needs at least 2 stations")
    total = 0.0
    for k in range(len(diams) - 1):
        da, db = diams[k], diams[k + 1]
        if da <= 0.0 or db <= 0.0:
            continue
        lk = float(np.linalg.norm(mids[k + 1] - mids[k]))
        total += (math.pi / 3.0) * lk * (
            (da / 2.0) ** 2 + da * db / 4.0 + (db / 2.0) ** 2)
    return total
