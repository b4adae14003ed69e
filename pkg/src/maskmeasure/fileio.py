"""File formats: mask PNG, depth PNG/raw, report JSON/CSV, overlay PNG.

* Mask: 8-bit single-channel PNG, 0 = background; any nonzero = object.
* Depth: 16-bit PNG in millimeters (0 = missing), or a raw little-endian
  float32 grid prefixed by an 8-byte header of two uint32 (width, height).
* Intrinsics: JSON {fx, fy, cx, cy, dist: [k1, k2, t1, t2, k3]}.
"""

import csv
import json
import struct
from pathlib import Path

import cv2
import numpy as np

from .grasp import GraspCandidate
from .project import MeasurementReport
from .segments import StationSegment
from .skeleton import Skeleton

RAW_HEADER = struct.Struct("<II")


def read_mask(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise FileNotFoundError(f"cannot read mask image {path}")
    return img > 0


def write_mask(path, mask: np.ndarray) -> None:
    cv2.imwrite(str(path), (np.asarray(mask, bool) * np.uint8(255)))


def read_depth(path) -> np.ndarray:
    """Depth in meters; 0 marks missing values. Format chosen by suffix:
    .png = 16-bit millimeters, anything else = raw float32 grid."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FileNotFoundError(f"cannot read depth image {path}")
        if img.ndim != 2:
            raise ValueError(f"depth PNG must be single-channel, got {img.shape}")
        return img.astype(np.float64) / 1000.0
    blob = path.read_bytes()
    if len(blob) < RAW_HEADER.size:
        raise ValueError(f"raw depth file {path} is too short")
    w, h = RAW_HEADER.unpack_from(blob)
    data = np.frombuffer(blob, dtype="<f4", offset=RAW_HEADER.size)
    if data.size != w * h:
        raise ValueError(
            f"raw depth file {path}: header says {w}x{h}, got {data.size} floats")
    return data.reshape(h, w).astype(np.float64)


def write_depth(path, depth: np.ndarray) -> None:
    path = Path(path)
    depth = np.asarray(depth, dtype=np.float64)
    if path.suffix.lower() == ".png":
        mm = np.where(np.isfinite(depth) & (depth > 0),
                      np.round(depth * 1000.0), 0.0)
        cv2.imwrite(str(path), np.clip(mm, 0, 65535).astype(np.uint16))
        return
    h, w = depth.shape
    clean = np.where(np.isfinite(depth), depth, 0.0).astype("<f4")
    path.write_bytes(RAW_HEADER.pack(w, h) + clean.tobytes())


def report_to_dict(report: MeasurementReport,
                   segments: list[StationSegment] | None = None) -> dict:
    data = {
        "length_m": report.length,
        "volume_m3": report.volume,
        "volume_ml": report.volume * 1e6,
        "diameters_m": report.diameters.tolist(),
        "station_indices": report.station_indices.tolist(),
        "endpoints3d_m": report.endpoints3d.tolist(),
        "midpoints3d_m": report.midpoints3d.tolist(),
        "dropped_stations": list(report.dropped_stations),
    }
    if segments is not None:
        data["segments_px"] = [
            {"station": s.station_index,
             "p1": s.p1.tolist(), "p2": s.p2.tolist(),
             "d1": None if not np.isfinite(s.d1) else s.d1,
             "d2": None if not np.isfinite(s.d2) else s.d2,
             "theta": s.theta}
            for s in segments
        ]
    return data


def write_report_json(path, report: MeasurementReport,
                      segments=None) -> None:
    with open(path, "w") as f:
        json.dump(report_to_dict(report, segments), f, indent=2)


def write_report_csv(path, report: MeasurementReport,
                     segments: list[StationSegment]) -> None:
    """One row per surviving station: k, x1, y1, d1, x2, y2, d2, theta,
    diameter_m."""
    by_index = {s.station_index: s for s in segments}
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "x1", "y1", "d1", "x2", "y2", "d2", "theta",
                         "diameter_m"])
        for k, diam in zip(report.station_indices, report.diameters):
            s = by_index[int(k)]
            writer.writerow([int(k), f"{s.p1[0]:.3f}", f"{s.p1[1]:.3f}",
                             f"{s.d1:.6f}", f"{s.p2[0]:.3f}", f"{s.p2[1]:.3f}",
                             f"{s.d2:.6f}", f"{s.theta:.6f}", f"{diam:.6f}"])


def write_candidates_json(path, candidates: list[GraspCandidate]) -> None:
    with open(path, "w") as f:
        json.dump([{
            "rank": i + 1,
            "station_index": c.station_index,
            "score": c.score,
            "d_hat": c.d_hat,
            "p_hat": c.p_hat,
            "cond": c.cond,
            "grip_points3d_m": c.grip_points3d.tolist(),
        } for i, c in enumerate(candidates)], f, indent=2)


def write_skeleton_csv(path, skel: Skeleton) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y"])
        for x, y in skel.points:
            writer.writerow([f"{x:.3f}", f"{y:.3f}"])


def draw_overlay(mask: np.ndarray, skel: Skeleton | None = None,
                 segments: list[StationSegment] | None = None,
                 report: MeasurementReport | None = None,
                 candidates: list[GraspCandidate] | None = None,
                 label_every: int = 5) -> np.ndarray:
    """Render the mask with skeleton, station segments, diameter labels and
    (optionally) the ranked grasp candidates. Returns a BGR image."""
    canvas = cv2.cvtColor((np.asarray(mask, bool) * np.uint8(80)),
                          cv2.COLOR_GRAY2BGR)
    if segments:
        for s in segments:
            p1 = tuple(np.round(s.p1).astype(int))
            p2 = tuple(np.round(s.p2).astype(int))
            cv2.line(canvas, p1, p2, (90, 180, 90), 1)
    if skel is not None and len(skel) >= 2:
        pts = np.round(skel.points).astype(np.int32).reshape(-1, 1, 2)
        cv2.polylines(canvas, [pts], False, (200, 120, 0), 1)
    if report is not None and segments:
        by_index = {s.station_index: s for s in segments}
        for i, (k, diam) in enumerate(zip(report.station_indices,
                                          report.diameters)):
            if i % label_every:
                continue
            s = by_index[int(k)]
            pos = tuple(np.round(s.p2).astype(int) + np.array([3, 0]))
            cv2.putText(canvas, f"{diam * 1000:.1f}mm", pos,
                        cv2.FONT_HERSHEY_SIMPLEX, 0.35, (255, 255, 255), 1)
    if candidates and segments:
        by_index = {s.station_index: s for s in segments}
        for rank, c in enumerate(candidates, start=1):
            s = by_index.get(c.station_index)
            if s is None:
                continue
            p1 = tuple(np.round(s.p1).astype(int))
            p2 = tuple(np.round(s.p2).astype(int))
            cv2.line(canvas, p1, p2, (0, 0, 230), 2)
            pos = (min(p1[0], p2[0]), min(p1[1], p2[1]) - 4)
            cv2.putText(canvas, f"#{rank} {c.score:.2f}", pos,
                        cv2.FONT_HERSHEY_SIMPLEX, 0.4, (0, 0, 230), 1)
    return canvas
