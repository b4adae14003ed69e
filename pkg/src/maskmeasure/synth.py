"""Synthetic mask/depth fixtures with analytic ground truth.

Objects are solids of revolution with a piecewise-linear radius profile,
viewed side-on: the axis lies in a plane perpendicular to the optical axis,
tilted within the image plane. Pixel centers are classified analytically
(no polygon rasterization), and each object pixel carries the depth of the
true ray-surface intersection, so the relative depth gate sees a realistic
curved surface.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import OutOfViewError
from .project import CameraIntrinsics


@dataclass
class RevolutionProfile:
    """Radius profile r(h) plus viewing pose.

    heights are meters along the axis starting at 0; radii are the matching
    axial radii. tilt rotates the axis within the image plane (0 = upright);
    distance is the camera-to-axis range; center shifts the object in the
    axis plane (meters) for sub-pixel placement control.
    """

    heights: np.ndarray
    radii: np.ndarray
    tilt: float = 0.0
    distance: float = 1.0
    image_size: tuple = (640, 480)   # (width, height) px
    center: tuple = (0.0, 0.0)       # (x, y) meters in the axis plane

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.float64)
        self.radii = np.asarray(self.radii, dtype=np.float64)
        if len(self.heights) < 2 or len(self.heights) != len(self.radii):
            raise ValueError("profile needs >= 2 aligned (height, radius) knots")
        if np.any(np.diff(self.heights) <= 0):
            raise ValueError("heights must be strictly increasing")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        if self.distance <= self.radii.max():
            raise ValueError("camera distance must exceed the maximal radius")
        self.heights = self.heights - self.heights[0]

    @property
    def length(self) -> float:
        return float(self.heights[-1])


@dataclass
class GroundTruth:
    """Analytic truth for one rendered fixture."""

    heights: np.ndarray       # profile knots, meters along the axis
    diameters: np.ndarray     # 2 * radius at the knots
    length: float             # meters
    volume: float             # cubic meters, frustum sum over the knots
    axis_base: np.ndarray     # (3,) camera-frame base of the axis
    axis_dir: np.ndarray      # (3,) unit axis direction (base -> top)
    centerline_px: np.ndarray  # (M, 2) the axis sampled in pixel coords

    def diameter_at(self, h) -> np.ndarray:
        """True diameter at axial height h (meters)."""
        return np.interp(h, self.heights, self.diameters)

    def axis_height(self, points3d) -> np.ndarray:
        """Axial height of camera-frame points (projection onto the axis)."""
        pts = np.asarray(points3d, dtype=np.float64).reshape(-1, 3)
        return (pts - self.axis_base) @ self.axis_dir

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump({
                "heights_m": self.heights.tolist(),
                "diameters_m": self.diameters.tolist(),
                "length_m": self.length,
                "volume_m3": self.volume,
                "volume_ml": self.volume * 1e6,
                "axis_base_m": self.axis_base.tolist(),
                "axis_dir": self.axis_dir.tolist(),
                "centerline_px": self.centerline_px.tolist(),
            }, f, indent=2)


def frustum_volume(heights, radii) -> float:
    """Exact volume of the frustum stack of a piecewise-linear radius profile."""
    heights = np.asarray(heights, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    dh = np.diff(heights)
    r0, r1 = radii[:-1], radii[1:]
    return float((math.pi / 3.0) * (dh * (r0**2 + r0 * r1 + r1**2)).sum())


def cylinder_profile(radius: float, height: float, **pose) -> RevolutionProfile:
    return RevolutionProfile(heights=[0.0, height], radii=[radius, radius],
                             **pose)


# Wine-bottle-like shape: straight body, shoulder taper, slim neck with a
# slight lip at the mouth. The neck minimum sits away from the top so it is
# an interior station of the diameter profile.
BOTTLE_LENGTH = 0.29845   # meters
BOTTLE_VOLUME = 943e-6    # cubic meters
_BOTTLE_SHAPE = (
    (0.000, 0.0340),
    (0.020, 0.0360),
    (0.550, 0.0360),
    (0.620, 0.0300),
    (0.700, 0.0160),
    (0.800, 0.0135),
    (0.930, 0.0125),
    (0.970, 0.0145),
    (1.000, 0.0140),
)


def bottle_profile(**pose) -> RevolutionProfile:
    """Bottle profile with exact length and volume (radii are scaled so the
    frustum-sum volume hits the target to machine precision)."""
    heights = np.array([h for h, _ in _BOTTLE_SHAPE]) * BOTTLE_LENGTH
    radii = np.array([r for _, r in _BOTTLE_SHAPE])
    scale = math.sqrt(BOTTLE_VOLUME / frustum_volume(heights, radii))
    return RevolutionProfile(heights=heights, radii=radii * scale, **pose)


def _frames(profile: RevolutionProfile):
    """Axis direction and in-plane normal (2D, meters in the axis plane)."""
    a = np.array([math.sin(profile.tilt), -math.cos(profile.tilt)])
    n = np.array([math.cos(profile.tilt), math.sin(profile.tilt)])
    base = np.asarray(profile.center) - (profile.length / 2.0) * a
    return base, a, n


def render(profile: RevolutionProfile, intr: CameraIntrinsics):
    """Render (mask, depth, ground_truth) for a side-on solid of revolution.

    Pixel centers are back-projected to the axis plane and classified
    against the profile; object pixels get the depth of the first
    ray-surface intersection. Background depth is 0 (missing).
    """
    if np.any(intr.dist):
        raise ValueError("render supports zero-distortion intrinsics only")
    w, h = profile.image_size
    z0 = profile.distance
    base, a, n = _frames(profile)

    # out-of-view check on the projected profile extremes
    for hk, rk in zip(profile.heights, profile.radii):
        for sgn in (-1.0, 1.0):
            p = base + hk * a + sgn * rk * n
            u = intr.fx * p[0] / z0 + intr.cx
            v = intr.fy * p[1] / z0 + intr.cy
            if not (0 <= u <= w - 1 and 0 <= v <= h - 1):
                raise OutOfViewError(
                    f"profile point projects to ({u:.1f}, {v:.1f}) outside "
                    f"{w}x{h}")

    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    qx = (uu - intr.cx) * z0 / intr.fx - base[0]
    qy = (vv - intr.cy) * z0 / intr.fy - base[1]
    axial = qx * a[0] + qy * a[1]
    perp = qx * n[0] + qy * n[1]
    r_here = np.interp(axial, profile.heights, profile.radii,
                       left=-1.0, right=-1.0)
    mask = (axial >= 0) & (axial <= profile.length) & (np.abs(perp) <= r_here)
    depth = np.zeros((h, w), dtype=np.float64)
    bulge = np.sqrt(np.maximum(r_here[mask] ** 2 - perp[mask] ** 2, 0.0))
    depth[mask] = z0 - bulge

    hs = np.linspace(0.0, profile.length, 256)
    axis_pts = base[None, :] + hs[:, None] * a[None, :]
    centerline = np.column_stack([
        intr.fx * axis_pts[:, 0] / z0 + intr.cx,
        intr.fy * axis_pts[:, 1] / z0 + intr.cy,
    ])
    gt = GroundTruth(
        heights=profile.heights.copy(),
        diameters=2.0 * profile.radii,
        length=profile.length,
        volume=frustum_volume(profile.heights, profile.radii),
        axis_base=np.array([base[0], base[1], z0]),
        axis_dir=np.array([a[0], a[1], 0.0]),
        centerline_px=centerline,
    )
    return mask, depth, gt


def perturb(depth: np.ndarray, noise_sigma: float = 0.0,
            edge_dropout: int = 0, seed=None) -> np.ndarray:
    """Gaussian noise on valid depths plus a missing-value band along the
    boundary of the valid region. Deterministic for a fixed seed."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    depth = np.asarray(depth, dtype=np.float64)
    out = depth.copy()
    valid = np.isfinite(depth) & (depth > 0)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out[valid] += rng.normal(0.0, noise_sigma, int(valid.sum()))
    if edge_dropout > 0:
        band = valid & (distance_transform_edt(valid) <= edge_dropout)
        out[band] = 0.0
    return out
