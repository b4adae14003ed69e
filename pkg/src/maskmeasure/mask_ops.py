"""Binary mask refinement: turn a raw segmentation mask into a single clean,
hole-free, smooth-boundary component ready for skeletonization.

Masks are 2D boolean numpy arrays, indexed [y, x] with y increasing downward.
"""

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import EmptyMaskError

# 8-connectivity everywhere, matching the skeleton's connectivity model.
CONNECTIVITY = 8


@dataclass
class MaskConfig:
    """Parameters of the refinement pipeline. Defaults are engineering
    choices; all are exposed on the CLI."""

    min_object_size: int = 64     # px, components smaller than this are dropped
    kernel_size: int = 5          # px, odd; square all-ones structuring element
    rdp_epsilon: float = 2.0      # px, polygon approximation tolerance

    def __post_init__(self):
        if self.min_object_size < 1:
            raise ValueError("min_object_size must be >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 1")
        if self.rdp_epsilon < 0:
            raise ValueError("rdp_epsilon must be >= 0")


def as_mask(arr) -> np.ndarray:
    """Coerce an array to a validated 2D boolean mask (nonzero = object)."""
    mask = np.asarray(arr)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2D array, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def remove_small_objects(mask: np.ndarray, min_size: int) -> np.ndarray:
    """Drop every connected component with area < min_size pixels.

    Surviving components are returned byte-identical; the result may be empty.
    """
    mask = as_mask(mask)
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        mask.astype(np.uint8), connectivity=CONNECTIVITY
    )
    out = np.zeros_like(mask)
    for lab in range(1, n):
        if stats[lab, cv2.CC_STAT_AREA] >= min_size:
            out[labels == lab] = True
    return out


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest connected component.

    Equal areas are tied-broken by the smallest (y, x) of each component's
    topmost-leftmost pixel, so the result is deterministic.
    """
    mask = as_mask(mask)
    n, labels, stats, _ = cv2.connectedComponentsWithStats(
        mask.astype(np.uint8), connectivity=CONNECTIVITY
    )
    if n <= 1:
        return np.zeros_like(mask)
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = None
    best_key = None
    for lab in np.nonzero(areas == areas.max())[0] + 1:
        ys, xs = np.nonzero(labels == lab)
        top = ys.min()
        key = (top, xs[ys == top].min())
        if best_key is None or key < best_key:
            best_key = key
            best = lab
    return labels == best


def open_close(mask: np.ndarray, kernel_size: int) -> np.ndarray:
    """Morphological opening followed by closing with a square all-ones
    kernel. Out-of-image pixels count as background."""
    if kernel_size % 2 == 0:
        raise ValueError("kernel_size must be odd")
    mask = as_mask(mask)
    kernel = np.ones((kernel_size, kernel_size), np.uint8)
    u8 = mask.astype(np.uint8)
    u8 = cv2.morphologyEx(u8, cv2.MORPH_OPEN, kernel,
                          borderType=cv2.BORDER_CONSTANT, borderValue=0)
    u8 = cv2.morphologyEx(u8, cv2.MORPH_CLOSE, kernel,
                          borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return u8.astype(bool)


def polygonal_refine(mask: np.ndarray, epsilon: float) -> np.ndarray:
    """Trace the outer contour, simplify it with Ramer-Douglas-Peucker at
    tolerance epsilon, and fill the polygon interior.

    The fill uses the outer boundary only, so interior holes vanish. If the
    mask still has several components the largest contour is used.
    """
    mask = as_mask(mask)
    if not mask.any():
        raise EmptyMaskError("no foreground pixels to trace")
    contours, _ = cv2.findContours(mask.astype(np.uint8),
                                   cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    contour = max(contours, key=cv2.contourArea)
    poly = cv2.approxPolyDP(contour, epsilon, closed=True)
    out = np.zeros(mask.shape, np.uint8)
    cv2.fillPoly(out, [poly.reshape(-1, 2)], 1)
    return out.astype(bool)


def refine(mask: np.ndarray, cfg: MaskConfig | None = None) -> np.ndarray:
    """Full refinement: small-object removal -> largest component ->
    opening -> closing -> contour/RDP/fill.

    Returns a single hole-free component; raises EmptyMaskError if nothing
    survives filtering.
    """
    cfg = cfg or MaskConfig()
    mask = remove_small_objects(mask, cfg.min_object_size)
    mask = largest_component(mask)
    if not mask.any():
        raise EmptyMaskError(
            f"no component of at least {cfg.min_object_size} px")
    mask = open_close(mask, cfg.kernel_size)
    if not mask.any():
        raise EmptyMaskError("mask vanished under morphological opening")
    return polygonal_refine(mask, cfg.rdp_epsilon)


def count_components(mask: np.ndarray) -> int:
    """Number of 8-connected foreground components."""
    n, _ = cv2.connectedComponents(as_mask(mask).astype(np.uint8),
                                   connectivity=CONNECTIVITY)
    return n - 1


def has_holes(mask: np.ndarray) -> bool:
    """True if background flood fill from the image border cannot reach
    every background pixel."""
    mask = as_mask(mask)
    bg = ~mask
    # flood from all border pixels at once
    n, labels = cv2.connectedComponents(bg.astype(np.uint8), connectivity=4)
    border_labels = set(labels[0, :]) | set(labels[-1, :]) | \
        set(labels[:, 0]) | set(labels[:, -1])
    border_labels.discard(0)
    reached = np.isin(labels, list(border_labels)) & bg
    return bool((bg & ~reached).any())
