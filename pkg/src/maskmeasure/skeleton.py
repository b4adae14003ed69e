"""Ordered skeleton construction.

Two modes, chosen by the caller:

* rod mode: thinning skeleton + distance transform, endpoint/junction
  classification with a connectivity kernel, short-branch pruning, a
  minimum-cost trunk path between the endpoints of maximal vertical
  separation, and sub-pixel extension of both ends to the mask boundary.
* general mode: PCA of the object pixels gives two orthogonal candidate
  axes; the one closer to a true symmetry axis (lower dissimilarity score)
  is walked outward from the centroid.

All point arrays are (N, 2) float or int in (x, y) order; the first point is
the bottommost (maximal y) and the last the topmost.
"""

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.ndimage import convolve, distance_transform_edt
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from skimage.morphology import skeletonize

from .errors import DegenerateMaskError, EmptyMaskError, NoPathError
from .mask_ops import as_mask

# Connectivity kernel: response is 10 + (number of 8-neighbours on the
# skeleton), so 11 marks an endpoint and >12 a junction candidate.
CONNECTIVITY_KERNEL = np.array([[1, 1, 1],
                                [1, 10, 1],
                                [1, 1, 1]], dtype=np.int32)

ENDPOINT_RESPONSE = 11
INTERSECTION_RESPONSE = 12  # strictly greater means junction

# Fixed 8-neighbour visit order (dy, dx): keeps path search deterministic.
NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                    (0, 1), (1, -1), (1, 0), (1, 1))

DEFAULT_CLUSTER_RADIUS = 3.0
SYMMETRY_RATIO_THRESHOLD = 0.9  # min(DS)/max(DS) above this forces axis 1

# Skeleton extensions stop where the distance to the mask boundary drops to
# this many pixels. Tips that touch the boundary staircase produce grazing,
# one-sided chords (their midpoints jump off-axis), so the walk keeps a
# small safety margin instead of running flush against the edge.
EXTENSION_CLEARANCE = 1.5

PRUNE_MAX_ROUNDS = 12

# Corner-tail trimming: thinning a blunt-ended rod drags the skeleton end
# diagonally into a silhouette corner. Such a tail shows up as a sharp,
# localized direction break near the path end; genuine curvature of smooth
# stems turns far less over one window length.
TAIL_WINDOW = 6
TAIL_SCAN_DEPTH = 40
TAIL_MAX_TURN = math.radians(25)


@dataclass
class Skeleton:
    """Ordered skeleton path, bottommost station first."""

    points: np.ndarray                 # (N, 2) float, (x, y)
    radius: np.ndarray | None = None   # (N,) medial radius in px (rod mode)

    def __len__(self):
        return len(self.points)


@dataclass
class TopologyPoints:
    """Endpoint / junction classification of a one-pixel-wide skeleton."""

    endpoints: np.ndarray       # (M, 2) int, (x, y)
    intersections: np.ndarray   # (K, 2) int, (x, y), pre-clustering
    connectivity: np.ndarray    # (H, W) int response image (0 off skeleton)


@dataclass
class AxisSelection:
    """Outcome of the PCA symmetry-axis comparison."""

    axis_origin: np.ndarray      # (2,) float, mask centroid (x, y)
    axis_direction: np.ndarray   # (2,) unit vector (x, y)
    ds_scores: tuple = (0.0, 0.0)
    forced_first_axis: bool = False


def medial_axis(mask: np.ndarray):
    """One-pixel-wide skeleton of the mask plus the Euclidean distance
    transform supplying the medial radius at every pixel.

    Returns (skeleton bool image, radius float image).
    """
    mask = as_mask(mask)
    if not mask.any():
        raise EmptyMaskError("cannot skeletonize an empty mask")
    skel = skeletonize(mask)
    radius = distance_transform_edt(mask)
    return skel, radius


def classify_points(skel: np.ndarray) -> TopologyPoints:
    """Convolve the skeleton with the connectivity kernel and split pixels
    into endpoints (response 11) and junction candidates (response > 12)."""
    skel = as_mask(skel)
    c = convolve(skel.astype(np.int32), CONNECTIVITY_KERNEL,
                 mode="constant", cval=0)
    c[~skel] = 0
    ey, ex = np.nonzero(c == ENDPOINT_RESPONSE)
    iy, ix = np.nonzero(c > INTERSECTION_RESPONSE)
    return TopologyPoints(
        endpoints=np.column_stack([ex, ey]).astype(np.int64),
        intersections=np.column_stack([ix, iy]).astype(np.int64),
        connectivity=c,
    )


def cluster_intersections(candidates: np.ndarray,
                          radius: float = DEFAULT_CLUSTER_RADIUS) -> np.ndarray:
    """Single-linkage clustering of junction candidates; one representative
    (the member nearest its cluster centroid) is kept per cluster."""
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1, 2)
    if len(candidates) <= 1:
        return candidates.copy()
    diff = candidates[:, None, :] - candidates[None, :, :]
    dist = np.sqrt((diff.astype(np.float64) ** 2).sum(axis=2))
    n_comp, labels = connected_components(csr_matrix(dist <= radius),
                                          directed=False)
    reps = []
    for comp in range(n_comp):
        members = candidates[labels == comp]
        center = members.mean(axis=0)
        d = np.linalg.norm(members - center, axis=1)
        order = np.lexsort((members[:, 0], members[:, 1], d))
        reps.append(members[order[0]])
    reps = np.array(reps, dtype=np.int64)
    return reps[np.lexsort((reps[:, 0], reps[:, 1]))]


def _neighbors(skel: np.ndarray, y: int, x: int):
    h, w = skel.shape
    for dy, dx in NEIGHBOR_OFFSETS:
        ny, nx = y + dy, x + dx
        if 0 <= ny < h and 0 <= nx < w and skel[ny, nx]:
            yield ny, nx


def prune(skel: np.ndarray, topo: TopologyPoints, d: float) -> np.ndarray:
    """Remove endpoint branches whose pixel count up to the first junction
    (or the far endpoint) is below d.

    Endpoint-to-endpoint walks are the trunk and are never removed. Branch
    lengths are measured on the input skeleton; removals apply afterwards,
    so several short branches fall in one pass.
    """
    skel = as_mask(skel)
    if d <= 0:
        raise ValueError("prune threshold d must be > 0")
    c = topo.connectivity
    degree = np.where(skel, c - 10, 0)
    to_remove: list[tuple[int, int]] = []
    for x, y in topo.endpoints:
        branch = [(int(y), int(x))]
        prev = None
        cur = (int(y), int(x))
        trunk = False
        while True:
            nxt = [p for p in _neighbors(skel, *cur) if p != prev]
            if not nxt:
                trunk = True  # reached the far end of a simple path
                break
            step = nxt[0]
            if degree[step] >= 3:
                break  # junction reached; branch ends before it
            if c[step] == ENDPOINT_RESPONSE:
                trunk = True
                break
            if step in branch:
                trunk = True  # closed loop; leave untouched
                break
            branch.append(step)
            prev, cur = cur, step
        if not trunk and len(branch) < d:
            to_remove.extend(branch)
    out = skel.copy()
    for y, x in to_remove:
        out[y, x] = False
    return out


def _pair_ranking(endpoints: np.ndarray):
    """Endpoint pairs ordered by: vertical separation desc, Euclidean
    separation desc, lexicographic (y, x) coordinates asc."""
    pairs = []
    for a, b in combinations(range(len(endpoints)), 2):
        pa, pb = endpoints[a], endpoints[b]
        dy = abs(int(pa[1]) - int(pb[1]))
        dist2 = float(((pa - pb) ** 2).sum())
        key = tuple(sorted([(int(pa[1]), int(pa[0])), (int(pb[1]), int(pb[0]))]))
        pairs.append((-dy, -dist2, key, a, b))
    pairs.sort()
    return [(a, b) for _, _, _, a, b in pairs]


def _bfs_path(skel: np.ndarray, start: tuple, goal: tuple):
    """Shortest path (unit cost per skeleton pixel, 8-connected) between two
    skeleton pixels, or None if disconnected. start/goal are (y, x)."""
    if start == goal:
        return [start]
    parent = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nb in _neighbors(skel, *cur):
            if nb not in parent:
                parent[nb] = cur
                if nb == goal:
                    path = [nb]
                    while path[-1] is not None:
                        nxt = parent[path[-1]]
                        if nxt is None:
                            break
                        path.append(nxt)
                    path.reverse()
                    return path
                queue.append(nb)
    return None


def trunk_path(skel: np.ndarray, endpoints: np.ndarray) -> np.ndarray:
    """Minimum-cost path between the endpoint pair of maximal vertical
    separation, ordered from the lower (max y) endpoint to the upper.

    Cost is 1 per skeleton pixel and infinite elsewhere; on a skeleton that
    is the 8-connected shortest path. Disconnected pairs fall back to the
    next-best pair; if no pair connects a NoPathError is raised.
    """
    skel = as_mask(skel)
    endpoints = np.asarray(endpoints, dtype=np.int64).reshape(-1, 2)
    if len(endpoints) < 2:
        raise NoPathError(f"need at least 2 endpoints, have {len(endpoints)}")
    for a, b in _pair_ranking(endpoints):
        pa, pb = endpoints[a], endpoints[b]
        # start from the lower endpoint (max y; tie broken by max x)
        if (pa[1], pa[0]) < (pb[1], pb[0]):
            pa, pb = pb, pa
        path = _bfs_path(skel, (int(pa[1]), int(pa[0])), (int(pb[1]), int(pb[0])))
        if path is not None:
            return np.array([(x, y) for y, x in path], dtype=np.int64)
    raise NoPathError("all endpoint pairs lie in disconnected skeleton parts")


def _inside(mask: np.ndarray, x: float, y: float) -> bool:
    """Nearest-pixel mask lookup with half-up rounding."""
    xi = int(np.floor(x + 0.5))
    yi = int(np.floor(y + 0.5))
    h, w = mask.shape
    return 0 <= xi < w and 0 <= yi < h and bool(mask[yi, xi])


def _fit_direction(points: np.ndarray) -> np.ndarray:
    """Unit direction of the least-squares line through points (total least
    squares, so vertical runs are fine)."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    vals, vecs = np.linalg.eigh(cov)
    return vecs[:, np.argmax(vals)]


def _extend(end: np.ndarray, direction: np.ndarray, boundary_dist: np.ndarray,
            limit: int) -> list:
    """Unit steps from `end` along `direction` while the next step keeps
    EXTENSION_CLEARANCE pixels of distance to the mask boundary."""
    out = []
    p = np.asarray(end, dtype=np.float64)
    h, w = boundary_dist.shape
    for _ in range(limit):
        q = p + direction
        xi = int(np.floor(q[0] + 0.5))
        yi = int(np.floor(q[1] + 0.5))
        if not (0 <= xi < w and 0 <= yi < h
                and boundary_dist[yi, xi] > EXTENSION_CLEARANCE):
            break
        out.append(q.copy())
        p = q
    return out


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    dot = abs(float(np.dot(u, v)))
    return math.acos(min(dot, 1.0))


def _tail_cut(path: np.ndarray, window: int, scan: int,
              max_turn: float) -> int:
    """Pixels to drop from the front of `path` to remove a corner tail:
    the deepest sharp turn between adjacent direction windows within the
    scan range."""
    cut = 0
    deepest = min(scan, len(path) // 2 - 2 * window)
    for j in range(0, max(deepest, 0) + 1, 2):
        a = _fit_direction(path[j:j + window])
        b = _fit_direction(path[j + window:j + 2 * window])
        if _angle_between(a, b) > max_turn:
            cut = j + window
    return cut


def trim_corner_tails(path: np.ndarray, window: int = TAIL_WINDOW,
                      scan: int = TAIL_SCAN_DEPTH,
                      max_turn: float = TAIL_MAX_TURN) -> np.ndarray:
    """Drop trunk-end pieces that bend sharply away from the adjacent trunk
    (medial-axis artifacts of blunt, square-cornered object ends)."""
    path = np.asarray(path, dtype=np.float64).reshape(-1, 2)
    if len(path) >= 4 * window:
        head_cut = _tail_cut(path, window, scan, max_turn)
        if head_cut:
            path = path[head_cut:]
    if len(path) >= 4 * window:
        tail_cut = _tail_cut(path[::-1], window, scan, max_turn)
        if tail_cut:
            path = path[:-tail_cut]
    return path


def augment(path: np.ndarray, mask: np.ndarray,
            boundary_dist: np.ndarray | None = None) -> Skeleton:
    """Extend both ends of an ordered trunk path along their local slope
    toward the mask boundary, then order the result bottommost-first.

    The local slope at an end is fit over the terminal min(25, len/4) path
    points (at least 2). Integer raster staircases limit how finely a short
    window can resolve the direction (roughly one pixel of lateral noise
    over the window length), and a misaligned extension makes the tip
    chords graze the object ends, so the window errs on the long side.
    """
    mask = as_mask(mask)
    path = np.asarray(path, dtype=np.float64).reshape(-1, 2)
    if len(path) == 0:
        raise ValueError("cannot augment an empty path")
    if boundary_dist is None:
        boundary_dist = distance_transform_edt(mask)
    limit = max(mask.shape)
    pieces = [path]
    if len(path) >= 2:
        m = max(2, min(25, len(path) // 4))
        head = path[:m]
        u = _fit_direction(head)
        if np.dot(u, head[0] - head[-1]) < 0:
            u = -u
        ext_head = _extend(path[0], u, boundary_dist, limit)
        tail = path[-m:]
        v = _fit_direction(tail)
        if np.dot(v, tail[-1] - tail[0]) < 0:
            v = -v
        ext_tail = _extend(path[-1], v, boundary_dist, limit)
        pieces = [np.array(ext_head[::-1]).reshape(-1, 2), path,
                  np.array(ext_tail).reshape(-1, 2)]
    points = np.concatenate([p for p in pieces if len(p)], axis=0)
    if points[0, 1] < points[-1, 1]:
        points = points[::-1]
    return Skeleton(points=np.ascontiguousarray(points))


def _reflect(points: np.ndarray, origin: np.ndarray, direction: np.ndarray):
    """Reflect points about the line through origin with the given unit
    direction."""
    v = points - origin
    along = v @ direction
    return origin + 2.0 * np.outer(along, direction) - v


def _pixel_keys(points: np.ndarray, shape, margin: int) -> np.ndarray:
    """Encode (x, y) points as unique integers; margin absorbs reflections
    that land outside the image."""
    stride = shape[1] + 2 * margin
    xi = np.floor(points[:, 0] + 0.5).astype(np.int64) + margin
    yi = np.floor(points[:, 1] + 0.5).astype(np.int64) + margin
    return np.unique(yi * stride + xi)


def _dissimilarity(pixels: np.ndarray, origin, direction, shape) -> float:
    """Pixel count of the symmetric differences between the mask and the
    two half-mask reflections about the candidate axis."""
    margin = shape[0] + shape[1]
    normal = np.array([-direction[1], direction[0]])
    side = (pixels - origin) @ normal
    mask_keys = _pixel_keys(pixels, shape, margin)
    total = 0.0
    for half in (pixels[side >= 0], pixels[side <= 0]):
        if len(half) == 0:
            total += len(mask_keys)
            continue
        combined = np.concatenate([half, _reflect(half, origin, direction)])
        keys = _pixel_keys(combined, shape, margin)
        common = np.intersect1d(mask_keys, keys, assume_unique=True)
        total += len(mask_keys) + len(keys) - 2 * len(common)
    return total


def select_axis(mask: np.ndarray) -> AxisSelection:
    """Pick the skeleton axis for general geometries.

    PCA of the object pixels gives two orthogonal candidate axes through the
    centroid. Each axis bisects the mask; each half is combined with its
    reflection and compared against the original, and the axis with the
    lower dissimilarity score wins. When min(DS)/max(DS) > 0.9 the object is
    near-symmetric about both, and the first principal axis (greatest
    variance) is forced so segments run across the longest dimension.
    """
    mask = as_mask(mask)
    ys, xs = np.nonzero(mask)
    if len(xs) < 2:
        raise DegenerateMaskError("axis direction undefined for < 2 pixels")
    pixels = np.column_stack([xs, ys]).astype(np.float64)
    origin = pixels.mean(axis=0)
    centered = pixels - origin
    cov = centered.T @ centered / len(pixels)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vals[1] <= 1e-9:
        # collinear mask: the line direction is the only sensible axis
        return AxisSelection(axis_origin=origin, axis_direction=vecs[:, 0],
                             ds_scores=(0.0, 0.0), forced_first_axis=True)
    ds = tuple(
        _dissimilarity(pixels, origin, vecs[:, i], mask.shape)
        for i in range(2)
    )
    hi = max(ds)
    ratio = (min(ds) / hi) if hi > 0 else 1.0
    forced = ratio > SYMMETRY_RATIO_THRESHOLD
    chosen = 0 if forced else int(np.argmin(ds))
    return AxisSelection(axis_origin=origin,
                         axis_direction=vecs[:, chosen],
                         ds_scores=ds, forced_first_axis=forced)


def construct_general(mask: np.ndarray) -> Skeleton:
    """Skeleton for general geometries: walk the selected symmetry axis in
    unit steps from the centroid until the mask boundary, both ways."""
    mask = as_mask(mask)
    sel = select_axis(mask)
    u = sel.axis_direction.copy()
    # normalize sign: point "up" (decreasing y), or +x when horizontal
    if u[1] > 0 or (u[1] == 0 and u[0] < 0):
        u = -u
    c = sel.axis_origin
    if not _inside(mask, c[0], c[1]):
        raise DegenerateMaskError("mask centroid lies outside the mask")
    boundary_dist = distance_transform_edt(mask)
    up = _extend(c, u, boundary_dist, max(mask.shape))
    down = _extend(c, -u, boundary_dist, max(mask.shape))
    points = np.array(down[::-1] + [c] + up, dtype=np.float64).reshape(-1, 2)
    if points[0, 1] < points[-1, 1]:
        points = points[::-1]
    return Skeleton(points=np.ascontiguousarray(points))


def construct_rod(mask: np.ndarray) -> Skeleton:
    """Skeleton for rod-like geometries: thinning skeleton, topology
    classification, short-branch pruning at twice the maximal medial radius,
    trunk path extraction, and extension to the mask boundary."""
    mask = as_mask(mask)
    skel, radius_map = medial_axis(mask)
    d = 2.0 * float(radius_map[skel].max())
    # Pruning iterates: cutting a branch at a junction cluster can expose a
    # leftover stub (endpoint-to-intermediate-junction piece) that is itself
    # short. Each round re-thins because removals leave 2-3 px clumps where
    # branches were cut.
    pruned = skel
    for _ in range(PRUNE_MAX_ROUNDS):
        topo = classify_points(pruned)
        nxt = prune(pruned, topo, d)
        if not nxt.any():
            raise NoPathError("pruning removed the whole skeleton")
        nxt = skeletonize(nxt)
        if np.array_equal(nxt, pruned):
            break
        pruned = nxt
    topo2 = classify_points(pruned)
    if len(topo2.endpoints) < 2:
        raise NoPathError(
            "pruned skeleton has fewer than 2 endpoints; mask is not rod-like")
    path = trunk_path(pruned, topo2.endpoints)
    path = trim_corner_tails(path)
    out = augment(path, mask, boundary_dist=radius_map)
    xi = np.clip(np.floor(out.points[:, 0] + 0.5).astype(int), 0, mask.shape[1] - 1)
    yi = np.clip(np.floor(out.points[:, 1] + 0.5).astype(int), 0, mask.shape[0] - 1)
    out.radius = radius_map[yi, xi]
    return out
