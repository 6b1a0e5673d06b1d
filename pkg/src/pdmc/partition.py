"""Dense label-map partitions and contour-element bookkeeping.

A Partition is a canonical label map: region ids are 0..R-1 in raster order
of first occurrence, every region is 4-connected, and a per-region table
(pixel counts, bounding boxes) is kept alongside.  Boundary elements (pairs
of 4-adjacent pixels with different labels) are represented as two boolean
masks, one for horizontal neighbor pairs and one for vertical pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cs_components

from ._pixel_merge import greedy_color_labels
from .geometry import Camera
from .scene_io import ColorImage, DepthMap


class PartitionError(ValueError):
    """Invalid label map, region id, or partition combination."""


@dataclass(frozen=True)
class Partition:
    """Canonical dense segmentation of a raster."""

    labels: np.ndarray        # (H, W) int32, values 0..R-1
    region_sizes: np.ndarray  # (R,) int64
    region_bboxes: np.ndarray  # (R, 4) int32: y0, x0, y1, x1 (half-open)

    def __post_init__(self):
        object.__setattr__(self, "labels", np.ascontiguousarray(self.labels, dtype=np.int32))
        self.labels.flags.writeable = False

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_regions(self) -> int:
        return int(self.region_sizes.shape[0])

    @staticmethod
    def from_labels(labels: np.ndarray) -> "Partition":
        """Canonicalize an arbitrary label map without re-deriving
        connectivity; the caller guarantees regions are 4-connected."""
        canon = canonical_relabel(labels)
        return Partition(canon, *_region_table(canon))

    def region_pixels(self, region: int) -> np.ndarray:
        """Sorted flat raster indices of one region."""
        if not 0 <= region < self.n_regions:
            raise PartitionError(f"invalid region id {region}")
        return np.nonzero(self.labels.ravel() == region)[0]

    def region_pixel_lists(self) -> list:
        """Sorted flat raster indices of every region (single pass)."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(self.n_regions + 1))
        return [order[bounds[r]:bounds[r + 1]] for r in range(self.n_regions)]


def _region_table(labels: np.ndarray):
    n = int(labels.max()) + 1 if labels.size else 0
    sizes = np.bincount(labels.ravel(), minlength=n).astype(np.int64)
    ys, xs = np.nonzero(np.ones_like(labels, dtype=bool))
    flat = labels.ravel()
    bboxes = np.zeros((n, 4), np.int32)
    bboxes[:, 0] = _group_reduce(flat, ys, n, np.minimum, labels.shape[0])
    bboxes[:, 1] = _group_reduce(flat, xs, n, np.minimum, labels.shape[1])
    bboxes[:, 2] = _group_reduce(flat, ys, n, np.maximum, -1) + 1
    bboxes[:, 3] = _group_reduce(flat, xs, n, np.maximum, -1) + 1
    return sizes, bboxes


def _group_reduce(groups, values, n, ufunc, init):
    out = np.full(n, init, values.dtype)
    ufunc.at(out, groups, values)
    return out


def canonical_relabel(labels: np.ndarray) -> np.ndarray:
    """Relabel so ids are 0..R-1 in raster order of first occurrence."""
    flat = np.asarray(labels).ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse].reshape(np.asarray(labels).shape).astype(np.int32)


def components_from_connectivity(conn_h: np.ndarray, conn_v: np.ndarray) -> np.ndarray:
    """Canonical labels of the 4-connected components induced by boolean
    "connected" masks for horizontal (H, W-1) and vertical (H-1, W) pairs."""
    h, w = conn_v.shape[0] + 1, conn_h.shape[1] + 1
    idx = np.arange(h * w).reshape(h, w)
    rows = []
    cols = []
    hy, hx = np.nonzero(conn_h)
    rows.append(idx[hy, hx])
    cols.append(idx[hy, hx + 1])
    vy, vx = np.nonzero(conn_v)
    rows.append(idx[vy, vx])
    cols.append(idx[vy + 1, vx])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(rows.size, np.int8), (rows, cols)), shape=(h * w, h * w))
    _, comp = _cs_components(graph, directed=False)
    return canonical_relabel(comp.reshape(h, w))


def connected_components(labels: np.ndarray) -> Partition:
    """Split a label map into canonical 4-connected regions."""
    lab = np.asarray(labels)
    if lab.ndim != 2 or lab.size == 0:
        raise PartitionError("label map must be a non-empty 2D array")
    conn_h = lab[:, :-1] == lab[:, 1:]
    conn_v = lab[:-1, :] == lab[1:, :]
    canon = components_from_connectivity(conn_h, conn_v)
    return Partition(canon, *_region_table(canon))


# ---------------------------------------------------------------------------
# boundary elements


@dataclass(frozen=True)
class BoundarySet:
    """Set of boundary elements as horizontal/vertical pair masks."""

    horizontal: np.ndarray  # (H, W-1) bool: element between (y,x) and (y,x+1)
    vertical: np.ndarray    # (H-1, W) bool: element between (y,x) and (y+1,x)

    @property
    def count(self) -> int:
        return int(self.horizontal.sum()) + int(self.vertical.sum())

    def __or__(self, other: "BoundarySet") -> "BoundarySet":
        return BoundarySet(self.horizontal | other.horizontal,
                           self.vertical | other.vertical)

    def minus(self, other: "BoundarySet") -> "BoundarySet":
        return BoundarySet(self.horizontal & ~other.horizontal,
                           self.vertical & ~other.vertical)

    def issubset(self, other: "BoundarySet") -> bool:
        return (not np.any(self.horizontal & ~other.horizontal)
                and not np.any(self.vertical & ~other.vertical))

    def __eq__(self, other) -> bool:
        return (np.array_equal(self.horizontal, other.horizontal)
                and np.array_equal(self.vertical, other.vertical))


def boundary_set(p: Partition) -> BoundarySet:
    return BoundarySet(p.labels[:, :-1] != p.labels[:, 1:],
                       p.labels[:-1, :] != p.labels[1:, :])


def common_boundary_count(p: Partition, r1: int, r2: int) -> int:
    """Number of boundary elements between two regions."""
    if r1 == r2:
        raise PartitionError("regions must differ")
    for r in (r1, r2):
        if not 0 <= r < p.n_regions:
            raise PartitionError(f"invalid region id {r}")
    la, lb = p.labels[:, :-1], p.labels[:, 1:]
    h = np.count_nonzero(((la == r1) & (lb == r2)) | ((la == r2) & (lb == r1)))
    la, lb = p.labels[:-1, :], p.labels[1:, :]
    v = np.count_nonzero(((la == r1) & (lb == r2)) | ((la == r2) & (lb == r1)))
    return int(h + v)


def pair_boundary_counts(labels: np.ndarray, element_h: np.ndarray | None = None,
                         element_v: np.ndarray | None = None) -> dict:
    """Counts of boundary elements per unordered label pair.

    Optional masks restrict which elements are counted (used for the
    color/depth provenance split of the rate model).
    """
    counts: dict = {}
    for (la, lb, mask) in (
        (labels[:, :-1], labels[:, 1:], element_h),
        (labels[:-1, :], labels[1:, :], element_v),
    ):
        diff = la != lb
        if mask is not None:
            diff = diff & mask
        a = la[diff]
        b = lb[diff]
        lo = np.minimum(a, b).astype(np.int64)
        hi = np.maximum(a, b).astype(np.int64)
        keys = lo * (int(labels.max()) + 2) + hi
        uniq, cnt = np.unique(keys, return_counts=True)
        base = int(labels.max()) + 2
        for k, c in zip(uniq, cnt):
            pair = (int(k // base), int(k % base))
            counts[pair] = counts.get(pair, 0) + int(c)
    return counts


def adjacent_pairs(p: Partition) -> list:
    """Adjacent region pairs sorted by (min_label, max_label)."""
    return sorted(pair_boundary_counts(p.labels).keys())


def refines(fine: Partition, coarse: Partition) -> bool:
    """True iff every region of `fine` lies inside one region of `coarse`."""
    if fine.labels.shape != coarse.labels.shape:
        return False
    pairs = np.stack([fine.labels.ravel(), coarse.labels.ravel()], axis=1)
    return np.unique(pairs, axis=0).shape[0] == fine.n_regions


def boundary_provenance(p_cd: Partition, lp_color: Partition, lp_depth: Partition):
    """Split the boundary elements of a fused partition by provenance.

    Returns (color_elements, depth_elements): an element is tagged color iff
    its two pixels carry different color-partition labels (such contours are
    free at the decoder); everything else is tagged depth.
    """
    if not (refines(p_cd, lp_color) and refines(p_cd, lp_depth)):
        raise PartitionError("fused partition must refine both leaf partitions")
    elems = boundary_set(p_cd)
    color_h = lp_color.labels[:, :-1] != lp_color.labels[:, 1:]
    color_v = lp_color.labels[:-1, :] != lp_color.labels[1:, :]
    color = BoundarySet(elems.horizontal & color_h, elems.vertical & color_v)
    depth = elems.minus(color)
    return color, depth


def intersect(a: Partition, b: Partition) -> Partition:
    """Finest common refinement; keeps all boundaries of both inputs."""
    if a.labels.shape != b.labels.shape:
        raise PartitionError("partition dimensions do not match")
    combined = a.labels.astype(np.int64) * (b.n_regions + 1) + b.labels
    return connected_components(combined)


# ---------------------------------------------------------------------------
# leaf segmenters


def leaf_color_partition(image: ColorImage, n_regs_color: int) -> Partition:
    """Deterministic color leaf partition by greedy pixel merging.

    Pure function of (image, n_regs_color): encoder and decoder instances
    produce bit-identical label maps from the same decoded color image.
    """
    if n_regs_color < 1:
        raise PartitionError("n_regs_color must be >= 1")
    raw = greedy_color_labels(image.values, n_regs_color)
    canon = canonical_relabel(raw)
    return Partition(canon, *_region_table(canon))


def grid_partition(height: int, width: int, cell: int) -> Partition:
    """Regular seed grid: rectangular cells of roughly `cell` pixels."""
    ys = np.arange(height) // cell
    xs = np.arange(width) // cell
    labels = ys[:, None] * (xs.max() + 1) + xs[None, :]
    return Partition.from_labels(labels)


def leaf_depth_partition(depth: DepthMap, camera: Camera, n_regs_depth: int,
                         cell: int = 8) -> Partition:
    """Depth leaf partition: greedy merging of a regular seed grid, merge
    cost = increase of the planar-fit squared error under a refit plane."""
    from ._merging import FitPolicy, ViewGeometry, agglomerate_planar

    if n_regs_depth < 1:
        raise PartitionError("n_regs_depth must be >= 1")
    seeds = grid_partition(depth.height, depth.width, cell)
    if seeds.n_regions <= n_regs_depth:
        return seeds
    geo = ViewGeometry.for_view(depth, camera)
    policy = FitPolicy.default(depth.min_z, depth.max_z)
    final_of_leaf, _ = agglomerate_planar(seeds, geo, policy,
                                          stop_regions=n_regs_depth)
    labels = final_of_leaf[seeds.labels]
    canon = canonical_relabel(labels)
    return Partition(canon, *_region_table(canon))


def single_region_partition(height: int, width: int) -> Partition:
    return Partition.from_labels(np.zeros((height, width), np.int32))


# ---------------------------------------------------------------------------
# label map serialization (16-bit PGM)


def save_label_map(path, p: Partition) -> None:
    from .scene_io import write_pgm16

    if p.n_regions > 65536:
        raise PartitionError("label map does not fit in 16-bit PGM")
    write_pgm16(path, p.labels.astype(np.uint16))


def load_label_map(path) -> Partition:
    from .scene_io import read_pgm16

    return connected_components(read_pgm16(path).astype(np.int32))
