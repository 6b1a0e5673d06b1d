"""Greedy planar agglomeration engine shared by the depth leaf segmenter and
the binary-partition-tree builder.

Cost of merging two adjacent regions = squared-error increase of modeling
the union with a single refit plane, evaluated as per-pixel depth residuals
along the pixel rays.  Candidates are ordered by (cost, min_id, max_id);
leaf ids follow the canonical partition, merge products take the next ids.

Per-region pixel data (flat indices, 3D points, depths, moment sums) is
cached and concatenated child-first on merges, which fixes a canonical point
order: fits are therefore reproducible by anything that replays the same
merging sequence (the multi-view record pass relies on this).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .geometry import (
    Camera,
    Plane3D,
    PlaneFitError,
    RansacConfig,
    fit_plane_from_moments,
    fit_plane_ransac,
    pixel_rays,
    unproject_pixels,
)
from .scene_io import DepthMap


@dataclass(frozen=True)
class ViewGeometry:
    """Per-view precomputation for vectorized plane/depth evaluations."""

    rays: np.ndarray        # (H*W, 3) world ray dirs, unit camera-frame depth
    center: np.ndarray      # camera center, world frame
    depth_flat: np.ndarray  # (H*W,) float64 measured depths
    min_z: float
    max_z: float
    camera: Camera
    width: int
    height: int

    @staticmethod
    def for_view(depth: DepthMap, camera: Camera) -> "ViewGeometry":
        rays = pixel_rays(camera, depth.width, depth.height)
        return ViewGeometry(
            rays=rays,
            center=camera.center,
            depth_flat=depth.values.astype(np.float64).ravel(),
            min_z=depth.min_z,
            max_z=depth.max_z,
            camera=camera,
            width=depth.width,
            height=depth.height,
        )

    def points(self, flat_idx: np.ndarray) -> np.ndarray:
        return unproject_pixels(flat_idx, self.depth_flat[flat_idx],
                                self.rays, self.center)


@dataclass(frozen=True)
class FitPolicy:
    """Region plane fitting: RANSAC above a pixel threshold, least squares
    below, fronto-parallel median-depth fallback on degeneracy.

    RANSAC scoring runs on a deterministic stride subsample of at most
    `score_cap` points; residual sums always use every pixel.
    """

    ransac: RansacConfig
    ransac_min_px: int = 200
    score_cap: int = 1024

    @staticmethod
    def default(min_z: float, max_z: float, rng_seed: int = 0,
                refit_iterations: int = 16, ransac_min_px: int = 200,
                score_cap: int = 1024) -> "FitPolicy":
        cfg = RansacConfig(
            max_iterations=refit_iterations,
            inlier_threshold=0.01 * (max_z - min_z),
            min_inlier_fraction=0.5,
            rng_seed=rng_seed,
        )
        return FitPolicy(ransac=cfg, ransac_min_px=ransac_min_px,
                         score_cap=score_cap)


@dataclass
class RegionData:
    """Cached pixel data of one region of one view."""

    idx: np.ndarray     # flat raster indices (canonical order)
    points: np.ndarray  # (n, 3) world points at measured depths
    depths: np.ndarray  # (n,) measured depths
    psum: np.ndarray    # (3,) point sum
    pouter: np.ndarray  # (3, 3) point outer-product sum

    @property
    def count(self) -> int:
        return int(self.idx.size)

    @staticmethod
    def for_pixels(idx: np.ndarray, geo: ViewGeometry) -> "RegionData":
        points = geo.points(idx)
        return RegionData(
            idx=idx,
            points=points,
            depths=geo.depth_flat[idx],
            psum=points.sum(axis=0),
            pouter=points.T @ points,
        )

    @staticmethod
    def merged(a: "RegionData", b: "RegionData") -> "RegionData":
        return RegionData(
            idx=np.concatenate([a.idx, b.idx]),
            points=np.concatenate([a.points, b.points]),
            depths=np.concatenate([a.depths, b.depths]),
            psum=a.psum + b.psum,
            pouter=a.pouter + b.pouter,
        )


def fallback_plane(camera: Camera, depths: np.ndarray) -> Plane3D:
    """Fronto-parallel plane at the median depth of a region."""
    z_med = float(np.median(depths))
    normal = camera.rotation[2]
    offset = z_med - float(camera.translation[2])
    return Plane3D.from_normal_offset(normal, offset)


def fit_region_data(data: RegionData, policy: FitPolicy, camera: Camera) -> Plane3D:
    """Fit a region plane with the RANSAC/LSQ policy and median fallback."""
    if data.count >= policy.ransac_min_px:
        step = -(-data.count // policy.score_cap)
        try:
            plane, _ = fit_plane_ransac(data.points[::step], policy.ransac)
            return plane
        except PlaneFitError:
            pass
    try:
        return fit_plane_from_moments(data.psum, data.pouter, data.count)
    except PlaneFitError:
        return fallback_plane(camera, data.depths)


def fit_multiview(parts: list[RegionData], policy: FitPolicy, camera: Camera) -> Plane3D:
    """Fit one plane to the union of per-view region data."""
    if len(parts) == 1:
        return fit_region_data(parts[0], policy, camera)
    total = parts[0]
    for p in parts[1:]:
        total = RegionData.merged(total, p)
    return fit_region_data(total, policy, camera)


def region_sse(plane: Plane3D, data: RegionData, geo: ViewGeometry) -> float:
    """Depth distortion of a region under a plane: sum of squared residuals
    between the plane depth along each pixel ray and the measured depth.
    Rays that miss the plane count as if the plane sat at max_z, and all
    projections are clamped into the representable range, mirroring what the
    decoder reconstructs (and keeping every contribution finite)."""
    num = plane.offset - float(plane.normal @ geo.center)
    den = data.points @ plane.normal - float(plane.normal @ geo.center)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = data.depths * num / den
    bad = (np.abs(den) < 1e-12 * data.depths) | ~(s > 0)
    s = np.clip(np.where(bad, geo.max_z, s), geo.min_z, geo.max_z)
    diff = s - data.depths
    return float(diff @ diff)


def leaf_region_data(leaf, geo: ViewGeometry) -> list[RegionData]:
    """RegionData per canonical leaf region (ascending flat pixel order)."""
    flat = leaf.labels.ravel()
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(leaf.n_regions + 1))
    return [
        RegionData.for_pixels(order[bounds[r]:bounds[r + 1]], geo)
        for r in range(leaf.n_regions)
    ]


class MergeRecord:
    """Structure collected while agglomerating to the root (BPT contents)."""

    def __init__(self, n_leaves: int):
        m = 2 * n_leaves - 1
        self.children = np.full((m, 2), -1, np.int32)
        self.plane_normals = np.zeros((m, 3), np.float64)
        self.plane_offsets = np.zeros(m, np.float64)
        self.node_d = np.zeros(m, np.float64)
        self.node_dd = np.zeros(m, np.float64)
        self.pixel_counts = np.zeros(m, np.int64)
        self.merging_sequence: list[tuple[int, int, int]] = []


def _adjacency(labels: np.ndarray, n: int) -> list[set]:
    nbrs: list[set] = [set() for _ in range(n)]
    for la, lb in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = la != lb
        pairs = np.unique(
            np.stack([np.minimum(la[diff], lb[diff]), np.maximum(la[diff], lb[diff])], 1),
            axis=0,
        )
        for a, b in pairs:
            nbrs[a].add(int(b))
            nbrs[b].add(int(a))
    return nbrs


def agglomerate_planar(leaf, geo: ViewGeometry, policy: FitPolicy,
                       stop_regions: int = 1, record: MergeRecord | None = None):
    """Merge adjacent regions of `leaf` greedily by plane-refit cost.

    Returns (final_of_leaf, record): final_of_leaf maps each leaf region id
    to the id of the region containing it when merging stopped.  Node ids of
    merge products continue after the leaf ids, in merge order.
    """
    n_leaves = leaf.n_regions
    max_ids = 2 * n_leaves - 1

    data: list = [None] * max_ids
    d_val = np.zeros(max_ids, np.float64)
    alive = np.zeros(max_ids, bool)
    absorbed = np.full(max_ids, -1, np.int64)

    for r, rd in enumerate(leaf_region_data(leaf, geo)):
        data[r] = rd
        plane = fit_region_data(rd, policy, geo.camera)
        d_val[r] = region_sse(plane, rd, geo)
        alive[r] = True
        if record is not None:
            record.plane_normals[r] = plane.normal
            record.plane_offsets[r] = plane.offset
            record.node_d[r] = d_val[r]
            record.pixel_counts[r] = rd.count

    nbrs = _adjacency(leaf.labels, n_leaves)
    cache: dict = {}
    heap: list = []

    def evaluate(a: int, b: int):
        union = RegionData.merged(data[a], data[b])
        plane = fit_region_data(union, policy, geo.camera)
        d_union = region_sse(plane, union, geo)
        cache[(a, b)] = (union, plane, d_union)
        heapq.heappush(heap, (d_union - d_val[a] - d_val[b], a, b))

    for a in range(n_leaves):
        for b in nbrs[a]:
            if a < b:
                evaluate(a, b)

    def resolve(x: int) -> int:
        while absorbed[x] >= 0:
            x = int(absorbed[x])
        return x

    next_id = n_leaves
    alive_cnt = n_leaves
    while alive_cnt > stop_regions and heap:
        dd, a, b = heapq.heappop(heap)
        if not (alive[a] and alive[b]):
            cache.pop((a, b), None)
            continue
        union, plane, d_union = cache.pop((a, b))
        c = next_id
        next_id += 1
        data[c] = union
        d_val[c] = d_union
        alive[a] = alive[b] = False
        alive[c] = True
        absorbed[a] = absorbed[b] = c
        alive_cnt -= 1
        data[a] = data[b] = None

        if record is not None:
            record.children[c] = (a, b)
            record.plane_normals[c] = plane.normal
            record.plane_offsets[c] = plane.offset
            record.node_d[c] = d_union
            record.node_dd[c] = dd
            record.pixel_counts[c] = union.count
            record.merging_sequence.append((a, b, c))

        merged_nbrs = set()
        for r in nbrs[a] | nbrs[b]:
            r = resolve(r)
            if r != c and alive[r]:
                merged_nbrs.add(r)
        nbrs.append(merged_nbrs)
        for r in sorted(merged_nbrs):
            evaluate(min(r, c), max(r, c))

    final_of_leaf = np.array([resolve(r) for r in range(n_leaves)], np.int64)
    return final_of_leaf, record
