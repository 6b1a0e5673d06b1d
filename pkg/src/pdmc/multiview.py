"""Multi-view fusion: partition projection into the reference view, occlusion
handling, accumulation, joint rate-distortion records, and back-projection of
the optimized reference partition into per-view coding partitions.

Occluded-region rule: a source region whose surviving (nearest-depth) pixels
in the reference raster number less than half its source pixels is excluded
from the joint optimization and coded independently in its own view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from ._merging import (
    FitPolicy,
    RegionData,
    ViewGeometry,
    fit_region_data,
    region_sse,
)
from .geometry import Camera, project_points
from .hierarchy import Hierarchy
from .partition import Partition, connected_components
from .rdopt import RateModel, RdRecords, aggregate_contours, tagged_pair_counts
from .scene_io import DepthMap


class MultiviewError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectedPartition:
    """One view's optimized partition carried into the reference raster."""

    labels: np.ndarray          # (H, W) int32 in ref raster, -1 where empty
    correspondence: np.ndarray  # (H, W) int64: source pixel -> ref flat index
    occluded: tuple             # sorted source region ids dropped as occluded
    visible_counts: np.ndarray  # (R_src,) surviving ref pixels per region
    source: Partition

    @property
    def occluded_rank(self) -> dict:
        return {r: k for k, r in enumerate(self.occluded)}


def project_partition(p: Partition, depth: DepthMap, cam_src: Camera,
                      cam_ref: Camera) -> ProjectedPartition:
    """Forward-project a partition into the reference view.

    Pixels are processed in scan order, land on the nearest integer ref
    pixel, and conflicts keep the smallest projected depth.  Regions left
    with fewer than half their pixels are recorded as occluded and removed.
    """
    h, w = p.labels.shape
    geo = ViewGeometry.for_view(depth, cam_src)
    points = geo.center + geo.rays * geo.depth_flat[:, None]
    uv, z, in_front = project_points(points, cam_ref)
    with np.errstate(invalid="ignore"):
        ui = np.rint(uv[:, 0]).astype(np.int64)
        vi = np.rint(uv[:, 1]).astype(np.int64)

    valid = in_front & (ui >= 0) & (ui < w) & (vi >= 0) & (vi < h)
    sel = np.nonzero(valid)[0]
    ref_flat = vi[sel] * w + ui[sel]
    order = np.lexsort((sel, z[sel], ref_flat))
    ref_sorted = ref_flat[order]
    first = np.ones(ref_sorted.size, bool)
    first[1:] = ref_sorted[1:] != ref_sorted[:-1]

    src_flat = p.labels.ravel()
    labels = np.full(h * w, -1, np.int32)
    labels[ref_sorted[first]] = src_flat[sel[order[first]]]

    visible = np.bincount(labels[labels >= 0], minlength=p.n_regions).astype(np.int64)
    occluded = tuple(int(r) for r in np.nonzero(visible * 2 < p.region_sizes)[0])
    if occluded:
        drop = np.isin(labels, np.array(occluded))
        labels[drop] = -1

    corr = np.arange(h * w, dtype=np.int64)
    corr[valid] = vi[valid] * w + ui[valid]
    # out-of-frame projections are clamped so every pixel keeps a reference
    out = in_front & ~valid
    corr[out] = (np.clip(vi[out], 0, h - 1) * w + np.clip(ui[out], 0, w - 1))

    return ProjectedPartition(
        labels=labels.reshape(h, w),
        correspondence=corr.reshape(h, w),
        occluded=occluded,
        visible_counts=visible,
        source=p,
    )


def identity_projection(p: Partition) -> ProjectedPartition:
    """Projection of a view onto itself, bypassing the camera math.

    The geometric path with cam_src == cam_ref must reduce to exactly this
    (regression-tested); the single-view encoder uses it directly.
    """
    h, w = p.labels.shape
    return ProjectedPartition(
        labels=p.labels.copy(),
        correspondence=np.arange(h * w, dtype=np.int64).reshape(h, w),
        occluded=(),
        visible_counts=p.region_sizes.copy(),
        source=p,
    )


def accumulate(projected: list[ProjectedPartition]) -> Partition:
    """Fuse projected partitions into the initial reference partition.

    Pixels covered by every view take the tuple of per-view labels; empty
    pixels get fresh labels keyed by the tuple of nearest labeled pixels per
    view, then everything is normalized into 4-connected regions.
    """
    if not projected:
        raise MultiviewError("no projections to accumulate")
    shape = projected[0].labels.shape
    if any(pp.labels.shape != shape for pp in projected):
        raise MultiviewError("projections disagree on the reference raster")

    stack = np.stack([pp.labels for pp in projected])
    radii = [int(pp.labels.max()) + 2 for pp in projected]
    if np.prod(radii, dtype=np.float64) > 2**62:
        raise MultiviewError("label combination space overflow")

    combined = np.zeros(shape, np.int64)
    filled = np.zeros(shape, np.int64)
    for v, pp in enumerate(projected):
        lab = stack[v]
        empty = lab < 0
        if np.any(empty):
            iy, ix = distance_transform_edt(empty, return_indices=True)[1]
            near = lab[iy, ix]
        else:
            near = lab
        combined = combined * radii[v] + (lab + 1)
        filled = filled * radii[v] + (near + 1)

    holes = np.any(stack < 0, axis=0)
    total = int(np.prod(radii, dtype=np.int64))
    labels = np.where(holes, filled + total, combined)
    return connected_components(labels)


def group_label_maps(p_ref_ini: Partition, projected: list[ProjectedPartition]):
    """Per-view label maps over the hierarchy's leaf ids.

    Every source pixel maps through its ref correspondence to a leaf of the
    accumulated partition; pixels of occluded regions map instead to a
    per-view bucket id placed beyond every hierarchy node id (2L-1 upward),
    so they can never be mistaken for a mergeable node.
    """
    n_leaves = p_ref_ini.n_regions
    bucket_base = 2 * n_leaves - 1
    ref_flat = p_ref_ini.labels.ravel()
    maps = []
    for pp in projected:
        gl = ref_flat[pp.correspondence.ravel()].astype(np.int64)
        if pp.occluded:
            rank = pp.occluded_rank
            src = pp.source.labels.ravel()
            for r, k in rank.items():
                gl[src == r] = bucket_base + k
        maps.append(gl.reshape(pp.labels.shape))
    return maps


@dataclass(frozen=True)
class MultiViewRecordDetails:
    """Per-view breakdown behind the aggregated node records."""

    d_per_view: np.ndarray      # (V, M)
    present: np.ndarray         # (V, M) node has pixels in the view
    cross_depth: np.ndarray     # (V, M)
    cross_color: np.ndarray     # (V, M)


def multiview_records(h_ref: Hierarchy, geos: list[ViewGeometry],
                      group_maps: list[np.ndarray],
                      lp_color_labels: list, model: RateModel,
                      policy: FitPolicy, ref_camera: Camera | None = None):
    """Joint rate-distortion records for a reference-view hierarchy.

    Each node's plane is fit once over the union of its 3D points from all
    views and evaluated per view; distortion increments and tagged contour
    counts add up across views, while the texture cost stays one plane per
    node (that sharing is the point of the joint coding).
    """
    n_views = len(geos)
    if not (len(group_maps) == len(lp_color_labels) == n_views):
        raise MultiviewError("per-view inputs disagree")
    m = h_ref.n_nodes
    n_leaves = h_ref.n_leaves

    data = [[None] * m for _ in range(n_views)]
    for v, geo in enumerate(geos):
        flat = group_maps[v].ravel()
        order = np.argsort(flat, kind="stable")
        svals = flat[order]
        bounds = np.searchsorted(svals, np.arange(n_leaves + 1))
        for leaf in range(n_leaves):
            idx = order[bounds[leaf]:bounds[leaf + 1]]
            if idx.size:
                data[v][leaf] = RegionData.for_pixels(idx, geo)
    for a, b, p in h_ref.merging_sequence:
        for v in range(n_views):
            da, db = data[v][a], data[v][b]
            if da is None:
                data[v][p] = db
            elif db is None:
                data[v][p] = da
            else:
                data[v][p] = RegionData.merged(da, db)

    d_per_view = np.zeros((n_views, m))
    present = np.zeros((n_views, m), bool)
    fallback_camera = ref_camera if ref_camera is not None else geos[0].camera
    for node in range(m):
        parts = [data[v][node] for v in range(n_views) if data[v][node] is not None]
        if not parts:
            continue
        union = parts[0]
        for extra in parts[1:]:
            union = RegionData.merged(union, extra)
        plane = fit_region_data(union, policy, fallback_camera)
        for v in range(n_views):
            if data[v][node] is not None:
                present[v, node] = True
                d_per_view[v, node] = region_sse(plane, data[v][node], geos[v])

    counts = [
        tagged_pair_counts(group_maps[v], lp_color_labels[v])
        for v in range(n_views)
    ]
    perim_d, perim_c, cross_d, cross_c = aggregate_contours(h_ref, counts)
    records = RdRecords(
        d=d_per_view.sum(axis=0),
        r_texture=np.full(m, model.r_t),
        r_contour=0.5 * (model.c_a * perim_d.sum(axis=0)
                         + model.c_a_color * perim_c.sum(axis=0)),
        cross_depth=cross_d.sum(axis=0),
        cross_color=cross_c.sum(axis=0),
        model=model,
    )
    details = MultiViewRecordDetails(
        d_per_view=d_per_view,
        present=present,
        cross_depth=cross_d,
        cross_color=cross_c,
    )
    return records, details


@dataclass(frozen=True)
class CodingTarget:
    """Per-view coding partition derived from the reference optimum."""

    ideal_codes: np.ndarray       # (H, W): ref region label, or
                                  # n_ref_regions + occluded rank
    partition: Partition          # 4-connected normalization of ideal_codes
    region_ref_label: np.ndarray  # (R,) ref label per region, -1 if occluded
    region_occluded: np.ndarray   # (R,) bool


def backproject_coding_partitions(p_ref: Partition,
                                  projected: list[ProjectedPartition]):
    """Carry the optimized reference partition back into each view.

    Non-occluded pixels take the reference label found through their stored
    correspondence; occluded regions keep dedicated labels appended after the
    reference ids, so reference merges can never touch them.
    """
    n_ref = p_ref.n_regions
    ref_flat = p_ref.labels.ravel()
    targets = []
    for pp in projected:
        codes = ref_flat[pp.correspondence.ravel()].astype(np.int64)
        if pp.occluded:
            src = pp.source.labels.ravel()
            for r, k in pp.occluded_rank.items():
                codes[src == r] = n_ref + k
        codes = codes.reshape(pp.labels.shape)
        part = connected_components(codes)
        first = np.zeros(part.n_regions, np.int64)
        flat_part = part.labels.ravel()
        uniq, first_idx = np.unique(flat_part, return_index=True)
        first[uniq] = codes.ravel()[first_idx]
        occ = first >= n_ref
        targets.append(
            CodingTarget(
                ideal_codes=codes,
                partition=part,
                region_ref_label=np.where(occ, -1, first),
                region_occluded=occ,
            )
        )
    return targets
