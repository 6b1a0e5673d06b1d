"""Binary partition tree over a leaf partition with per-node plane models.

Node ids: leaves are the canonical leaf-partition region ids 0..L-1, merge
products take ids L..2L-2 in merge order, the last node is the root.  The
merging sequence stores the (child_a, child_b, parent) triples in order, so
its prefixes define the L nested partitions of the classic analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._merging import FitPolicy, MergeRecord, ViewGeometry, agglomerate_planar
from .geometry import Camera, Plane3D, RansacConfig
from .partition import Partition, canonical_relabel
from .scene_io import DepthMap


class HierarchyError(ValueError):
    """Invalid cut or out-of-range request on a hierarchy."""


@dataclass(frozen=True)
class Hierarchy:
    leaf_partition: Partition
    children: np.ndarray       # (M, 2) int32, -1 for leaves
    parent: np.ndarray         # (M,) int32, -1 for the root
    plane_normals: np.ndarray  # (M, 3)
    plane_offsets: np.ndarray  # (M,)
    node_d: np.ndarray         # squared depth error of each node's own plane
    node_dd: np.ndarray        # distortion increment stored at merge time
    pixel_counts: np.ndarray   # (M,)
    merging_sequence: np.ndarray  # (L-1, 3) int32: child_a, child_b, parent

    @property
    def n_leaves(self) -> int:
        return self.leaf_partition.n_regions

    @property
    def n_nodes(self) -> int:
        return int(self.children.shape[0])

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def is_leaf(self, node: int) -> bool:
        return self.children[node, 0] < 0

    def plane(self, node: int) -> Plane3D:
        return Plane3D.from_normal_offset(self.plane_normals[node],
                                          self.plane_offsets[node])

    def leaves_under(self, node: int) -> np.ndarray:
        """Leaf ids covered by a node, ascending."""
        out = []
        stack = [int(node)]
        while stack:
            n = stack.pop()
            if self.children[n, 0] < 0:
                out.append(n)
            else:
                stack.extend((int(self.children[n, 0]), int(self.children[n, 1])))
        return np.array(sorted(out), np.int32)


def build_bpt(leaf: Partition, depth: DepthMap, camera: Camera,
              ransac: RansacConfig | None = None,
              policy: FitPolicy | None = None) -> Hierarchy:
    """Greedy agglomeration of the leaf partition by minimal distortion
    increment under plane refits; ties go to the smallest (min_id, max_id)."""
    if policy is None:
        if ransac is not None:
            policy = FitPolicy(ransac=ransac)
        else:
            policy = FitPolicy.default(depth.min_z, depth.max_z)
    geo = ViewGeometry.for_view(depth, camera)
    record = MergeRecord(leaf.n_regions)
    agglomerate_planar(leaf, geo, policy, stop_regions=1, record=record)
    return _hierarchy_from_record(leaf, record)


def _hierarchy_from_record(leaf: Partition, record: MergeRecord) -> Hierarchy:
    m = record.children.shape[0]
    parent = np.full(m, -1, np.int32)
    for a, b, p in record.merging_sequence:
        parent[a] = p
        parent[b] = p
    return Hierarchy(
        leaf_partition=leaf,
        children=record.children,
        parent=parent,
        plane_normals=record.plane_normals,
        plane_offsets=record.plane_offsets,
        node_d=record.node_d,
        node_dd=record.node_dd,
        pixel_counts=record.pixel_counts,
        merging_sequence=np.array(record.merging_sequence, np.int32).reshape(-1, 3),
    )


# ---------------------------------------------------------------------------
# cuts


def validate_cut(h: Hierarchy, cut) -> np.ndarray:
    """Check that `cut` is an antichain whose regions tile the image."""
    nodes = np.unique(np.asarray(cut, dtype=np.int64))
    if nodes.size == 0 or nodes[0] < 0 or nodes[-1] >= h.n_nodes:
        raise HierarchyError("cut contains invalid node ids")
    marked = np.zeros(h.n_nodes, bool)
    marked[nodes] = True
    covered = 0
    for node in nodes:
        p = h.parent[node]
        while p >= 0:
            if marked[p]:
                raise HierarchyError("cut is not an antichain")
            p = h.parent[p]
        covered += h.pixel_counts[node]
    if covered != h.pixel_counts[h.root]:
        raise HierarchyError("cut does not cover the image")
    return nodes.astype(np.int32)


def cover_of_leaves(h: Hierarchy, cut) -> np.ndarray:
    """For each leaf, the cut node covering it."""
    nodes = validate_cut(h, cut)
    marked = np.zeros(h.n_nodes, bool)
    marked[nodes] = True
    cover = np.full(h.n_leaves, -1, np.int64)
    for leaf in range(h.n_leaves):
        n = leaf
        while n >= 0 and not marked[n]:
            n = h.parent[n]
        if n < 0:
            raise HierarchyError("cut does not cover the image")
        cover[leaf] = n
    return cover


def cut_to_partition(h: Hierarchy, cut) -> Partition:
    """Partition whose regions are exactly the cut nodes' pixel sets."""
    cover = cover_of_leaves(h, cut)
    labels = cover[h.leaf_partition.labels]
    return Partition.from_labels(canonical_relabel(labels))


def merging_sequence_cut(h: Hierarchy, k: int) -> np.ndarray:
    """The cut with k regions obtained by undoing the last k-1 merges."""
    if not 1 <= k <= h.n_leaves:
        raise HierarchyError(f"k={k} out of range [1, {h.n_leaves}]")
    n_merges = h.n_leaves - k
    absorbed = np.zeros(h.n_nodes, bool)
    present = np.zeros(h.n_nodes, bool)
    present[: h.n_leaves] = True
    for a, b, p in h.merging_sequence[:n_merges]:
        absorbed[a] = absorbed[b] = True
        present[p] = True
    return np.nonzero(present & ~absorbed)[0].astype(np.int32)


def cut_at(h: Hierarchy, k: int) -> Partition:
    """Partition with k regions along the merging sequence."""
    return cut_to_partition(h, merging_sequence_cut(h, k))


def dump_tree(h: Hierarchy, path, records=None) -> None:
    """Debug text dump: node_id child1 child2 pixel_count plane dD dR."""
    with open(path, "w", encoding="ascii") as fh:
        for n in range(h.n_nodes):
            nx, ny, nz = h.plane_normals[n]
            if records is not None and not h.is_leaf(n):
                a, b = h.children[n]
                dr = records.r[n] - records.r[a] - records.r[b]
            else:
                dr = 0.0
            fh.write(
                f"{n} {h.children[n, 0]} {h.children[n, 1]} {h.pixel_counts[n]} "
                f"plane({nx:.9g} {ny:.9g} {nz:.9g} {h.plane_offsets[n]:.9g}) "
                f"{h.node_dd[n]:.9g} {dr:.9g}\n"
            )
