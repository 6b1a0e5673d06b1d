"""Partition payload coding: Freeman crack-edge chains for added depth
boundaries and per-color-pair active-boundary bits.

Boundary elements are carried as crack edges on the (H+1) x (W+1) corner
lattice: the element between horizontal pixel neighbors (y, x)-(y, x+1) is
the vertical crack from corner (y, x+1) to (y+1, x+1); the element between
vertical neighbors is the horizontal crack below them.  A chain is a start
corner (two 16-bit fields), a 2-bit absolute initial direction, then
differential symbols: '0' straight ahead, '10' turn left, and the escape
'11' followed by one bit choosing turn-right / end-of-chain.  A walk never
reverses (that would re-traverse its own crack), so three moves suffice.
"""

from __future__ import annotations

import numpy as np

from .bitio import BitReader, BitWriter, DecodeError
from .partition import (
    BoundarySet,
    Partition,
    boundary_set,
    components_from_connectivity,
    pair_boundary_counts,
)

# directions on the corner lattice: N, E, S, W
_STEP = ((-1, 0), (0, 1), (1, 0), (0, -1))


class ContourError(ValueError):
    pass


def added_boundaries(p_cod: Partition, lp_color: Partition) -> BoundarySet:
    """Boundary elements of the coding partition absent from the color one."""
    if p_cod.labels.shape != lp_color.labels.shape:
        raise ContourError("partitions disagree on the raster")
    return boundary_set(p_cod).minus(boundary_set(lp_color))


def _edges_from_elements(b: BoundarySet):
    """(vcrack, hcrack) boolean masks over the corner lattice."""
    h, w = b.vertical.shape[0] + 1, b.horizontal.shape[1] + 1
    vcrack = np.zeros((h, w + 1), bool)   # vcrack[r, c]: (r,c)-(r+1,c)
    hcrack = np.zeros((h + 1, w), bool)   # hcrack[r, c]: (r,c)-(r,c+1)
    ey, ex = np.nonzero(b.horizontal)
    vcrack[ey, ex + 1] = True
    ey, ex = np.nonzero(b.vertical)
    hcrack[ey + 1, ex] = True
    return vcrack, hcrack


def _elements_from_edges(vcrack: np.ndarray, hcrack: np.ndarray,
                         height: int, width: int) -> BoundarySet:
    horizontal = np.zeros((height, width - 1), bool)
    vertical = np.zeros((height - 1, width), bool)
    ry, rc = np.nonzero(vcrack)
    if np.any((rc < 1) | (rc > width - 1)):
        raise DecodeError("contour chain crosses the image border")
    horizontal[ry, rc - 1] = True
    ry, rc = np.nonzero(hcrack)
    if np.any((ry < 1) | (ry > height - 1)):
        raise DecodeError("contour chain crosses the image border")
    vertical[ry - 1, rc] = True
    return BoundarySet(horizontal, vertical)


def _edge_key(r: int, c: int, d: int):
    """Canonical undirected identity of the crack edge leaving (r, c) in d."""
    if d == 0:
        return ("v", r - 1, c)
    if d == 2:
        return ("v", r, c)
    if d == 3:
        return ("h", r, c - 1)
    return ("h", r, c)


def encode_depth_contours(p_cod: Partition, lp_color: Partition) -> bytes:
    """Chain-code the added depth boundaries (byte-aligned payload)."""
    return encode_boundary_chains(added_boundaries(p_cod, lp_color))


def encode_boundary_chains(elements: BoundarySet) -> bytes:
    height = elements.vertical.shape[0] + 1
    width = elements.horizontal.shape[1] + 1
    if height - 1 > 0xFFFF or width - 1 > 0xFFFF:
        raise ContourError("raster too large for 16-bit chain anchors")
    vcrack, hcrack = _edges_from_elements(elements)

    incident: dict = {}
    for r, c in zip(*np.nonzero(vcrack)):
        incident.setdefault((int(r), int(c)), []).append(2)      # down
        incident.setdefault((int(r) + 1, int(c)), []).append(0)  # up
    for r, c in zip(*np.nonzero(hcrack)):
        incident.setdefault((int(r), int(c)), []).append(1)      # right
        incident.setdefault((int(r), int(c) + 1), []).append(3)  # left

    used: set = set()
    writer = BitWriter()
    chains = []
    for corner in sorted(incident):
        for d0 in sorted(incident[corner]):
            if _edge_key(*corner, d0) in used:
                continue
            # walk: prefer straight, then left, then right
            moves = []
            r, c = corner
            d = d0
            used.add(_edge_key(r, c, d))
            r, c = r + _STEP[d][0], c + _STEP[d][1]
            while True:
                nxt = None
                for rel, nd in ((0, d), (-1, (d - 1) % 4), (1, (d + 1) % 4)):
                    if nd in incident.get((r, c), ()) and _edge_key(r, c, nd) not in used:
                        nxt = (rel, nd)
                        break
                if nxt is None:
                    break
                rel, nd = nxt
                moves.append(rel)
                used.add(_edge_key(r, c, nd))
                d = nd
                r, c = r + _STEP[d][0], c + _STEP[d][1]
            chains.append((corner, d0, moves))

    writer.write_bits(len(chains), 32)
    for (r, c), d0, moves in chains:
        writer.write_bits(r, 16)
        writer.write_bits(c, 16)
        writer.write_bits(d0, 2)
        for rel in moves:
            if rel == 0:
                writer.write_bits(0b0, 1)
            elif rel == -1:
                writer.write_bits(0b10, 2)
            else:
                writer.write_bits(0b110, 3)
        writer.write_bits(0b111, 3)
    return writer.getvalue()


def decode_depth_contours(data: bytes, height: int, width: int) -> BoundarySet:
    """Exact inverse of encode_depth_contours; raises DecodeError on damage."""
    reader = BitReader(data)
    n_chains = reader.read_bits(32)
    vcrack = np.zeros((height, width + 1), bool)
    hcrack = np.zeros((height + 1, width), bool)

    def apply(r, c, d):
        key = _edge_key(r, c, d)
        kind, er, ec = key
        grid = vcrack if kind == "v" else hcrack
        if not (0 <= er < grid.shape[0] and 0 <= ec < grid.shape[1]):
            raise DecodeError("contour chain leaves the raster")
        if grid[er, ec]:
            raise DecodeError("contour chain re-traverses an edge")
        grid[er, ec] = True
        return r + _STEP[d][0], c + _STEP[d][1]

    for _ in range(n_chains):
        r = reader.read_bits(16)
        c = reader.read_bits(16)
        d = reader.read_bits(2)
        if not (0 <= r <= height and 0 <= c <= width):
            raise DecodeError("chain anchor outside the corner lattice")
        r, c = apply(r, c, d)
        while True:
            if reader.read_bit() == 0:
                r, c = apply(r, c, d)
                continue
            if reader.read_bit() == 0:
                d = (d - 1) % 4
                r, c = apply(r, c, d)
                continue
            if reader.read_bit() == 0:
                d = (d + 1) % 4
                r, c = apply(r, c, d)
            else:
                break
    return _elements_from_edges(vcrack, hcrack, height, width)


def chain_bit_cost(elements: BoundarySet) -> int:
    """Exact bit size of the chain payload (before byte padding)."""
    return len(encode_boundary_chains(elements)) * 8


# ---------------------------------------------------------------------------
# active color boundaries


def encode_active_boundaries(p_cod: Partition, lp_color: Partition,
                             writer: BitWriter) -> list:
    """One bit per adjacent color-region pair in (min, max) order: 1 iff any
    boundary element between the pair survives in the coding partition."""
    if p_cod.labels.shape != lp_color.labels.shape:
        raise ContourError("partitions disagree on the raster")
    pairs = sorted(pair_boundary_counts(lp_color.labels).keys())
    cl = lp_color.labels
    pl = p_cod.labels
    surviving = set()
    for (ca, cb, pa, pb) in (
        (cl[:, :-1], cl[:, 1:], pl[:, :-1], pl[:, 1:]),
        (cl[:-1, :], cl[1:, :], pl[:-1, :], pl[1:, :]),
    ):
        alive = (ca != cb) & (pa != pb)
        lo = np.minimum(ca[alive], cb[alive])
        hi = np.maximum(ca[alive], cb[alive])
        surviving.update(zip(lo.tolist(), hi.tolist()))
    bits = [1 if pair in surviving else 0 for pair in pairs]
    for b in bits:
        writer.write_bit(b)
    return bits


def decode_active_boundaries(reader: BitReader, lp_color: Partition) -> np.ndarray:
    """Color-region merge map implied by the active bits (union-find)."""
    pairs = sorted(pair_boundary_counts(lp_color.labels).keys())
    parent = np.arange(lp_color.n_regions)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        if reader.read_bit() == 0:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(x) for x in range(lp_color.n_regions)])


def reconstruct_partition(lp_color: Partition, group_of_color: np.ndarray,
                          chains: BoundarySet) -> Partition:
    """Decoder-side coding partition: merge inactive color boundaries, then
    split along the decoded depth chains, then 4-connected normalization."""
    merged = group_of_color[lp_color.labels]
    conn_h = (merged[:, :-1] == merged[:, 1:]) & ~chains.horizontal
    conn_v = (merged[:-1, :] == merged[1:, :]) & ~chains.vertical
    labels = components_from_connectivity(conn_h, conn_v)
    return Partition.from_labels(labels)
