"""Per-node rate-distortion records and the optimal-cut solvers.

The production solver is the bottom-up Lagrangian dynamic program: a node is
kept whenever its own J = D + lambda * R does not exceed the best total of
its subtree, ties going to the parent (fewer regions).  A brute-force cut
enumerator and a boundary-variable (QSAP) re-expression of the objective are
provided as verification oracles; the QSAP is never solved numerically.

Rate model per region: one constant texture cost plus half the tagged
contour elements on the region perimeter (each element is shared by the two
regions it separates).  Color-provenance contours are free by default, so a
merge changes the rate by -c_A * N_depth - R_T, the Lagrangian node saving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import Hierarchy, cover_of_leaves, validate_cut
from .partition import pair_boundary_counts


class RdOptError(ValueError):
    pass


class InfeasibleBudgetError(RdOptError):
    """Requested bit budget below the cheapest reachable cut."""


@dataclass(frozen=True)
class RateModel:
    """Bits per depth/color contour element and per plane description."""

    c_a: float = 1.2
    c_a_color: float = 0.0
    r_t: float = 29.0

    def __post_init__(self):
        if self.c_a <= 0 or self.r_t <= 0:
            raise RdOptError("c_a and r_t must be positive")


@dataclass(frozen=True)
class RdRecords:
    """Per-node distortion and rate, indexed by hierarchy node id."""

    d: np.ndarray
    r_texture: np.ndarray
    r_contour: np.ndarray
    cross_depth: np.ndarray  # depth contour elements between the children
    cross_color: np.ndarray
    model: RateModel

    @property
    def r(self) -> np.ndarray:
        return self.r_texture + self.r_contour

    def j(self, lam: float) -> np.ndarray:
        return self.d + lam * self.r


def node_delta(d_parent: float, d_ch1: float, d_ch2: float,
               n_depth: int, n_color: int, model: RateModel):
    """(delta D, delta R) of merging two siblings: the distortion increase of
    the refit parent plane and the rate saved by dropping the common contour
    and one plane description."""
    dd = d_parent - d_ch1 - d_ch2
    dr = -model.c_a * n_depth - model.c_a_color * n_color - model.r_t
    return dd, dr


def q_value(records: RdRecords, parent: int, ch1: int, ch2: int, lam: float) -> float:
    """Lagrangian saving of a merge: J_parent - (J_ch1 + J_ch2)."""
    j = records.j(lam)
    return float(j[parent] - (j[ch1] + j[ch2]))


# ---------------------------------------------------------------------------
# record construction


def aggregate_contours(h: Hierarchy, pair_counts_list):
    """Per-node perimeter and sibling-crossing contour counts.

    `pair_counts_list` holds one dict per view mapping unordered id pairs to
    (depth_count, color_count) element counts.  Ids below n_leaves are leaf
    nodes of the hierarchy; larger ids are external regions (for instance
    occluded-region buckets) that never merge.  Returns (V, M) arrays
    (perim_depth, perim_color, cross_depth, cross_color).
    """
    n_views = len(pair_counts_list)
    m = h.n_nodes
    perim_d = np.zeros((n_views, m))
    perim_c = np.zeros((n_views, m))
    cross_d = np.zeros((n_views, m))
    cross_c = np.zeros((n_views, m))

    for v, counts in enumerate(pair_counts_list):
        nbr: dict[int, dict[int, list]] = {}
        for (a, b), (nd, nc) in counts.items():
            nbr.setdefault(a, {})[b] = [nd, nc]
            nbr.setdefault(b, {})[a] = [nd, nc]
        for leaf in range(h.n_leaves):
            for nd, nc in nbr.get(leaf, {}).values():
                perim_d[v, leaf] += nd
                perim_c[v, leaf] += nc
        for a, b, p in h.merging_sequence:
            da = nbr.pop(int(a), {})
            db = nbr.pop(int(b), {})
            cross = da.pop(int(b), [0, 0])
            db.pop(int(a), None)
            cross_d[v, p] = cross[0]
            cross_c[v, p] = cross[1]
            perim_d[v, p] = perim_d[v, a] + perim_d[v, b] - 2 * cross[0]
            perim_c[v, p] = perim_c[v, a] + perim_c[v, b] - 2 * cross[1]
            merged: dict[int, list] = {}
            for side in (da, db):
                for k, val in side.items():
                    if k in merged:
                        merged[k][0] += val[0]
                        merged[k][1] += val[1]
                    else:
                        merged[k] = [val[0], val[1]]
            for k, val in merged.items():
                nbr[k].pop(int(a), None)
                nbr[k].pop(int(b), None)
                nbr[k][int(p)] = val
            nbr[int(p)] = merged
    return perim_d, perim_c, cross_d, cross_c


def tagged_pair_counts(group_labels: np.ndarray, color_labels: np.ndarray | None):
    """Boundary element counts per region pair, split into depth provenance
    (color labels equal across the element) and color provenance."""
    if color_labels is None:
        depth = pair_boundary_counts(group_labels)
        return {pair: (n, 0) for pair, n in depth.items()}
    color_h = color_labels[:, :-1] != color_labels[:, 1:]
    color_v = color_labels[:-1, :] != color_labels[1:, :]
    col = pair_boundary_counts(group_labels, color_h, color_v)
    dep = pair_boundary_counts(group_labels, ~color_h, ~color_v)
    out: dict = {}
    for pair, n in dep.items():
        out[pair] = (n, col.get(pair, 0))
    for pair, n in col.items():
        if pair not in out:
            out[pair] = (0, n)
    return out


def build_records(h: Hierarchy, pair_counts_list, model: RateModel,
                  d: np.ndarray | None = None) -> RdRecords:
    """Records over a hierarchy from per-view tagged contour counts.

    The texture cost is charged once per node regardless of how many views
    the node spans; contour costs add up across views.
    """
    perim_d, perim_c, cross_d, cross_c = aggregate_contours(h, pair_counts_list)
    r_texture = np.full(h.n_nodes, model.r_t)
    r_contour = 0.5 * (model.c_a * perim_d.sum(axis=0)
                       + model.c_a_color * perim_c.sum(axis=0))
    return RdRecords(
        d=h.node_d.copy() if d is None else np.asarray(d, dtype=np.float64),
        r_texture=r_texture,
        r_contour=r_contour,
        cross_depth=cross_d.sum(axis=0),
        cross_color=cross_c.sum(axis=0),
        model=model,
    )


# ---------------------------------------------------------------------------
# solvers


def opt_lambda(h: Hierarchy, records: RdRecords, lam: float) -> np.ndarray:
    """Optimal cut for a Lagrange multiplier via the bottom-up DP."""
    if lam < 0:
        raise RdOptError("lambda must be non-negative")
    j = records.j(lam)
    jstar = j.copy()
    chosen = np.ones(h.n_nodes, bool)
    for a, b, p in h.merging_sequence:
        combined = jstar[a] + jstar[b]
        if j[p] <= combined:
            jstar[p] = j[p]
        else:
            chosen[p] = False
            jstar[p] = combined
    cut = []
    stack = [h.root]
    while stack:
        n = stack.pop()
        if chosen[n]:
            cut.append(n)
        else:
            stack.extend((int(h.children[n, 0]), int(h.children[n, 1])))
    return np.array(sorted(cut), np.int32)


def cut_cost(records: RdRecords, cut, lam: float) -> float:
    """Exact total Lagrangian of a cut (order-independent summation)."""
    j = records.j(lam)
    return math.fsum(float(j[n]) for n in np.asarray(cut))


def cut_rate(records: RdRecords, cut) -> float:
    r = records.r
    return math.fsum(float(r[n]) for n in np.asarray(cut))


def cut_distortion(records: RdRecords, cut) -> float:
    return math.fsum(float(records.d[n]) for n in np.asarray(cut))


def enumerate_cuts(h: Hierarchy) -> list:
    """All antichains that tile the image, as sorted node-id tuples."""
    cuts: list = [None] * h.n_nodes
    for n in range(h.n_nodes):
        if h.is_leaf(n):
            cuts[n] = [(n,)]
        else:
            a, b = int(h.children[n, 0]), int(h.children[n, 1])
            combos = [tuple(sorted(ca + cb)) for ca in cuts[a] for cb in cuts[b]]
            cuts[n] = [(n,)] + combos
    return cuts[h.root]


def brute_force_opt(h: Hierarchy, records: RdRecords, lam: float) -> np.ndarray:
    """Exhaustive minimum-J cut; ties prefer fewer regions then smaller ids."""
    if h.n_leaves > 20:
        raise RdOptError("brute force limited to 20 leaves")
    best = min(
        enumerate_cuts(h),
        key=lambda cut: (cut_cost(records, cut, lam), len(cut), cut),
    )
    return np.array(best, np.int32)


def lambda_search(h: Hierarchy, records: RdRecords, budget_bits: float):
    """Smallest-lambda cut with model rate within the budget.

    Exploits the monotone non-increasing rate of the Lagrangian solution:
    doubling until feasible, then bisection; at most 64 solver evaluations.
    Returns (lambda, cut).
    """
    if cut_rate(records, [h.root]) > budget_bits:
        raise InfeasibleBudgetError("budget below the root-cut rate")
    cut0 = opt_lambda(h, records, 0.0)
    if cut_rate(records, cut0) <= budget_bits:
        return 0.0, cut0
    lo = 0.0
    hi = 1.0
    cut_hi = opt_lambda(h, records, hi)
    steps = 0
    while cut_rate(records, cut_hi) > budget_bits:
        lo = hi
        hi *= 2.0
        cut_hi = opt_lambda(h, records, hi)
        steps += 1
        if steps >= 32:
            raise InfeasibleBudgetError("no cut within budget on the hull")
    for _ in range(32):
        mid = 0.5 * (lo + hi)
        cut_mid = opt_lambda(h, records, mid)
        if cut_rate(records, cut_mid) <= budget_bits:
            hi, cut_hi = mid, cut_mid
        else:
            lo = mid
    return hi, cut_hi


# ---------------------------------------------------------------------------
# QSAP re-expression (verification only)


@dataclass
class QsapProblem:
    """Boundary-variable form of the cut-selection objective.

    Variables are the adjacent leaf pairs; b = 1 while the boundary between
    the two leaves is active.  Each hierarchy node contributes its Lagrangian
    saving q, spread over the leaf pairs its merge deactivates, so that for
    any hierarchy-consistent boundary matrix the objective equals the cut's
    total J relative to the all-leaves baseline.
    """

    h: Hierarchy
    pairs: list
    q: np.ndarray
    node_ids: np.ndarray
    cross_indices: list = field(default_factory=list)
    inner_indices: list = field(default_factory=list)
    n_c: np.ndarray = None
    n_m: np.ndarray = None
    baseline_j: float = 0.0

    def boundary_vector(self, cut) -> np.ndarray:
        cover = cover_of_leaves(self.h, cut)
        return np.array(
            [1 if cover[m] != cover[n] else 0 for (m, n) in self.pairs], np.int8
        )

    def objective(self, b: np.ndarray) -> float:
        return math.fsum(float(self.q[i]) for i in range(len(self.pairs)) if not b[i])

    def check_constraints(self, b: np.ndarray) -> bool:
        for k in range(len(self.node_ids)):
            cross = self.cross_indices[k]
            vals = b[cross]
            if vals.size and not np.all(vals == vals[0]):
                return False
            inner = self.inner_indices[k]
            if inner.size and int(b[inner].sum()) > self.n_m[k] * int(vals[0] if vals.size else 1):
                return False
        return True


def build_qsap(h: Hierarchy, records: RdRecords, lam: float) -> QsapProblem:
    """Build the boundary-variable problem for a hierarchy and multiplier."""
    adjacency = sorted(pair_boundary_counts(h.leaf_partition.labels).keys())
    pair_index = {pair: i for i, pair in enumerate(adjacency)}

    # lowest common ancestor of each adjacent pair
    depth_of = np.zeros(h.n_nodes, np.int32)
    order = list(range(h.n_nodes - 1, -1, -1))
    for n in order:
        p = h.parent[n]
        if p >= 0:
            depth_of[n] = depth_of[p] + 1

    def lca(m, n):
        while m != n:
            if depth_of[m] >= depth_of[n]:
                m = int(h.parent[m])
            else:
                n = int(h.parent[n])
        return m

    cross_of: dict[int, list] = {}
    for pair in adjacency:
        cross_of.setdefault(lca(*pair), []).append(pair_index[pair])

    q = np.zeros(len(adjacency))
    node_ids = []
    cross_indices = []
    inner_indices = []
    n_c = []
    n_m = []
    inner_sets: list = [[] for _ in range(h.n_nodes)]
    j = records.j(lam)
    for a, b, p in h.merging_sequence:
        cross = cross_of.get(int(p), [])
        if not cross:
            raise RdOptError("merged siblings share no adjacent leaf pair")
        share = float(j[p] - j[a] - j[b]) / len(cross)
        for i in cross:
            q[i] = share
        inner = inner_sets[a] + inner_sets[b]
        node_ids.append(int(p))
        cross_indices.append(np.array(sorted(cross), np.int64))
        inner_indices.append(np.array(sorted(inner), np.int64))
        n_c.append(len(cross))
        n_m.append(len(inner))
        inner_sets[p] = inner + cross

    baseline = cut_cost(records, np.arange(h.n_leaves), lam)
    return QsapProblem(
        h=h,
        pairs=adjacency,
        q=q,
        node_ids=np.array(node_ids, np.int32),
        cross_indices=cross_indices,
        inner_indices=inner_indices,
        n_c=np.array(n_c, np.int64),
        n_m=np.array(n_m, np.int64),
        baseline_j=baseline,
    )
