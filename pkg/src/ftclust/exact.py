"""Exact solvers: brute-force enumeration oracles and polynomial algorithms
for line and HST metrics.

On a line (and on an HST with everything at leaves) the covering relaxation
always has an integral optimum: after splitting facilities so that every
client's served mass is a consecutive run of pieces, the rewritten LP has
the consecutive-ones property, hence a totally unimodular matrix and
integral vertices.  We materialise that argument: build the consecutive
served sets from the fractional opening vector, check every row is an
interval, solve exactly, and insist on an integral vertex with the same
value as the relaxation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .arith import Q
from .instances import (
    FTFLInstance,
    FTMedInstance,
    InstanceError,
    OpenSet,
    evaluate_ftfl_cost,
    evaluate_ftmed_cost,
)
from .lp import GE, LE, LinearProgram, interval_matrix_check, solve
from .relaxation import PipelineError, build_ftmed_lp

BRUTE_FTMED_CAP = 2_000_000  # max C(n, k) subsets
BRUTE_FTFL_CAP = 1 << 22  # max 2^n subsets


class EnumerationCapError(RuntimeError):
    pass


def brute_force_ftmed(instance: FTMedInstance, cap: int = BRUTE_FTMED_CAP):
    """Exhaustive minimum over all k-subsets; ties by lexicographic subset."""
    n, k = instance.n, instance.k
    if comb(n, k) > cap:
        raise EnumerationCapError(f"C({n},{k}) exceeds the enumeration cap {cap}")
    best_val, best_set = None, None
    for subset in combinations(range(n), k):
        val = evaluate_ftmed_cost(instance, OpenSet(subset))
        if best_val is None or val < best_val:
            best_val, best_set = val, subset
    return best_val, OpenSet(best_set)


def brute_force_ftfl(instance: FTFLInstance, cap: int = BRUTE_FTFL_CAP):
    """Exhaustive minimum over facility subsets of size >= max r_j."""
    n = instance.n
    if (1 << n) > cap:
        raise EnumerationCapError(f"2^{n} exceeds the enumeration cap {cap}")
    rmax = instance.max_requirement
    best_val, best_set = None, None
    for size in range(max(rmax, 0), n + 1):
        for subset in combinations(range(n), size):
            val = evaluate_ftfl_cost(instance, OpenSet(subset))
            if best_val is None or val < best_val:
                best_val, best_set = val, subset
    if best_set is None:
        raise InstanceError("no feasible facility subset exists")
    return best_val, OpenSet(best_set)


# ---------------------------------------------------------------------------
# consecutive served-set construction shared by line and HST
# ---------------------------------------------------------------------------


@dataclass
class _Selection:
    """How much of each facility a client uses, and from which end."""

    full: List[int] = field(default_factory=list)
    partial: Optional[Tuple[int, "Q", str]] = None  # (facility, mass, 'lo'|'hi')


def _grow_selection(rings, opening, r) -> _Selection:
    """Walk equidistant rings outward, taking whole rings while they fit.

    A partially needed ring is consumed leaf by leaf, preferring the side
    of the current interval with less volume (ties rightward), so the
    chosen pieces stay adjacent to the interval ends.  At most the final
    leaf is taken partially.
    """
    sel = _Selection()
    rem = Q(r)
    vol_left = Q(0)
    vol_right = Q(0)
    for left, right in rings:
        ring_vol = sum((opening[i] for i in left + right), Q(0))
        if ring_vol == 0:
            continue
        if rem >= ring_vol:
            sel.full.extend(left)
            sel.full.extend(right)
            vol_left += sum((opening[i] for i in left), Q(0))
            vol_right += sum((opening[i] for i in right), Q(0))
            rem -= ring_vol
            if rem == 0:
                return sel
            continue
        li = ri = 0
        while rem > 0:
            if li >= len(left):
                side = "right"
            elif ri >= len(right):
                side = "left"
            else:
                side = "left" if vol_left < vol_right else "right"
            if side == "left":
                i = left[li]
                li += 1
            else:
                i = right[ri]
                ri += 1
            take = min(rem, opening[i])
            if take == 0:
                continue
            if take == opening[i]:
                sel.full.append(i)
            else:
                # left-side pieces adjoin the interval with their high end
                sel.partial = (i, take, "hi" if side == "left" else "lo")
            rem -= take
            if side == "left":
                vol_left += take
            else:
                vol_right += take
        return sel
    raise PipelineError(f"opening vector holds less than {r} volume")


def _line_rings(instance: FTMedInstance, opening, order: List[int], j: int):
    """Equidistant facility groups around client j, split into the side
    left of the client (adjacency order: rightmost first) and the rest."""
    metric = instance.metric
    pos = {i: metric.facility_coords[i] for i in order}
    pj = instance.metric.client_coords[j]
    by_dist: Dict["Q", List[int]] = {}
    for i in order:
        if opening[i] > 0:
            by_dist.setdefault(abs(pos[i] - pj), []).append(i)
    rings = []
    rank = {i: t for t, i in enumerate(order)}
    for dist in sorted(by_dist):
        members = by_dist[dist]
        left = sorted((i for i in members if pos[i] < pj), key=lambda i: -rank[i])
        right = sorted((i for i in members if pos[i] >= pj), key=lambda i: rank[i])
        rings.append((left, right))
    return rings


class _HSTIndex:
    """Preorder leaf layout plus per-node leaf distance for an HST metric."""

    def __init__(self, instance: FTMedInstance):
        metric = instance.metric
        if metric.mode != "hst":
            raise InstanceError("not an hst metric")
        nodes = metric.hst_nodes
        self.parent = [-1] * len(nodes)
        for u, node in enumerate(nodes):
            for ch in node.children:
                self.parent[ch] = u
        self.root = metric.hst_root
        # preorder over children in list order
        self.pre: Dict[int, int] = {}
        self.leaves_in_order: List[int] = []
        stack = [self.root]
        while stack:
            u = stack.pop()
            self.pre[u] = len(self.pre)
            if nodes[u].leaf is not None:
                self.leaves_in_order.append(u)
            stack.extend(reversed(nodes[u].children))
        self.dist_root: List[Optional["Q"]] = [None] * len(nodes)
        self.dist_root[self.root] = Q(0)
        order = sorted(range(len(nodes)), key=lambda u: self.pre[u])
        for u in order:
            if u != self.root:
                self.dist_root[u] = self.dist_root[self.parent[u]] + nodes[u].edge_to_parent
        # equidistance: every internal node must see all its leaves at one depth
        self.leaf_depth: List[Optional["Q"]] = [None] * len(nodes)
        for u in reversed(order):
            if nodes[u].leaf is not None:
                self.leaf_depth[u] = Q(0)
                continue
            depths = set()
            for ch in nodes[u].children:
                depths.add(self.leaf_depth[ch] + nodes[ch].edge_to_parent)
            if len(depths) != 1:
                raise InstanceError(
                    "hst lacks the equidistance property: node "
                    f"{u} sees leaves at depths {sorted(depths)}"
                )
            self.leaf_depth[u] = depths.pop()
        self.node_of_point = metric.hst_leaf_of_point
        self.subtree_leaves: Dict[int, List[int]] = {}
        for u in reversed(order):
            if nodes[u].leaf is not None:
                self.subtree_leaves[u] = [u]
            else:
                acc: List[int] = []
                for ch in sorted(nodes[u].children, key=lambda v: self.pre[v]):
                    acc.extend(self.subtree_leaves[ch])
                self.subtree_leaves[u] = acc


def _hst_rings(instance: FTMedInstance, opening, order: List[int], idx: _HSTIndex, j: int):
    nodes = instance.metric.hst_nodes
    leaf = idx.node_of_point[f"c{j}"]
    fac_of_leaf = {idx.node_of_point[f"f{i}"]: i for i in order}
    pos_j = idx.pre[leaf]
    rank = {i: t for t, i in enumerate(order)}
    rings = []
    inner: Optional[int] = None
    u = leaf
    while u != -1:
        members = [
            fac_of_leaf[v]
            for v in idx.subtree_leaves[u]
            if v in fac_of_leaf
            and opening[fac_of_leaf[v]] > 0
            and (inner is None or v not in set(idx.subtree_leaves[inner]))
        ]
        if members:
            left = sorted(
                (i for i in members if idx.pre[idx.node_of_point[f"f{i}"]] < pos_j),
                key=lambda i: -rank[i],
            )
            right = sorted(
                (i for i in members if idx.pre[idx.node_of_point[f"f{i}"]] > pos_j),
                key=lambda i: rank[i],
            )
            dists = {instance.metric.d_fc(i, j) for i in members}
            if len(dists) != 1:
                raise InstanceError(
                    f"hst ring around client {j} is not equidistant: {sorted(dists)}"
                )
            rings.append((left, right))
        inner = u
        u = idx.parent[u]
    return rings


# ---------------------------------------------------------------------------


@dataclass
class ExactResult:
    value: "Q"
    open_set: OpenSet
    lp_value: "Q"
    pieces: int
    method: str


def _solve_consecutive(instance: FTMedInstance, rings_builder, order: List[int]) -> ExactResult:
    """Common machinery: relaxation -> consecutive served sets -> rewritten
    interval LP -> integral vertex -> open set."""
    lp1 = build_ftmed_lp(instance)
    sol1 = solve(lp1, "rational")
    if not sol1.is_optimal:
        raise PipelineError(f"relaxation is {sol1.status}")
    opening = [Q(v) for v in sol1.x[: instance.n]]

    selections = [
        _grow_selection(rings_builder(j, opening), opening, instance.requirements[j])
        for j in range(instance.m)
    ]

    # the consecutive selection is a closest-volume selection, so its cost
    # must equal the relaxation value exactly
    sel_cost = Q(0)
    for j, sel in enumerate(selections):
        for i in sel.full:
            sel_cost += instance.metric.d_fc(i, j) * opening[i]
        if sel.partial is not None:
            i, mass, _end = sel.partial
            sel_cost += instance.metric.d_fc(i, j) * mass
    if sel_cost != Q(sol1.objective):
        raise PipelineError(
            f"consecutive selection cost {sel_cost} != relaxation value {sol1.objective}"
        )

    # cut facilities where partial selections end
    cuts: Dict[int, Set["Q"]] = {i: set() for i in order}
    for sel in selections:
        if sel.partial is not None:
            i, mass, end = sel.partial
            cuts[i].add(mass if end == "lo" else opening[i] - mass)
    pieces: List[Tuple[int, "Q", "Q"]] = []  # (facility, lo, hi) in variable order
    piece_range: Dict[int, Tuple[int, int]] = {}
    for i in order:
        if opening[i] == 0:
            continue
        marks = sorted(m for m in cuts[i] if 0 < m < opening[i])
        bounds = [Q(0)] + marks + [opening[i]]
        first = len(pieces)
        for lo, hi in zip(bounds, bounds[1:]):
            pieces.append((i, lo, hi))
        piece_range[i] = (first, len(pieces))

    served_pieces: List[List[int]] = []
    for j, sel in enumerate(selections):
        mine = []
        for i in sel.full:
            mine.extend(range(*piece_range[i]))
        if sel.partial is not None:
            i, mass, end = sel.partial
            for p in range(*piece_range[i]):
                _, lo, hi = pieces[p]
                if (end == "lo" and hi <= mass) or (end == "hi" and lo >= opening[i] - mass):
                    mine.append(p)
        mine.sort()
        got = sum((pieces[p][2] - pieces[p][1] for p in mine), Q(0))
        if got != instance.requirements[j]:
            raise PipelineError(
                f"client {j}: consecutive pieces hold {got} != r_j"
            )
        served_pieces.append(mine)

    npieces = len(pieces)
    obj = [Q(0)] * npieces
    for j, mine in enumerate(served_pieces):
        for p in mine:
            obj[p] += instance.metric.d_fc(pieces[p][0], j)
    lp2 = LinearProgram(n_vars=npieces, objective=obj, upper=[Q(1)] * npieces)
    for j, mine in enumerate(served_pieces):
        lp2.add_row({p: 1 for p in mine}, GE, instance.requirements[j])
    for i in order:
        if i in piece_range:
            lp2.add_row({p: 1 for p in range(*piece_range[i])}, LE, 1)
    lp2.add_row({p: 1 for p in range(npieces)}, LE, instance.k)
    bad = interval_matrix_check(lp2)
    if bad is not None:
        raise PipelineError(f"rewritten LP is not an interval system: {bad}")
    sol2 = solve(lp2, "rational")
    if not sol2.is_optimal:
        raise PipelineError(f"rewritten LP is {sol2.status}")
    if any(v != 0 and v != 1 for v in sol2.x):
        raise PipelineError(
            "rewritten LP returned a fractional vertex; consecutive-ones "
            "structure is broken"
        )
    if Q(sol2.objective) != Q(sol1.objective):
        raise PipelineError(
            f"rewritten LP value {sol2.objective} != relaxation value {sol1.objective}"
        )
    open_parents = sorted({pieces[p][0] for p, v in enumerate(sol2.x) if v == 1})
    S = OpenSet(tuple(open_parents))
    value = evaluate_ftmed_cost(instance, S)
    if value != Q(sol1.objective):
        raise PipelineError(
            f"realised cost {value} != relaxation value {sol1.objective}"
        )
    return ExactResult(
        value=value,
        open_set=S,
        lp_value=Q(sol1.objective),
        pieces=npieces,
        method="",
    )


def solve_line_exact(instance: FTMedInstance) -> ExactResult:
    if instance.metric.mode != "line":
        raise InstanceError("solve_line_exact needs a line metric")
    order = sorted(
        range(instance.n),
        key=lambda i: (instance.metric.facility_coords[i], i),
    )
    res = _solve_consecutive(
        instance,
        lambda j, opening: _line_rings(instance, opening, order, j),
        order,
    )
    res.method = "exact-line"
    return res


def solve_hst_exact(instance: FTMedInstance) -> ExactResult:
    if instance.metric.mode != "hst":
        raise InstanceError("solve_hst_exact needs an hst metric")
    idx = _HSTIndex(instance)
    order = sorted(
        range(instance.n), key=lambda i: idx.pre[idx.node_of_point[f"f{i}"]]
    )
    res = _solve_consecutive(
        instance,
        lambda j, opening: _hst_rings(instance, opening, order, idx, j),
        order,
    )
    res.method = "exact-hst"
    return res
