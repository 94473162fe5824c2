"""Adaptive clustering into disjoint volume-1 bundles.

Repeatedly picks the unserved client whose closest unit of remaining mass
is best (smallest d_av^1 + d_max^1 over its working set), carves that unit
out, and either registers it as a new bundle or, when it overlaps an
existing bundle, queues that bundle for the client instead.  Every client
ends up with r_j distinct bundles queued; bundles are pairwise disjoint.

When the carved unit overlaps an existing bundle we remove the bundle's
whole current intersection with the working set (not just the overlap with
the carved unit).  Removal per queue entry is still at most one volume, so
the closeness guarantee is unaffected, and re-queueing the same bundle for
one client becomes impossible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Set

from .arith import Q
from .relaxation import FractionalSolution, PipelineError, prefix_stats


@dataclass
class BundleFamily:
    bundles: Dict[int, Set[int]]  # bundle id -> clone ids
    queues: Dict[int, List[int]]  # client -> r_j distinct bundle ids
    creator: Dict[int, int]  # bundle id -> creating client

    def member_of(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for bid, members in self.bundles.items():
            for c in members:
                if c in out:
                    raise PipelineError(f"clone {c} sits in two bundles")
                out[c] = bid
        return out

    def to_json(self) -> dict:
        return {
            "bundles": {str(b): sorted(m) for b, m in sorted(self.bundles.items())},
            "queues": {str(j): list(q) for j, q in sorted(self.queues.items())},
            "creator": {str(b): j for b, j in sorted(self.creator.items())},
        }


def _carve_unit(fsol: FractionalSolution, j: int, working: Set[int]) -> Set[int]:
    """The closest volume-1 subset of `working`, splitting the boundary clone."""
    store = fsol.store
    U: Set[int] = set()
    cum = Q(0)
    for c in fsol.sorted_by_distance(j, working):
        yc = store.y(c)
        if cum + yc < 1:
            U.add(c)
            cum += yc
        elif cum + yc == 1:
            U.add(c)
            cum = Q(1)
            break
        else:
            first, _rest = store.split(c, Q(1) - cum)
            U.add(first)
            cum = Q(1)
            break
    if cum != 1:
        raise PipelineError(f"client {j}: working set has volume {cum} < 1")
    return U


def create_bundles(fsol: FractionalSolution) -> BundleFamily:
    instance = fsol.instance
    store = fsol.store
    reqs = instance.requirements
    working: Dict[int, Set[int]] = {
        j: store.register(set(fj)) for j, fj in fsol.served.items()
    }
    bundles: Dict[int, Set[int]] = {}
    queues: Dict[int, List[int]] = {j: [] for j in range(instance.m)}
    creator: Dict[int, int] = {}
    next_bid = 0

    while True:
        pending = [j for j in range(instance.m) if len(queues[j]) < reqs[j]]
        if not pending:
            break
        best_j, best_prio = None, None
        for j in pending:
            if store.volume(working[j]) < 1:
                raise PipelineError(
                    f"client {j}: working volume dropped below 1 while unserved"
                )
            stats = prefix_stats(fsol, j, working[j], 1)
            prio = stats.d_av + stats.d_max
            if best_prio is None or prio < best_prio:
                best_j, best_prio = j, prio
        j = best_j
        U = _carve_unit(fsol, j, working[j])

        overlap_bid = None
        overlap_vol = None
        for bid, members in bundles.items():
            inter = members & U
            if inter:
                vol = store.volume(inter)
                if overlap_vol is None or vol > overlap_vol or (
                    vol == overlap_vol and bid < overlap_bid
                ):
                    overlap_bid, overlap_vol = bid, vol
        if overlap_bid is not None:
            queues[j].append(overlap_bid)
            working[j] -= bundles[overlap_bid]
        else:
            bid = next_bid
            next_bid += 1
            bundles[bid] = store.register(set(U))
            creator[bid] = j
            queues[j].append(bid)
            working[j] -= U

    fam = BundleFamily(bundles=bundles, queues=queues, creator=creator)
    _assert_family(fsol, fam)
    return fam


def _assert_family(fsol: FractionalSolution, fam: BundleFamily):
    fam.member_of()  # raises on overlap
    for bid, members in fam.bundles.items():
        if fsol.store.volume(members) != 1:
            raise PipelineError(f"bundle {bid} has volume != 1")
    for j, queue in fam.queues.items():
        if len(queue) != fsol.instance.requirements[j]:
            raise PipelineError(f"client {j}: queue length != requirement")
        if len(set(queue)) != len(queue):
            raise PipelineError(f"client {j}: repeated bundle in queue")
