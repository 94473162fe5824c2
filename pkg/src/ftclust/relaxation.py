"""Covering LP for fault-tolerant k-median and its canonical fractional form.

After solving the relaxation we normalise the optimum into the shape the
rounding pipeline works with: facilities are split into co-located *clones*
so that each client either uses a clone fully or not at all, every served
set F_j holds exactly r_j volume of the closest clones, and the map g
(clone -> original facility) remembers where each clone came from.

Splits are global: every registered clone set (served sets, working sets,
bundles, ...) is patched when a clone is cut in two, so volumes are
preserved exactly everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .arith import Q, q_to_json
from .instances import FTMedInstance
from .lp import EQ, GE, LE, LinearProgram, LPSolution


class PipelineError(RuntimeError):
    """An internal pipeline invariant failed (indicates a bug upstream)."""


@dataclass
class Clone:
    cid: int
    parent: int  # original facility index; d(clone, parent) = 0
    y: "Q"


class CloneStore:
    """Clone ledger with global split propagation.

    Containers registered here are plain sets of clone ids; a split
    replaces the old id by the two fragment ids in every container, so
    membership stays all-or-nothing per clone.
    """

    def __init__(self):
        self.clones: Dict[int, Clone] = {}
        self._containers: List[Set[int]] = []
        self._next = 0

    def new_clone(self, parent: int, y: "Q") -> int:
        if y <= 0:
            raise PipelineError("clone mass must be positive")
        cid = self._next
        self._next += 1
        self.clones[cid] = Clone(cid=cid, parent=parent, y=Q(y))
        return cid

    def register(self, members: Iterable[int] = ()) -> Set[int]:
        s = set(members)
        self._containers.append(s)
        return s

    def split(self, cid: int, first_mass: "Q") -> Tuple[int, int]:
        c = self.clones[cid]
        first_mass = Q(first_mass)
        if not (0 < first_mass < c.y):
            raise PipelineError(
                f"split of clone {cid}: cut {first_mass} outside (0, {c.y})"
            )
        a = self.new_clone(c.parent, first_mass)
        b = self.new_clone(c.parent, c.y - first_mass)
        del self.clones[cid]
        for s in self._containers:
            if cid in s:
                s.discard(cid)
                s.add(a)
                s.add(b)
        return a, b

    def parent(self, cid: int) -> int:
        return self.clones[cid].parent

    def y(self, cid: int) -> "Q":
        return self.clones[cid].y

    def volume(self, cids: Iterable[int]) -> "Q":
        return sum((self.clones[c].y for c in cids), Q(0))

    def parent_classes(self) -> Dict[int, Set[int]]:
        """g^{-1}: original facility -> its clone ids."""
        out: Dict[int, Set[int]] = {}
        for c in self.clones.values():
            out.setdefault(c.parent, set()).add(c.cid)
        return out

    def all_ids(self) -> List[int]:
        return sorted(self.clones)


@dataclass
class PrefixStats:
    """Distance statistics of the t-th unit-volume slice of a clone set."""

    t: int
    d_av: "Q"
    d_max: "Q"


@dataclass
class FractionalSolution:
    instance: FTMedInstance
    store: CloneStore
    served: Dict[int, Set[int]]  # F_j, registered in the store
    lp_objective: "Q"

    def d(self, j: int, cid: int) -> "Q":
        return self.instance.metric.d_fc(self.store.parent(cid), j)

    def sorted_by_distance(self, j: int, cids: Iterable[int]) -> List[int]:
        store = self.store
        metric = self.instance.metric
        return sorted(
            cids, key=lambda c: (metric.d_fc(store.parent(c), j), store.parent(c), c)
        )

    def volume(self, cids: Iterable[int]) -> "Q":
        return self.store.volume(cids)

    def total_volume(self) -> "Q":
        return self.store.volume(self.store.clones)

    def served_cost(self) -> "Q":
        return sum(
            (
                self.d(j, c) * self.store.y(c)
                for j, fj in self.served.items()
                for c in fj
            ),
            Q(0),
        )

    def to_json(self) -> dict:
        return {
            "clones": [
                {"id": c.cid, "parent": c.parent, "y": q_to_json(c.y)}
                for c in sorted(self.store.clones.values(), key=lambda c: c.cid)
            ],
            "served": {
                str(j): sorted(fj) for j, fj in sorted(self.served.items())
            },
            "lp_objective": q_to_json(self.lp_objective),
        }


def build_ftmed_lp(instance: FTMedInstance) -> LinearProgram:
    """The covering relaxation: open mass y_i, assignment mass x_{i,j};
    each client must receive r_j assignment mass from facilities it uses,
    total open mass at most k."""
    n, m = instance.n, instance.m
    nvars = n + n * m

    def xid(i: int, j: int) -> int:
        return n + j * n + i

    obj: List["Q"] = [Q(0)] * nvars
    for j in range(m):
        for i in range(n):
            obj[xid(i, j)] = instance.metric.d_fc(i, j)
    lp = LinearProgram(n_vars=nvars, objective=obj, upper=[Q(1)] * nvars)
    for j in range(m):
        for i in range(n):
            lp.add_row({i: 1, xid(i, j): -1}, GE, 0)
    for j in range(m):
        lp.add_row({xid(i, j): 1 for i in range(n)}, EQ, instance.requirements[j])
    lp.add_row({i: 1 for i in range(n)}, LE, instance.k)
    return lp


def d_av(fsol: FractionalSolution, j: int, cids: Iterable[int]) -> "Q":
    cids = list(cids)
    vol = fsol.volume(cids)
    if vol <= 0:
        raise PipelineError("d_av of an empty set")
    num = sum((fsol.d(j, c) * fsol.store.y(c) for c in cids), Q(0))
    return num / vol


def d_max(fsol: FractionalSolution, j: int, cids: Iterable[int]) -> "Q":
    cids = list(cids)
    if not cids:
        raise PipelineError("d_max of an empty set")
    return max(fsol.d(j, c) for c in cids)


def prefix_stats(fsol: FractionalSolution, j: int, cids: Iterable[int], t: int) -> PrefixStats:
    """Stats of the mass between cumulative volume t-1 and t of `cids`,
    sorted by (distance to j, parent, clone id); boundary clones are split
    virtually.  Requires y(cids) >= t."""
    if t < 1 or int(t) != t:
        raise PipelineError(f"level t must be a positive integer, got {t}")
    order = fsol.sorted_by_distance(j, cids)
    lo, hi = Q(t - 1), Q(t)
    cum = Q(0)
    num = Q(0)
    mass = Q(0)
    dmax: Optional["Q"] = None
    for c in order:
        yc = fsol.store.y(c)
        nxt = cum + yc
        take = min(nxt, hi) - max(cum, lo)
        if take > 0:
            num += fsol.d(j, c) * take
            mass += take
            dmax = fsol.d(j, c)
        cum = nxt
        if cum >= hi:
            break
    if mass != hi - lo:
        raise PipelineError(
            f"prefix_stats: set has volume {cum} < t = {t} for client {j}"
        )
    return PrefixStats(t=t, d_av=num / (hi - lo), d_max=dmax)


def normalize(instance: FTMedInstance, lp_solution: LPSolution) -> FractionalSolution:
    """Turn an optimal relaxation point into the canonical clone form.

    Zero-mass facilities are dropped; each served set is re-selected as the
    closest r_j volume of clones (cutting the boundary clone), which keeps
    the objective exactly equal by optimality.  A strict decrease would mean
    the input point was not optimal, a strict increase is impossible -- both
    are checked.
    """
    if not lp_solution.is_optimal:
        raise PipelineError(f"relaxation status is {lp_solution.status}, not optimal")
    n = instance.n
    store = CloneStore()
    for i in range(n):
        yi = Q(lp_solution.x[i])
        if yi > 0:
            store.new_clone(i, yi)

    served: Dict[int, Set[int]] = {}
    for j in range(instance.m):
        r = Q(instance.requirements[j])
        fj = store.register()
        served[j] = fj
        cum = Q(0)
        for c in _sorted_ids(store, instance, j):
            yc = store.y(c)
            if cum + yc < r:
                fj.add(c)
                cum += yc
            elif cum + yc == r:
                fj.add(c)
                cum = r
                break
            else:
                first, _rest = store.split(c, r - cum)
                fj.add(first)
                cum = r
                break
        if cum != r:
            raise PipelineError(
                f"client {j}: only {cum} volume available for requirement {r}"
            )

    fsol = FractionalSolution(
        instance=instance, store=store, served=served, lp_objective=Q(lp_solution.objective)
    )
    if fsol.served_cost() != fsol.lp_objective:
        raise PipelineError(
            "normalisation changed the objective: "
            f"{fsol.served_cost()} vs {fsol.lp_objective}"
        )
    assert_canonical(fsol)
    return fsol


def _sorted_ids(store: CloneStore, instance: FTMedInstance, j: int) -> List[int]:
    metric = instance.metric
    return sorted(
        store.clones,
        key=lambda c: (metric.d_fc(store.parent(c), j), store.parent(c), c),
    )


def canonical_from_opening(
    instance: FTMedInstance, opening: Sequence
) -> FractionalSolution:
    """Canonical fractional solution for a bare opening vector.

    Serves every client with the closest r_j volume under `opening` (one
    mass per facility, each in [0,1], total at least max r_j).  Used to
    drive the rounding machinery from hand-built fractional points and by
    the exact tree solvers; unlike normalize() this does not require the
    vector to come from an optimal relaxation point.
    """
    if len(opening) != instance.n:
        raise PipelineError("opening vector length != facility count")
    store = CloneStore()
    for i, yi in enumerate(opening):
        yi = Q(yi)
        if yi < 0 or yi > 1:
            raise PipelineError(f"opening mass of facility {i} outside [0,1]")
        if yi > 0:
            store.new_clone(i, yi)
    served: Dict[int, Set[int]] = {}
    for j in range(instance.m):
        r = Q(instance.requirements[j])
        fj = store.register()
        served[j] = fj
        cum = Q(0)
        for c in _sorted_ids(store, instance, j):
            yc = store.y(c)
            if cum + yc < r:
                fj.add(c)
                cum += yc
            elif cum + yc == r:
                fj.add(c)
                cum = r
                break
            else:
                first, _rest = store.split(c, r - cum)
                fj.add(first)
                cum = r
                break
        if cum != r:
            raise PipelineError(
                f"client {j}: opening vector has volume {cum} < requirement {r}"
            )
    fsol = FractionalSolution(
        instance=instance, store=store, served=served, lp_objective=Q(0)
    )
    fsol.lp_objective = fsol.served_cost()
    assert_canonical(fsol)
    return fsol


def assert_canonical(fsol: FractionalSolution):
    store = fsol.store
    for p, cids in store.parent_classes().items():
        total = store.volume(cids)
        if total > 1:
            raise PipelineError(f"facility {p} has clone mass {total} > 1")
    for j, fj in fsol.served.items():
        r = fsol.instance.requirements[j]
        if store.volume(fj) != r:
            raise PipelineError(f"served set of client {j} has volume != {r}")
        if fj:
            inner = max(fsol.d(j, c) for c in fj)
            rest = [c for c in store.clones if c not in fj]
            if rest:
                outer = min(fsol.d(j, c) for c in rest)
                if inner > outer:
                    raise PipelineError(
                        f"client {j}: served set is not the closest volume "
                        f"({inner} > {outer})"
                    )


def pad_to_k(fsol: FractionalSolution) -> FractionalSolution:
    """Raise opening mass on fresh zero-served clones until the total
    volume is exactly k; served sets and the objective are untouched."""
    k = Q(fsol.instance.k)
    total = fsol.total_volume()
    if total > k:
        raise PipelineError(f"total volume {total} exceeds k = {k}")
    if total == k:
        return fsol
    residual_by_parent: Dict[int, "Q"] = {p: Q(1) for p in range(fsol.instance.n)}
    for c in fsol.store.clones.values():
        residual_by_parent[c.parent] -= c.y
    for p in sorted(residual_by_parent):
        if total == k:
            break
        res = residual_by_parent[p]
        if res <= 0:
            continue
        add = min(res, k - total)
        fsol.store.new_clone(p, add)
        total += add
    if total != k:
        raise PipelineError(
            f"cannot pad volume to k = {k}: no residual capacity left at {total}"
        )
    return fsol
