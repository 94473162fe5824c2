"""Dangerous-client handling: classification, conflict filtering, balls and
the laminar family the dependent rounding step counts facilities in.

A client is dangerous when its furthest fractional facility is at least 45
times the average distance of its last served volume unit; such clients
cannot rely on bundles alone.  Conflicting dangerous clients (same
requirement, centres within 6x the larger average radius) are filtered so
that survivors are provably far apart, which makes the enlarged balls
B'_j nest into a laminar family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .arith import Q
from .relaxation import FractionalSolution, PipelineError, d_av, d_max, prefix_stats

DANGER_FACTOR = 45  # d_max(j) >= 45 d_av^{r_j}(j) marks j dangerous
CONFLICT_FACTOR = 6  # conflict radius: 6 max(d_av(j), d_av(j'))
BALL_DIVISOR = 15  # B_j radius d_max(j)/15
ENLARGED_DIVISOR = 10  # B'_j stays inside radius d_max(j)/10


@dataclass
class ClientStats:
    r: int
    d_av: "Q"
    d_max: "Q"
    d_av_r: "Q"  # average distance of the r-th served volume unit


@dataclass
class DangerReport:
    stats: Dict[int, ClientStats]
    safe: List[int]
    dangerous: List[int]  # D
    filtered: List[int]  # D', in filtering order
    witnesses: Dict[int, int]  # dropped client -> surviving conflicting client

    def to_json(self) -> dict:
        return {
            "safe": list(self.safe),
            "dangerous": list(self.dangerous),
            "filtered": list(self.filtered),
            "witnesses": {str(j): w for j, w in sorted(self.witnesses.items())},
        }


@dataclass
class LaminarFamily:
    balls: Dict[int, FrozenSet[int]]  # B_j per filtered client
    enlarged: Dict[int, FrozenSet[int]]  # B'_j
    order: List[int]  # filtered clients in construction order

    def sets(self) -> List[FrozenSet[int]]:
        return [self.enlarged[j] for j in self.order]

    def to_json(self) -> dict:
        return {
            "balls": {str(j): sorted(self.balls[j]) for j in self.order},
            "enlarged": {str(j): sorted(self.enlarged[j]) for j in self.order},
            "order": list(self.order),
        }


def client_stats(fsol: FractionalSolution, j: int) -> ClientStats:
    fj = fsol.served[j]
    r = fsol.instance.requirements[j]
    return ClientStats(
        r=r,
        d_av=d_av(fsol, j, fj),
        d_max=d_max(fsol, j, fj),
        d_av_r=prefix_stats(fsol, j, fj, r).d_av,
    )


def classify_clients(fsol: FractionalSolution) -> DangerReport:
    """Split clients into safe and dangerous.  Clients whose served set is
    entirely co-located with them (d_max = 0) are forced safe: they have no
    fractional cost and the ball construction would divide by d_max."""
    stats = {j: client_stats(fsol, j) for j in range(fsol.instance.m)}
    safe, dangerous = [], []
    for j in range(fsol.instance.m):
        st = stats[j]
        if st.d_max > 0 and st.d_max >= DANGER_FACTOR * st.d_av_r:
            dangerous.append(j)
        else:
            safe.append(j)
    return DangerReport(
        stats=stats, safe=safe, dangerous=dangerous, filtered=[], witnesses={}
    )


def conflicts(fsol: FractionalSolution, report: DangerReport, j1: int, j2: int) -> bool:
    s1, s2 = report.stats[j1], report.stats[j2]
    if s1.r != s2.r:
        return False
    return fsol.instance.metric.d_cc(j1, j2) <= CONFLICT_FACTOR * max(s1.d_av, s2.d_av)


def filter_dangerous(fsol: FractionalSolution, report: DangerReport) -> DangerReport:
    """Per requirement class, greedily keep the client with the smallest
    average radius and drop everyone conflicting with it; the survivor is
    recorded as the dropped client's witness."""
    max_r = max((report.stats[j].r for j in report.dangerous), default=0)
    for r in range(1, max_r + 1):
        pool = [j for j in report.dangerous if report.stats[j].r == r]
        while pool:
            j = min(pool, key=lambda q: (report.stats[q].d_av, q))
            report.filtered.append(j)
            dropped = [q for q in pool if q != j and conflicts(fsol, report, j, q)]
            for q in dropped:
                report.witnesses[q] = j
            pool = [q for q in pool if q != j and q not in dropped]
    _assert_witnesses(fsol, report)
    return report


def _assert_witnesses(fsol: FractionalSolution, report: DangerReport):
    chosen = set(report.filtered)
    for j in report.dangerous:
        if j in chosen:
            continue
        w = report.witnesses.get(j)
        if w is None:
            raise PipelineError(f"dropped dangerous client {j} has no witness")
        sj, sw = report.stats[j], report.stats[w]
        if sw.r != sj.r or sw.d_av > sj.d_av:
            raise PipelineError(f"witness {w} of client {j} is invalid")
        if fsol.instance.metric.d_cc(j, w) > CONFLICT_FACTOR * sj.d_av:
            raise PipelineError(f"witness {w} of client {j} is too far")


def build_balls(fsol: FractionalSolution, report: DangerReport) -> Dict[int, FrozenSet[int]]:
    """B_j: every clone within distance d_max(j)/15 of j (boundary included).
    Co-located clones of one facility enter together by construction."""
    balls: Dict[int, FrozenSet[int]] = {}
    for j in report.filtered:
        radius = report.stats[j].d_max / BALL_DIVISOR
        balls[j] = frozenset(
            c for c in fsol.store.clones if fsol.d(j, c) <= radius
        )
    return balls


def build_laminar(
    fsol: FractionalSolution, report: DangerReport, balls: Dict[int, FrozenSet[int]]
) -> LaminarFamily:
    """Enlarge balls in nondecreasing requirement order: B'_j swallows every
    smaller-requirement B' it touches.  Equal-requirement balls are provably
    disjoint, so processing order inside a class is just ascending index."""
    order = sorted(report.filtered, key=lambda j: (report.stats[j].r, j))
    enlarged: Dict[int, FrozenSet[int]] = {}
    for j in order:
        r = report.stats[j].r
        merged = set(balls[j])
        for j2 in order:
            if report.stats[j2].r >= r:
                continue
            if j2 in enlarged and enlarged[j2] & balls[j]:
                merged |= enlarged[j2]
        enlarged[j] = frozenset(merged)
    fam = LaminarFamily(balls=dict(balls), enlarged=enlarged, order=order)
    bad = verify_laminar(fam.sets())
    if bad is not None:
        raise PipelineError(f"enlarged balls are not laminar: sets {bad} cross")
    return fam


def verify_laminar(sets: Sequence[FrozenSet[int]]) -> Optional[Tuple[int, int]]:
    """None if every pair is nested or disjoint, else the violating pair."""
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            A, B = sets[a], sets[b]
            inter = A & B
            if inter and not (inter == A or inter == B):
                return (a, b)
    return None
