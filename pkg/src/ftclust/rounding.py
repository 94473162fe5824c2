"""Dependent rounding over two laminar families.

The rounding polytope asks for exactly one open clone per bundle, r_j-1 or
r_j open clones in each enlarged ball, at most one open clone per original
facility, and exactly k open clones overall.  Its constraint matrix is made
of two laminar set families, so every vertex is integral; we decompose the
fractional opening vector into an exact convex combination of vertices by
iteratively walking to a vertex of the current minimal face and stepping
away from it to the boundary.  Sampling a vertex according to the convex
weights then realises every marginal exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np

from .arith import Q, as_float, q_to_json
from .bundles import BundleFamily, create_bundles
from .instances import FTMedInstance, OpenSet, closest_facilities, evaluate_ftmed_cost
from .laminar import (
    DangerReport,
    LaminarFamily,
    build_balls,
    build_laminar,
    classify_clients,
    filter_dangerous,
    verify_laminar,
)
from .lp import EQ, GE, LE, LinearProgram, solve
from .relaxation import (
    FractionalSolution,
    PipelineError,
    build_ftmed_lp,
    normalize,
    pad_to_k,
)

_GENERIC_PRIME = (1 << 61) - 1  # deterministic generic objective modulus

SAFE_BOUND_FACTOR = 93
FILTERED_BOUND_FACTOR = 46
DROPPED_BOUND_FACTOR = 52


@dataclass
class PolytopeRow:
    members: Tuple[int, ...]  # variable indices
    op: str
    rhs: "Q"
    tag: str  # "bundle" | "ball-lo" | "ball-hi" | "parent" | "cardinality"


@dataclass
class RoundingPolytope:
    clone_order: List[int]  # clone ids in variable order
    rows: List[PolytopeRow]
    index: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {cid: i for i, cid in enumerate(self.clone_order)}

    @property
    def dim(self) -> int:
        return len(self.clone_order)

    def violation(self, z: Sequence["Q"]) -> Optional[str]:
        for v in z:
            if v < 0 or v > 1:
                return "variable outside [0,1]"
        for row in self.rows:
            lhs = sum((z[i] for i in row.members), Q(0))
            if row.op == LE and lhs > row.rhs:
                return f"{row.tag} row violated"
            if row.op == GE and lhs < row.rhs:
                return f"{row.tag} row violated"
            if row.op == EQ and lhs != row.rhs:
                return f"{row.tag} row violated"
        return None


@dataclass
class VertexDecomposition:
    polytope: RoundingPolytope
    weights: List["Q"]  # lambda_t > 0, summing to 1
    vertices: List[Tuple[int, ...]]  # 0/1 clone vectors

    def __len__(self):
        return len(self.weights)

    def mixture(self) -> List["Q"]:
        dim = self.polytope.dim
        out = [Q(0)] * dim
        for lam, v in zip(self.weights, self.vertices):
            for i in range(dim):
                if v[i]:
                    out[i] += lam
        return out


@dataclass
class RoundedSolution:
    vertex: Tuple[int, ...]
    open_set: OpenSet
    cost: "Q"
    assignments: Dict[int, List[int]]


def build_polytope(
    fsol: FractionalSolution,
    bundles: BundleFamily,
    laminar: LaminarFamily,
    k: int,
) -> RoundingPolytope:
    store = fsol.store
    clone_order = store.all_ids()
    index = {cid: i for i, cid in enumerate(clone_order)}
    rows: List[PolytopeRow] = []
    for bid in sorted(bundles.bundles):
        members = tuple(sorted(index[c] for c in bundles.bundles[bid]))
        rows.append(PolytopeRow(members=members, op=EQ, rhs=Q(1), tag="bundle"))
    for j in laminar.order:
        members = tuple(sorted(index[c] for c in laminar.enlarged[j]))
        r = fsol.instance.requirements[j]
        rows.append(PolytopeRow(members=members, op=GE, rhs=Q(r - 1), tag="ball-lo"))
        rows.append(PolytopeRow(members=members, op=LE, rhs=Q(r), tag="ball-hi"))
    for p in sorted(store.parent_classes()):
        members = tuple(sorted(index[c] for c in store.parent_classes()[p]))
        rows.append(PolytopeRow(members=members, op=LE, rhs=Q(1), tag="parent"))
    rows.append(
        PolytopeRow(members=tuple(range(len(clone_order))), op=EQ, rhs=Q(k), tag="cardinality")
    )
    poly = RoundingPolytope(clone_order=clone_order, rows=rows)

    # both constraint families must be laminar over the clone ground set
    fam1 = [frozenset(bundles.bundles[b]) for b in sorted(bundles.bundles)]
    if verify_laminar(fam1) is not None:
        raise PipelineError("bundle family is not laminar (bundles overlap)")
    fam2 = (
        [laminar.enlarged[j] for j in laminar.order]
        + [frozenset(store.clones)]
        + [frozenset(cs) for _, cs in sorted(store.parent_classes().items())]
    )
    if verify_laminar(fam2) is not None:
        raise PipelineError("ball/parent family is not laminar")

    y = [store.y(cid) for cid in clone_order]
    problem = poly.violation(y)
    if problem is not None:
        raise PipelineError(f"fractional opening vector infeasible: {problem}")
    return poly


def _polytope_lp(poly: RoundingPolytope, cur: Sequence["Q"], objective: List["Q"]) -> LinearProgram:
    """LP over the polytope with all constraints tight at `cur` forced to
    equality (the minimal face containing cur)."""
    lower = [Q(0)] * poly.dim
    upper: List[Optional["Q"]] = [Q(1)] * poly.dim
    for i, v in enumerate(cur):
        if v == 0:
            upper[i] = Q(0)
        elif v == 1:
            lower[i] = Q(1)
    lp = LinearProgram(n_vars=poly.dim, objective=objective, lower=lower, upper=upper)
    for row in poly.rows:
        lhs = sum((cur[i] for i in row.members), Q(0))
        op = EQ if (row.op == EQ or lhs == row.rhs) else row.op
        lp.add_row({i: 1 for i in row.members}, op, row.rhs)
    return lp


def decompose(y: Sequence["Q"], poly: RoundingPolytope) -> VertexDecomposition:
    """Exact Caratheodory decomposition of y into polytope vertices.

    Each round finds a vertex v of the minimal face containing the current
    point, then moves the current point directly away from v until a new
    constraint goes tight; at least one constraint is added per round, so
    the loop runs at most dim+1 times.  All arithmetic is rational: the
    residual y - sum(lambda_t v_t) is exactly zero.
    """
    cur = [Q(v) for v in y]
    problem = poly.violation(cur)
    if problem is not None:
        raise PipelineError(f"decompose: starting point infeasible: {problem}")
    generic = [Q(pow(2, i, _GENERIC_PRIME)) for i in range(poly.dim)]
    weights: List["Q"] = []
    vertices: List[Tuple[int, ...]] = []
    scale = Q(1)
    for _round in range(poly.dim + 2):
        sol = solve(_polytope_lp(poly, cur, generic), "rational")
        if not sol.is_optimal:
            raise PipelineError(f"face LP came back {sol.status}")
        v = [Q(x) for x in sol.x]
        _assert_integral_vertex(poly, v)
        if v == cur:
            weights.append(scale)
            vertices.append(tuple(int(x) for x in v))
            dec = VertexDecomposition(polytope=poly, weights=weights, vertices=vertices)
            _assert_decomposition(y, dec)
            return dec
        w = [cur[i] - v[i] for i in range(poly.dim)]
        t = _max_step(poly, cur, w)
        if t <= 0:
            raise PipelineError("decompose: zero step away from a non-vertex point")
        weights.append(scale * t / (1 + t))
        vertices.append(tuple(int(x) for x in v))
        cur = [cur[i] + t * w[i] for i in range(poly.dim)]
        scale = scale / (1 + t)
    raise PipelineError("decompose: did not terminate within dim+1 rounds")


def _max_step(poly: RoundingPolytope, cur: Sequence["Q"], w: Sequence["Q"]) -> "Q":
    best: Optional["Q"] = None

    def tighten(cap: "Q"):
        nonlocal best
        if best is None or cap < best:
            best = cap

    for i in range(poly.dim):
        if w[i] > 0:
            tighten((Q(1) - cur[i]) / w[i])
        elif w[i] < 0:
            tighten(cur[i] / (-w[i]))
    for row in poly.rows:
        delta = sum((w[i] for i in row.members), Q(0))
        lhs = sum((cur[i] for i in row.members), Q(0))
        if row.op == EQ:
            if delta != 0:
                raise PipelineError("direction leaves an equality row")
            continue
        if row.op == LE and delta > 0:
            tighten((row.rhs - lhs) / delta)
        elif row.op == GE and delta < 0:
            tighten((lhs - row.rhs) / (-delta))
    if best is None:
        raise PipelineError("decompose: unbounded step inside a [0,1] box")
    return best


def _assert_integral_vertex(poly: RoundingPolytope, v: Sequence["Q"]):
    for x in v:
        if x != 0 and x != 1:
            raise PipelineError(
                "face LP returned a non-integral vertex; the two-laminar-family "
                f"structure is broken (value {x})"
            )
    problem = poly.violation(v)
    if problem is not None:
        raise PipelineError(f"vertex infeasible: {problem}")


def _assert_decomposition(y: Sequence["Q"], dec: VertexDecomposition):
    if sum(dec.weights, Q(0)) != 1:
        raise PipelineError("decomposition weights do not sum to 1")
    if any(lam <= 0 for lam in dec.weights):
        raise PipelineError("decomposition has a nonpositive weight")
    if len(dec) > dec.polytope.dim + 1:
        raise PipelineError("decomposition longer than dim + 1")
    mix = dec.mixture()
    for i in range(dec.polytope.dim):
        if mix[i] != Q(y[i]):
            raise PipelineError(f"decomposition residual nonzero at clone slot {i}")


def sample_indices(dec: VertexDecomposition, seed: int, count: int) -> np.ndarray:
    """Vertex indices for draws 0..count-1; draw i uses its own RNG stream
    keyed by (seed, i), so chunked or parallel sampling reproduces the
    serial sequence."""
    cum = np.cumsum([as_float(w) for w in dec.weights])
    cum[-1] = 1.0
    us = np.array(
        [np.random.default_rng([seed, i]).random() for i in range(count)]
    )
    return np.searchsorted(cum, us, side="right").clip(0, len(dec) - 1)


def sample(dec: VertexDecomposition, seed: int, index: int = 0) -> Tuple[int, ...]:
    """The sampled vertex for draw `index` under `seed`."""
    t = int(sample_indices(dec, seed, index + 1)[index])
    return dec.vertices[t]


def assemble_solution(
    vertex: Sequence[int], fsol: FractionalSolution, instance: FTMedInstance
) -> RoundedSolution:
    store = fsol.store
    order = fsol.store.all_ids()
    opened = [order[i] for i, z in enumerate(vertex) if z == 1]
    parents = [store.parent(c) for c in opened]
    if len(set(parents)) != len(parents):
        raise PipelineError("two clones of one facility are open in a vertex")
    if len(parents) != instance.k:
        raise PipelineError(f"vertex opens {len(parents)} facilities, expected k={instance.k}")
    S = OpenSet(tuple(sorted(parents)))
    assignments = {
        j: closest_facilities(instance.metric, j, S.facilities)[: instance.requirements[j]]
        for j in range(instance.m)
    }
    return RoundedSolution(
        vertex=tuple(int(z) for z in vertex),
        open_set=S,
        cost=evaluate_ftmed_cost(instance, S),
        assignments=assignments,
    )


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


@dataclass
class PipelineArtifacts:
    instance: FTMedInstance
    lp: Optional[LinearProgram]
    lp_value: "Q"
    fsol: FractionalSolution
    bundles: BundleFamily
    report: DangerReport
    laminar: LaminarFamily
    polytope: RoundingPolytope
    decomposition: VertexDecomposition

    def client_bound_factor(self, j: int) -> int:
        if j in self.report.witnesses:
            return DROPPED_BOUND_FACTOR
        if j in set(self.report.filtered):
            return FILTERED_BOUND_FACTOR
        if j in set(self.report.dangerous):
            return DROPPED_BOUND_FACTOR  # dropped dangerous, same bound
        return SAFE_BOUND_FACTOR


def finish_pipeline(
    fsol: FractionalSolution, lp: Optional[LinearProgram] = None
) -> PipelineArtifacts:
    """Stages downstream of the relaxation: pad -> bundles -> classify ->
    filter -> balls -> laminar family -> polytope -> decomposition.  Works
    for any canonical fractional solution, optimal or hand-built."""
    instance = fsol.instance
    pad_to_k(fsol)
    bundles = create_bundles(fsol)
    report = classify_clients(fsol)
    filter_dangerous(fsol, report)
    balls = build_balls(fsol, report)
    laminar = build_laminar(fsol, report, balls)
    poly = build_polytope(fsol, bundles, laminar, instance.k)
    y = [fsol.store.y(cid) for cid in poly.clone_order]
    dec = decompose(y, poly)
    return PipelineArtifacts(
        instance=instance,
        lp=lp,
        lp_value=fsol.lp_objective,
        fsol=fsol,
        bundles=bundles,
        report=report,
        laminar=laminar,
        polytope=poly,
        decomposition=dec,
    )


def run_pipeline(instance: FTMedInstance, arith: str = "rational") -> PipelineArtifacts:
    """LP solve -> normalise -> the full rounding pipeline."""
    lp = build_ftmed_lp(instance)
    lpsol = solve(lp, arith)
    if not lpsol.is_optimal:
        raise PipelineError(f"relaxation is {lpsol.status}")
    fsol = normalize(instance, lpsol)
    return finish_pipeline(fsol, lp)


def solve_ftmed_approx(
    instance: FTMedInstance,
    seed: int = 0,
    samples: int = 200,
    arith: str = "rational",
    artifacts: Optional[PipelineArtifacts] = None,
) -> dict:
    """Run the rounding pipeline and draw `samples` vertices; reports the
    relaxation value, per-sample cost statistics and the best realised set."""
    t0 = time.perf_counter()
    art = artifacts if artifacts is not None else run_pipeline(instance, arith)
    dec = art.decomposition
    idx = sample_indices(dec, seed, samples)
    solutions: Dict[int, RoundedSolution] = {}
    for t in sorted(set(int(i) for i in idx)):
        solutions[t] = assemble_solution(dec.vertices[t], art.fsol, instance)
    costs = [solutions[int(t)].cost for t in idx]
    mean_cost = sum(costs, Q(0)) / len(costs)
    best_t = min(sorted(set(int(t) for t in idx)), key=lambda t: (solutions[t].cost, t))
    best = solutions[best_t]

    per_client = []
    for j in range(instance.m):
        st = art.report.stats[j]
        factor = art.client_bound_factor(j)
        mc = [
            sum(
                (instance.metric.d_fc(i, j) for i in solutions[int(t)].assignments[j]),
                Q(0),
            )
            for t in idx
        ]
        per_client.append(
            {
                "client": j,
                "r": st.r,
                "class": (
                    "filtered"
                    if j in set(art.report.filtered)
                    else "dropped"
                    if j in set(art.report.dangerous)
                    else "safe"
                ),
                "bound_factor": factor,
                "bound_value": as_float(factor * st.r * st.d_av),
                "mc_mean_cost": as_float(sum(mc, Q(0)) / len(mc)),
            }
        )

    order = art.polytope.clone_order
    y = {cid: art.fsol.store.y(cid) for cid in order}
    freq = _marginal_frequencies(dec, idx)
    marginal_gap = max(
        (abs(freq[i] - as_float(y[cid])) for i, cid in enumerate(order)), default=0.0
    )
    return {
        "method": "lp-round",
        "kind": "ftmed",
        "lp_value": as_float(art.lp_value),
        "lp_value_exact": q_to_json(art.lp_value),
        "samples": samples,
        "seed": seed,
        "mean_cost": as_float(mean_cost),
        "best_cost": as_float(best.cost),
        "best_cost_exact": q_to_json(best.cost),
        "best_open_set": list(best.open_set.facilities),
        "per_client_bounds": per_client,
        "marginal_check": {"max_abs_gap": marginal_gap},
        "decomposition_terms": len(dec),
        "runtime_s": time.perf_counter() - t0,
    }


def _marginal_frequencies(dec: VertexDecomposition, idx: np.ndarray) -> np.ndarray:
    V = np.array(dec.vertices, dtype=float)
    counts = np.bincount(idx, minlength=len(dec)).astype(float)
    return counts @ V / len(idx)
