"""Problem instances: metric spaces, fault-tolerant k-median / facility
location instances, cost evaluation, JSON IO and random generation.

Point ids are strings: facility i is "f<i>", client j is "c<j>".  Distances
are stored as exact rationals; geometric modes (line, plane, hst) derive an
explicit matrix once at construction time.  Plane distances involve square
roots, so they are materialised as the exact rational value of the correctly
rounded double — the instance is then flagged non-exact and metric checks
use the float tolerance instead of zero.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .arith import FLOAT_TOL, Q, as_float, q_to_json, to_q

METRIC_MODES = ("explicit", "line", "plane", "hst")


class InstanceError(ValueError):
    """Schema or invariant violation in an instance document."""


class InfeasibleError(ValueError):
    """A solution cannot serve some client (service cost infinite)."""


@dataclass(frozen=True)
class HSTNode:
    children: Tuple[int, ...]
    edge_to_parent: Optional["Q"]  # None for the root
    leaf: Optional[str]  # "f<i>" / "c<j>" for leaves, None for internal


@dataclass
class MetricSpace:
    """Distances over facilities ∪ clients.

    mode 'explicit': `matrix` is the full (n+m)² rational matrix, row-major
    facilities-then-clients.  'line'/'plane': coordinate lists. 'hst': a
    rooted tree with all facilities/clients at leaves and edge lengths
    decreasing by `factor` (≥ 2) along every root-to-leaf path.
    """

    mode: str
    n_facilities: int
    n_clients: int
    matrix: List[List["Q"]] = field(repr=False)
    exact: bool = True
    # geometry payloads, kept for round-trip serialisation
    facility_coords: Optional[list] = None
    client_coords: Optional[list] = None
    hst_nodes: Optional[List[HSTNode]] = None
    hst_factor: Optional["Q"] = None
    hst_root: Optional[int] = None
    hst_leaf_of_point: Optional[Dict[str, int]] = None

    # -- point id handling -------------------------------------------------
    def point_index(self, pid: str) -> int:
        if isinstance(pid, str) and len(pid) >= 2:
            kind, num = pid[0], pid[1:]
            if num.isdigit():
                i = int(num)
                if kind == "f" and i < self.n_facilities:
                    return i
                if kind == "c" and i < self.n_clients:
                    return self.n_facilities + i
        raise InstanceError(f"unknown point id: {pid!r}")

    def distance(self, a: str, b: str) -> "Q":
        return self.matrix[self.point_index(a)][self.point_index(b)]

    def d_fc(self, i: int, j: int) -> "Q":
        """Facility i to client j (the hot path, no id parsing)."""
        return self.matrix[i][self.n_facilities + j]

    def d_cc(self, j1: int, j2: int) -> "Q":
        return self.matrix[self.n_facilities + j1][self.n_facilities + j2]


def _line_matrix(coords: List["Q"]) -> List[List["Q"]]:
    return [[abs(a - b) for b in coords] for a in coords]


def _plane_matrix(coords: List[Tuple["Q", "Q"]]) -> List[List["Q"]]:
    pts = [(as_float(x), as_float(y)) for x, y in coords]
    out = []
    for a, (xa, ya) in enumerate(pts):
        row = []
        for b, (xb, yb) in enumerate(pts):
            row.append(Q(0) if a == b else to_q(math.hypot(xa - xb, ya - yb)))
        out.append(row)
    return out


def _hst_prepare(nodes: List[HSTNode]):
    """Return (root, parent map, depth-to-root rational distances)."""
    n = len(nodes)
    parent = [-1] * n
    for u, node in enumerate(nodes):
        for ch in node.children:
            if not (0 <= ch < n):
                raise InstanceError(f"hst child id {ch} out of range")
            if parent[ch] != -1:
                raise InstanceError(f"hst node {ch} has two parents")
            parent[ch] = u
    roots = [u for u in range(n) if parent[u] == -1]
    if len(roots) != 1:
        raise InstanceError(f"hst must have exactly one root, found {len(roots)}")
    root = roots[0]
    if nodes[root].edge_to_parent is not None:
        raise InstanceError("hst root must not carry edge_to_parent")
    # distance from root, checking connectivity
    dist = [None] * n
    dist[root] = Q(0)
    stack = [root]
    seen = 1
    while stack:
        u = stack.pop()
        for ch in nodes[u].children:
            e = nodes[ch].edge_to_parent
            if e is None or e <= 0:
                raise InstanceError(f"hst node {ch} needs a positive edge_to_parent")
            dist[ch] = dist[u] + e
            stack.append(ch)
            seen += 1
    if seen != n:
        raise InstanceError("hst contains unreachable nodes (not a tree)")
    return root, parent, dist


def _hst_matrix(nodes: List[HSTNode], n_fac: int, n_cli: int):
    root, parent, dist = _hst_prepare(nodes)
    leaf_of: Dict[str, int] = {}
    for u, node in enumerate(nodes):
        if node.leaf is not None:
            if node.children:
                raise InstanceError(f"hst node {u} is labelled a leaf but has children")
            if node.leaf in leaf_of:
                raise InstanceError(f"duplicate hst leaf label {node.leaf}")
            leaf_of[node.leaf] = u
    expected = [f"f{i}" for i in range(n_fac)] + [f"c{j}" for j in range(n_cli)]
    missing = [p for p in expected if p not in leaf_of]
    if missing:
        raise InstanceError(f"hst is missing leaves for {missing}")

    def anc_path(u: int) -> List[int]:
        path = [u]
        while parent[u] != -1:
            u = parent[u]
            path.append(u)
        return path

    paths = {p: anc_path(leaf_of[p]) for p in expected}
    depth = {p: set(paths[p]) for p in expected}
    mat = []
    for a in expected:
        row = []
        for b in expected:
            if a == b:
                row.append(Q(0))
                continue
            lca = next(u for u in paths[a] if u in depth[b])
            row.append(dist[leaf_of[a]] + dist[leaf_of[b]] - 2 * dist[lca])
        mat.append(row)
    return mat, root, leaf_of


def make_metric(
    mode: str,
    n_facilities: int,
    n_clients: int,
    *,
    matrix=None,
    facility_coords=None,
    client_coords=None,
    hst_nodes=None,
    hst_factor=None,
    exact: Optional[bool] = None,
) -> MetricSpace:
    if mode not in METRIC_MODES:
        raise InstanceError(f"unknown metric mode {mode!r}")
    npts = n_facilities + n_clients
    root = leaf_of = None
    if mode == "explicit":
        if matrix is None or len(matrix) != npts or any(len(r) != npts for r in matrix):
            raise InstanceError(f"explicit metric needs a {npts}x{npts} matrix")
        mat = [[to_q(v) for v in row] for row in matrix]
        is_exact = True if exact is None else exact
    elif mode in ("line", "plane"):
        if facility_coords is None or client_coords is None:
            raise InstanceError(f"{mode} metric needs facility and client coordinates")
        if len(facility_coords) != n_facilities or len(client_coords) != n_clients:
            raise InstanceError("coordinate list lengths do not match counts")
        if mode == "line":
            fc = [to_q(x) for x in facility_coords]
            cc = [to_q(x) for x in client_coords]
            mat = _line_matrix(fc + cc)
            is_exact = True
        else:
            fc = [(to_q(x), to_q(y)) for x, y in facility_coords]
            cc = [(to_q(x), to_q(y)) for x, y in client_coords]
            mat = _plane_matrix(fc + cc)
            is_exact = False  # sqrt distances are double-rounded
        facility_coords, client_coords = fc, cc
    else:  # hst
        if hst_nodes is None or hst_factor is None:
            raise InstanceError("hst metric needs nodes and factor")
        hst_factor = to_q(hst_factor)
        if hst_factor < 2:
            raise InstanceError("hst factor must be >= 2")
        mat, root, leaf_of = _hst_matrix(hst_nodes, n_facilities, n_clients)
        is_exact = True
    return MetricSpace(
        mode=mode,
        n_facilities=n_facilities,
        n_clients=n_clients,
        matrix=mat,
        exact=is_exact,
        facility_coords=facility_coords,
        client_coords=client_coords,
        hst_nodes=hst_nodes,
        hst_factor=hst_factor,
        hst_root=root,
        hst_leaf_of_point=leaf_of,
    )


def validate_metric(metric: MetricSpace):
    """Check metric invariants; returns None or a violation report string.

    Exact instances are checked with zero tolerance, non-exact (plane /
    float-derived) ones within 1e-9 scaled by magnitude.
    """
    mat = metric.matrix
    npts = len(mat)
    tol = Q(0)
    if not metric.exact:
        scale = max((abs(v) for row in mat for v in row), default=Q(0))
        tol = to_q(FLOAT_TOL) * (scale if scale > 1 else Q(1))
    for a in range(npts):
        if mat[a][a] != 0:
            return f"identity violated: d({a},{a}) = {mat[a][a]}"
        for b in range(npts):
            if mat[a][b] < 0:
                return f"negative distance at ({a},{b})"
            if mat[a][b] != mat[b][a]:
                return f"symmetry violated at ({a},{b})"
    for a in range(npts):
        for b in range(npts):
            if a == b:
                continue
            dab = mat[a][b]
            for c in range(npts):
                if mat[a][c] > dab + mat[b][c] + tol:
                    return (
                        f"triangle inequality violated on ({a},{b},{c}): "
                        f"{mat[a][c]} > {dab} + {mat[b][c]}"
                    )
    if metric.mode == "hst":
        # edge lengths along every root-to-leaf path must decrease by >= factor
        nodes = metric.hst_nodes
        factor = metric.hst_factor
        stack = [(metric.hst_root, None)]
        while stack:
            u, e_up = stack.pop()
            for ch in nodes[u].children:
                e = nodes[ch].edge_to_parent
                if e_up is not None and e * factor > e_up:
                    return (
                        f"hst edge into node {ch} ({e}) does not decrease by "
                        f"factor {factor} from parent edge ({e_up})"
                    )
                stack.append((ch, e))
    return None


@dataclass
class FTMedInstance:
    metric: MetricSpace
    k: int
    requirements: List[int]  # r_j per client

    def __post_init__(self):
        n, m = self.metric.n_facilities, self.metric.n_clients
        if len(self.requirements) != m:
            raise InstanceError("requirements length must equal the client count")
        if not (1 <= self.k <= n):
            raise InstanceError(f"need 1 <= k <= n, got k={self.k}, n={n}")
        for j, r in enumerate(self.requirements):
            if not (1 <= r <= self.k):
                raise InstanceError(
                    f"client {j}: requirement {r} outside [1, k={self.k}]"
                )

    @property
    def n(self) -> int:
        return self.metric.n_facilities

    @property
    def m(self) -> int:
        return self.metric.n_clients

    @property
    def max_requirement(self) -> int:
        return max(self.requirements)


@dataclass
class FTFLInstance:
    metric: MetricSpace
    opening_costs: List["Q"]
    weights: List[List["Q"]]  # w_j^{(1..r_j)}; trailing zeros stripped on load

    def __post_init__(self):
        n, m = self.metric.n_facilities, self.metric.n_clients
        if len(self.opening_costs) != n:
            raise InstanceError("opening_costs length must equal facility count")
        if len(self.weights) != m:
            raise InstanceError("weights length must equal client count")
        self.opening_costs = [to_q(f) for f in self.opening_costs]
        for i, f in enumerate(self.opening_costs):
            if f < 0:
                raise InstanceError(f"facility {i}: negative opening cost")
        cleaned = []
        for j, w in enumerate(self.weights):
            w = [to_q(v) for v in w]
            if any(v < 0 for v in w):
                raise InstanceError(f"client {j}: negative weight")
            while w and w[-1] == 0:  # r_j is the index of the last useful level
                w.pop()
            if len(w) > n:
                raise InstanceError(f"client {j}: requirement {len(w)} exceeds n={n}")
            cleaned.append(w)
        self.weights = cleaned

    @property
    def n(self) -> int:
        return self.metric.n_facilities

    @property
    def m(self) -> int:
        return self.metric.n_clients

    @property
    def requirements(self) -> List[int]:
        return [len(w) for w in self.weights]

    @property
    def max_requirement(self) -> int:
        return max((len(w) for w in self.weights), default=0)


@dataclass
class OpenSet:
    facilities: Tuple[int, ...]  # distinct original facility indices, sorted
    assignments: Optional[Dict[int, List[int]]] = None  # client -> facilities

    def __post_init__(self):
        fac = tuple(sorted(set(self.facilities)))
        if len(fac) != len(self.facilities):
            raise InstanceError("open set contains duplicate facilities")
        self.facilities = fac

    def __len__(self):
        return len(self.facilities)


def closest_facilities(metric: MetricSpace, j: int, S: Sequence[int]) -> List[int]:
    """Facilities of S sorted by (distance to client j, facility index)."""
    return sorted(S, key=lambda i: (metric.d_fc(i, j), i))


def evaluate_ftmed_cost(instance: FTMedInstance, S: OpenSet) -> "Q":
    """Sum over clients of distances to their r_j closest open facilities."""
    fac = S.facilities
    total = Q(0)
    for j, r in enumerate(instance.requirements):
        if len(fac) < r:
            raise InfeasibleError(
                f"client {j} needs {r} facilities but only {len(fac)} are open"
            )
        order = closest_facilities(instance.metric, j, fac)
        total += sum(
            (instance.metric.d_fc(i, j) for i in order[:r]), Q(0)
        )
    return total


def evaluate_ftfl_cost(instance: FTFLInstance, S: OpenSet) -> "Q":
    """Opening costs plus weighted distances to the t-th closest open
    facility; infeasible (infinite) when fewer than r_j facilities are open."""
    fac = S.facilities
    total = sum((instance.opening_costs[i] for i in fac), Q(0))
    for j, w in enumerate(instance.weights):
        if len(fac) < len(w):
            raise InfeasibleError(
                f"client {j} needs {len(w)} facilities but only {len(fac)} are open"
            )
        order = closest_facilities(instance.metric, j, fac)
        for t, wt in enumerate(w):
            if wt != 0:
                total += wt * instance.metric.d_fc(order[t], j)
    return total


# -- JSON round trip -------------------------------------------------------

def _metric_to_dict(metric: MetricSpace) -> dict:
    if metric.mode == "explicit":
        return {
            "type": "explicit",
            "n": metric.n_facilities,
            "matrix": [[q_to_json(v) for v in row] for row in metric.matrix],
        }
    if metric.mode == "line":
        return {
            "type": "line",
            "facilities": [q_to_json(x) for x in metric.facility_coords],
            "clients": [q_to_json(x) for x in metric.client_coords],
        }
    if metric.mode == "plane":
        return {
            "type": "plane",
            "facilities": [[q_to_json(x), q_to_json(y)] for x, y in metric.facility_coords],
            "clients": [[q_to_json(x), q_to_json(y)] for x, y in metric.client_coords],
        }
    return {
        "type": "hst",
        "factor": q_to_json(metric.hst_factor),
        "nodes": [
            {
                "children": list(node.children),
                "edge_to_parent": None
                if node.edge_to_parent is None
                else q_to_json(node.edge_to_parent),
                "leaf": node.leaf,
            }
            for node in metric.hst_nodes
        ],
    }


def _metric_from_dict(doc: dict, n_clients: int) -> MetricSpace:
    mode = doc.get("type")
    if mode == "explicit":
        matrix = doc.get("matrix")
        if not isinstance(matrix, list):
            raise InstanceError("explicit metric: missing matrix")
        n = doc.get("n", len(matrix) - n_clients)
        return make_metric("explicit", n, n_clients, matrix=matrix)
    if mode in ("line", "plane"):
        fac = doc.get("facilities")
        cli = doc.get("clients")
        if fac is None or cli is None:
            raise InstanceError(f"{mode} metric: missing coordinate lists")
        return make_metric(
            mode, len(fac), n_clients, facility_coords=fac, client_coords=cli
        )
    if mode == "hst":
        nodes_doc = doc.get("nodes")
        if not isinstance(nodes_doc, list):
            raise InstanceError("hst metric: missing nodes")
        nodes = [
            HSTNode(
                children=tuple(nd.get("children", [])),
                edge_to_parent=None
                if nd.get("edge_to_parent") is None
                else to_q(nd["edge_to_parent"]),
                leaf=nd.get("leaf"),
            )
            for nd in nodes_doc
        ]
        n_fac = sum(1 for nd in nodes if nd.leaf and nd.leaf.startswith("f"))
        return make_metric(
            "hst", n_fac, n_clients, hst_nodes=nodes, hst_factor=doc.get("factor")
        )
    raise InstanceError(f"unknown metric type {mode!r}")


def instance_to_dict(instance) -> dict:
    if isinstance(instance, FTMedInstance):
        return {
            "kind": "ftmed",
            "metric": _metric_to_dict(instance.metric),
            "k": instance.k,
            "requirements": list(instance.requirements),
        }
    if isinstance(instance, FTFLInstance):
        return {
            "kind": "ftfl",
            "metric": _metric_to_dict(instance.metric),
            "requirements": list(instance.requirements),
            "opening_costs": [q_to_json(f) for f in instance.opening_costs],
            "weights": [[q_to_json(w) for w in wj] for wj in instance.weights],
        }
    raise TypeError(f"cannot serialise {type(instance)}")


def instance_from_dict(doc: dict, validate: bool = True):
    kind = doc.get("kind")
    if kind not in ("ftmed", "ftfl"):
        raise InstanceError(f"unknown instance kind {kind!r}")
    reqs = doc.get("requirements")
    if not isinstance(reqs, list) or not reqs:
        raise InstanceError("missing requirements list")
    metric = _metric_from_dict(doc.get("metric", {}), len(reqs))
    if validate:
        violation = validate_metric(metric)
        if violation is not None:
            raise InstanceError(f"invalid metric: {violation}")
    if kind == "ftmed":
        if "k" not in doc:
            raise InstanceError("ftmed document needs k")
        return FTMedInstance(metric=metric, k=int(doc["k"]), requirements=[int(r) for r in reqs])
    weights = doc.get("weights")
    costs = doc.get("opening_costs")
    if weights is None or costs is None:
        raise InstanceError("ftfl document needs opening_costs and weights")
    for j, (r, w) in enumerate(zip(reqs, weights)):
        if int(r) != len(w):
            raise InstanceError(f"client {j}: requirement {r} != weight vector length")
    return FTFLInstance(metric=metric, opening_costs=costs, weights=weights)


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_instance(path, validate: bool = True):
    try:
        fh = open(path)
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc}") from exc
    with fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return instance_from_dict(doc, validate=validate)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def instances_equal(a, b) -> bool:
    return instance_to_dict(a) == instance_to_dict(b)


# -- generation ------------------------------------------------------------

def gap_family_instance(kind: str, n: int):
    """The worst-case family for the natural covering LP: n-1 co-located
    free facilities plus one at distance n, a single client demanding all n.
    """
    if n < 2:
        raise InstanceError("gap family needs n >= 2")
    fac = [Q(0)] * (n - 1) + [Q(n)]
    metric = make_metric("line", n, 1, facility_coords=fac, client_coords=[Q(0)])
    if kind == "ftmed":
        return FTMedInstance(metric=metric, k=n, requirements=[n])
    if kind == "ftfl":
        weights = [[Q(0)] * (n - 1) + [Q(1)]]
        return FTFLInstance(metric=metric, opening_costs=[Q(0)] * n, weights=weights)
    raise InstanceError(f"unknown kind {kind!r}")


def _rand_q(rng: random.Random, lo: int, hi: int) -> "Q":
    # small denominators keep simplex arithmetic cheap
    den = rng.choice((1, 1, 1, 2, 4, 5))
    return Q(rng.randint(lo * den, hi * den), den)


def _random_metric(rng: random.Random, geometry: str, n: int, m: int) -> MetricSpace:
    if geometry == "line":
        fac = [_rand_q(rng, 0, 100) for _ in range(n)]
        cli = [_rand_q(rng, 0, 100) for _ in range(m)]
        return make_metric("line", n, m, facility_coords=fac, client_coords=cli)
    if geometry == "plane":
        fac = [(_rand_q(rng, 0, 100), _rand_q(rng, 0, 100)) for _ in range(n)]
        cli = [(_rand_q(rng, 0, 100), _rand_q(rng, 0, 100)) for _ in range(m)]
        return make_metric("plane", n, m, facility_coords=fac, client_coords=cli)
    if geometry == "explicit":
        # random symmetric weights closed under shortest paths -> exact metric
        npts = n + m
        mat = [[Q(0)] * npts for _ in range(npts)]
        for a in range(npts):
            for b in range(a + 1, npts):
                mat[a][b] = mat[b][a] = Q(rng.randint(1, 100))
        for c in range(npts):
            for a in range(npts):
                for b in range(npts):
                    via = mat[a][c] + mat[c][b]
                    if via < mat[a][b]:
                        mat[a][b] = via
        return make_metric("explicit", n, m, matrix=mat)
    if geometry == "hst":
        return _random_hst_metric(rng, n, m)
    raise InstanceError(f"unknown geometry {geometry!r}")


def _random_hst_metric(rng: random.Random, n: int, m: int) -> MetricSpace:
    """Uniform-depth HST with level-divided edge lengths; leaves carry the
    n facilities and m clients in shuffled order.  Uniform depth gives the
    equidistance property the exact tree solver relies on."""
    leaves = [f"f{i}" for i in range(n)] + [f"c{j}" for j in range(m)]
    rng.shuffle(leaves)
    depth = rng.choice((2, 3))
    factor = Q(rng.choice((2, 2, 3)))
    top = Q(rng.randint(2, 6)) * factor ** (depth - 1)
    nodes: List[dict] = [{"children": [], "edge": None, "leaf": None}]  # root = 0

    def grow(parent: int, labels: List[str], depth_left: int, edge: "Q"):
        if depth_left == 1:
            for label in labels:
                nodes.append({"children": [], "edge": edge, "leaf": label})
                nodes[parent]["children"].append(len(nodes) - 1)
            return
        groups = min(len(labels), rng.randint(2, 3))
        bounds = sorted(rng.sample(range(1, len(labels)), groups - 1)) if groups > 1 else []
        chunks = [
            labels[a:b]
            for a, b in zip([0] + bounds, bounds + [len(labels)])
        ]
        for chunk in chunks:
            nodes.append({"children": [], "edge": edge, "leaf": None})
            child = len(nodes) - 1
            nodes[parent]["children"].append(child)
            grow(child, chunk, depth_left - 1, edge / factor)

    grow(0, leaves, depth, top)
    hst_nodes = [
        HSTNode(children=tuple(nd["children"]), edge_to_parent=nd["edge"], leaf=nd["leaf"])
        for nd in nodes
    ]
    return make_metric("hst", n, m, hst_nodes=hst_nodes, hst_factor=factor)


def generate_instance(
    kind: str,
    geometry: str,
    n: int,
    m: int,
    *,
    k: Optional[int] = None,
    r_range: Tuple[int, int] = (1, 2),
    f_range: Tuple[int, int] = (0, 20),
    w_range: Tuple[int, int] = (1, 5),
    seed: int = 0,
    gap_family: bool = False,
):
    """Deterministic random instance; passes validate_metric by construction."""
    if gap_family:
        return gap_family_instance(kind, n)
    rng = random.Random(seed)
    metric = _random_metric(rng, geometry, n, m)
    rmin, rmax = r_range
    if rmin < 1 or rmin > rmax:
        raise InstanceError(f"bad requirement range {r_range}")
    if kind == "ftmed":
        if k is None:
            raise InstanceError("ftmed generation needs k")
        if not (1 <= k <= n):
            raise InstanceError(f"impossible parameters: k={k}, n={n}")
        if rmax > k:
            raise InstanceError(f"requirement range {r_range} exceeds k={k}")
        reqs = [rng.randint(rmin, rmax) for _ in range(m)]
        return FTMedInstance(metric=metric, k=k, requirements=reqs)
    if kind == "ftfl":
        if rmax > n:
            raise InstanceError(f"requirement range {r_range} exceeds n={n}")
        costs = [Q(rng.randint(*f_range)) for _ in range(n)]
        weights = []
        for _ in range(m):
            r = rng.randint(rmin, rmax)
            w = [Q(rng.randint(*w_range)) for _ in range(r)]
            w[-1] = max(w[-1], Q(1))  # keep r_j meaningful
            weights.append(w)
        return FTFLInstance(metric=metric, opening_costs=costs, weights=weights)
    raise InstanceError(f"unknown kind {kind!r}")
