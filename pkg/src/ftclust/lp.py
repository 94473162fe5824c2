"""Linear programs and a bounded-variable two-phase simplex solver.

The solver runs either on exact rationals (Bland's rule, cannot cycle,
zero tolerance) or on floats (Dantzig's rule with a deterministic
perturbation fallback, tolerance 1e-9).  It returns basic optimal
solutions: the basis is reported so callers can treat the point as a
polytope vertex.  A row-generation loop driven by a separation oracle
sits on top for constraint families too large to enumerate.

Everything is deterministic: fixed pivoting rules, ties broken by index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .arith import Q, to_q

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, GE, EQ = "<=", ">=", "=="
_OPS = (LE, GE, EQ)


class LPError(ValueError):
    pass


class SimplexCycleError(LPError):
    """Float mode exceeded its iteration cap twice (with perturbation)."""


class SeparationError(LPError):
    def __init__(self, message, last_point=None, rounds=0):
        super().__init__(message)
        self.last_point = last_point
        self.rounds = rounds


@dataclass(frozen=True)
class Row:
    coeffs: Tuple[Tuple[int, "Q"], ...]  # sparse, sorted by variable index
    op: str
    rhs: "Q"

    def evaluate(self, x) -> "Q":
        return sum((c * x[v] for v, c in self.coeffs), Q(0))

    def satisfied(self, x, tol=0) -> bool:
        lhs = self.evaluate(x)
        if self.op == LE:
            return lhs <= self.rhs + tol
        if self.op == GE:
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol

    def canonical_key(self):
        """Hashable form invariant under positive scaling (cut dedup)."""
        scale = abs(self.coeffs[0][1]) if self.coeffs else Q(1)
        return (
            self.op,
            tuple((v, Q(c) / scale) for v, c in self.coeffs),
            Q(self.rhs) / scale,
        )


def make_row(coeffs, op, rhs) -> Row:
    if op not in _OPS:
        raise LPError(f"unknown comparator {op!r}")
    if isinstance(coeffs, dict):
        coeffs = coeffs.items()
    packed = tuple(sorted((int(v), to_q(c)) for v, c in coeffs if to_q(c) != 0))
    seen = set()
    for v, _ in packed:
        if v in seen:
            raise LPError(f"duplicate variable {v} in row")
        seen.add(v)
    return Row(coeffs=packed, op=op, rhs=to_q(rhs))


@dataclass
class LinearProgram:
    """min c·x + c0  s.t. rows, lo <= x <= up  (up may be None = +inf)."""

    n_vars: int
    objective: List["Q"]
    rows: List[Row] = field(default_factory=list)
    lower: List["Q"] = None
    upper: List[Optional["Q"]] = None
    objective_constant: "Q" = Q(0)

    def __post_init__(self):
        if len(self.objective) != self.n_vars:
            raise LPError("objective length != n_vars")
        self.objective = [to_q(c) for c in self.objective]
        self.objective_constant = to_q(self.objective_constant)
        if self.lower is None:
            self.lower = [Q(0)] * self.n_vars
        if self.upper is None:
            self.upper = [None] * self.n_vars
        self.lower = [to_q(b) for b in self.lower]
        self.upper = [None if b is None else to_q(b) for b in self.upper]
        if len(self.lower) != self.n_vars or len(self.upper) != self.n_vars:
            raise LPError("bound array length != n_vars")
        for v in range(self.n_vars):
            if self.upper[v] is not None and self.lower[v] > self.upper[v]:
                raise LPError(f"variable {v}: lower bound above upper bound")
        for row in self.rows:
            for v, _ in row.coeffs:
                if not (0 <= v < self.n_vars):
                    raise LPError(f"row references unknown variable {v}")

    def add_row(self, coeffs, op, rhs):
        row = make_row(coeffs, op, rhs)
        for v, _ in row.coeffs:
            if not (0 <= v < self.n_vars):
                raise LPError(f"row references unknown variable {v}")
        self.rows.append(row)

    def with_extra_rows(self, rows: Iterable[Row]) -> "LinearProgram":
        return LinearProgram(
            n_vars=self.n_vars,
            objective=list(self.objective),
            rows=list(self.rows) + list(rows),
            lower=list(self.lower),
            upper=list(self.upper),
            objective_constant=self.objective_constant,
        )


@dataclass
class LPSolution:
    status: str
    x: Optional[List["Q"]]
    objective: Optional["Q"]
    basis: Tuple = ()
    nonbasic_at_upper: Tuple = ()
    rounds: int = 0  # separation rounds, when applicable

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


def check_feasible(lp: LinearProgram, x, tol=0) -> Optional[str]:
    """None if x satisfies all rows and bounds, else a description."""
    for v in range(lp.n_vars):
        if x[v] < lp.lower[v] - tol:
            return f"x[{v}] below lower bound"
        if lp.upper[v] is not None and x[v] > lp.upper[v] + tol:
            return f"x[{v}] above upper bound"
    for idx, row in enumerate(lp.rows):
        if not row.satisfied(x, tol):
            return f"row {idx} violated"
    return None


def interval_matrix_check(lp: LinearProgram) -> Optional[str]:
    """Check the consecutive-ones shape: every row's support must be a
    contiguous index range.  Returns None or the offending row index."""
    for idx, row in enumerate(lp.rows):
        vs = [v for v, _ in row.coeffs]
        if vs and vs[-1] - vs[0] + 1 != len(vs):
            return f"row {idx} support {vs} is not contiguous"
    return None


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

_BASIC, _AT_LO, _AT_UP = 0, 1, 2


class _Simplex:
    """Bounded-variable primal simplex on sparse rows.

    Columns: structural variables first, then one slack per inequality
    row, then phase-1 artificials.  Tableau rows are dicts col -> coeff,
    kept exactly (rational) or with tolerance pruning (float).
    """

    def __init__(self, lp: LinearProgram, rational: bool):
        self.rational = rational
        self.conv = (lambda v: to_q(v)) if rational else float
        self.tol = Q(0) if rational else 1e-9
        self.lp = lp
        n = lp.n_vars
        conv = self.conv
        self.lo: List = [conv(b) for b in lp.lower]
        self.up: List = [None if b is None else conv(b) for b in lp.upper]
        self.val: List = list(self.lo)  # current value per column
        self.status: List[int] = [_AT_LO] * n
        self.slack_of_row: Dict[int, int] = {}
        self.label: Dict[int, Tuple[str, int]] = {v: ("x", v) for v in range(n)}

        zero = conv(0)
        rows: List[Dict[int, object]] = []
        rhs: List = []
        ops: List[str] = []
        for r, row in enumerate(lp.rows):
            rows.append({v: conv(c) for v, c in row.coeffs})
            rhs.append(conv(row.rhs))
            ops.append(row.op)

        ncol = n
        for r, op in enumerate(ops):
            if op in (LE, GE):
                col = ncol
                ncol += 1
                rows[r][col] = conv(1) if op == LE else conv(-1)
                self.lo.append(zero)
                self.up.append(None)
                self.val.append(zero)
                self.status.append(_AT_LO)
                self.slack_of_row[r] = col
                self.label[col] = ("s", r)
        self.n_structural = n
        self.first_artificial = ncol

        # initial point: everything nonbasic at its lower bound
        self.T: List[Dict[int, object]] = []
        self.beta: List = []
        self.basic: List[int] = []
        self.artificials: List[int] = []
        for r in range(len(rows)):
            row = rows[r]
            resid = rhs[r]
            for v, c in row.items():
                if self.val[v] != 0:
                    resid -= c * self.val[v]
            scol = self.slack_of_row.get(r)
            if scol is not None:
                sc = row[scol]
                sval = resid / sc
                if sval >= 0:  # slack can start basic and feasible
                    if sc != 1:  # normalise basic coefficient to +1
                        row = {v: c / sc for v, c in row.items()}
                    self._install_row(row, scol, sval)
                    continue
                # otherwise the slack stays nonbasic at 0 and we add an artificial
            if resid < 0:
                row = {v: -c for v, c in row.items()}
                resid = -resid
            col = ncol
            ncol += 1
            row = dict(row)
            row[col] = conv(1)
            self.lo.append(zero)
            self.up.append(None)
            self.val.append(zero)
            self.status.append(_AT_LO)
            self.label[col] = ("a", r)
            self.artificials.append(col)
            self._install_row(row, col, resid)
        self.ncol = ncol
        self.d: Dict[int, object] = {}
        self.iterations = 0

    def _install_row(self, row, basic_col, value):
        self.T.append(row)
        self.basic.append(basic_col)
        self.beta.append(value)
        self.status[basic_col] = _BASIC
        self.val[basic_col] = value

    # -- pivoting ----------------------------------------------------------
    def _apply_move(self, j, sigma, t):
        if t != 0:
            for i, row in enumerate(self.T):
                a = row.get(j)
                if a:
                    self.beta[i] -= sigma * t * a
                    self.val[self.basic[i]] = self.beta[i]
            self.val[j] += sigma * t

    def _pivot(self, r, j):
        T = self.T
        prow = T[r]
        piv = prow[j]
        if piv != 1:
            inv = 1 / piv
            prow = {v: c * inv for v, c in prow.items()}
            T[r] = prow
        tol = self.tol
        for i, row in enumerate(T):
            if i == r:
                continue
            f = row.get(j)
            if not f:
                continue
            for v, c in prow.items():
                nv = row.get(v, 0) - f * c
                if nv == 0 or (not self.rational and abs(nv) <= 1e-13):
                    row.pop(v, None)
                else:
                    row[v] = nv
            row.pop(j, None)
        d = self.d
        f = d.get(j)
        if f:
            for v, c in prow.items():
                nv = d.get(v, 0) - f * c
                if nv == 0 or (not self.rational and abs(nv) <= 1e-13):
                    d.pop(v, None)
                else:
                    d[v] = nv
            d.pop(j, None)

    def _init_reduced_costs(self, cost: Dict[int, object]):
        d = dict(cost)
        for i, row in enumerate(self.T):
            cb = cost.get(self.basic[i])
            if cb:
                for v, c in row.items():
                    nv = d.get(v, 0) - cb * c
                    if nv == 0:
                        d.pop(v, None)
                    else:
                        d[v] = nv
        for col in self.basic:
            d.pop(col, None)
        self.d = {v: c for v, c in d.items() if c != 0}

    def _entering_bland(self):
        best = None
        tol = self.tol
        for v, dv in self.d.items():
            st = self.status[v]
            if st == _BASIC:
                continue
            if self.lo[v] == self.up[v]:
                continue  # fixed variable
            if (st == _AT_LO and dv < -tol) or (st == _AT_UP and dv > tol):
                if best is None or v < best:
                    best = v
        return best

    def _entering_dantzig(self):
        best, best_score = None, self.tol
        for v, dv in self.d.items():
            st = self.status[v]
            if st == _BASIC or self.lo[v] == self.up[v]:
                continue
            score = -dv if st == _AT_LO else dv
            if score > best_score or (score == best_score and best is not None and v < best):
                best, best_score = v, score
        return best

    def _ratio_test(self, j, sigma):
        """Returns (t, leaving_row_or_None, hit) -- None row means bound flip;
        (None, None, None) means unbounded."""
        tol = self.tol
        best_t = None
        best_var = None
        best_row = None
        best_hit = None
        if self.up[j] is not None:
            best_t = self.up[j] - self.lo[j]
            best_var = j
        for i, row in enumerate(self.T):
            a = row.get(j)
            if not a or abs(a) <= tol:
                continue
            rate = -sigma * a
            b = self.basic[i]
            if rate < 0:
                cap = (self.beta[i] - self.lo[b]) / (-rate)
                hit = _AT_LO
            else:
                if self.up[b] is None:
                    continue
                cap = (self.up[b] - self.beta[i]) / rate
                hit = _AT_UP
            if cap < 0:
                cap = 0 * cap  # degenerate: numeric fuzz in float mode
            if best_t is None or cap < best_t or (cap == best_t and b < best_var):
                best_t, best_var, best_row, best_hit = cap, b, i, hit
        if best_t is None:
            return None, None, None
        return best_t, best_row, best_hit

    def _step(self, entering_rule) -> Optional[str]:
        j = entering_rule()
        if j is None:
            return OPTIMAL
        sigma = 1 if self.status[j] == _AT_LO else -1
        t, r, hit = self._ratio_test(j, sigma)
        if t is None:
            return UNBOUNDED
        self._apply_move(j, sigma, t)
        if r is None:  # bound flip
            self.status[j] = _AT_UP if sigma == 1 else _AT_LO
            self.val[j] = self.up[j] if sigma == 1 else self.lo[j]
        else:
            leaving = self.basic[r]
            self.status[leaving] = hit
            self.val[leaving] = self.lo[leaving] if hit == _AT_LO else self.up[leaving]
            self.basic[r] = j
            self.beta[r] = self.val[j]
            self.status[j] = _BASIC
            self._pivot(r, j)
        self.iterations += 1
        return None

    def _run(self, entering_rule, cap: int) -> str:
        start = self.iterations
        while True:
            outcome = self._step(entering_rule)
            if outcome is not None:
                return outcome
            if self.iterations - start > cap:
                return "cap"

    def _drive_out_artificials(self):
        arts = set(self.artificials)
        drop = []
        for r in range(len(self.T)):
            if self.basic[r] not in arts:
                continue
            pivot_col = None
            for v in sorted(self.T[r]):
                if v not in arts and v != self.basic[r] and abs(self.T[r][v]) > self.tol:
                    pivot_col = v
                    break
            if pivot_col is None:
                drop.append(r)  # redundant row
                continue
            old = self.basic[r]
            self.status[old] = _AT_LO
            self.val[old] = self.lo[old]
            self.basic[r] = pivot_col
            self.beta[r] = self.val[pivot_col]
            self.status[pivot_col] = _BASIC
            self._pivot(r, pivot_col)
        for r in sorted(drop, reverse=True):
            del self.T[r], self.beta[r], self.basic[r]
        for row in self.T:
            for col in arts:
                row.pop(col, None)
        self.artificials = []

    def solve(self) -> LPSolution:
        cap_r = 500_000
        conv = self.conv
        if self.artificials:
            cost = {col: conv(1) for col in self.artificials}
            self._init_reduced_costs(cost)
            if self.rational:
                outcome = self._run(self._entering_bland, cap_r)
            else:
                outcome = self._run(self._entering_dantzig, self._float_cap())
                if outcome == "cap":
                    outcome = self._run(self._entering_bland, self._float_cap())
            if outcome == "cap":
                raise SimplexCycleError("phase 1 exceeded the iteration cap")
            if outcome == UNBOUNDED:  # cannot happen: phase-1 objective >= 0
                raise LPError("internal error: unbounded phase 1")
            arts = set(self.artificials)
            infeas = sum(
                (self.beta[i] for i in range(len(self.T)) if self.basic[i] in arts),
                conv(0),
            )
            if infeas > (0 if self.rational else 1e-7):
                return LPSolution(status=INFEASIBLE, x=None, objective=None)
            self._drive_out_artificials()

        cost = {v: conv(c) for v, c in enumerate(self.lp.objective) if c != 0}
        self._init_reduced_costs(cost)
        if self.rational:
            outcome = self._run(self._entering_bland, cap_r)
            if outcome == "cap":
                raise LPError("internal error: Bland's rule exceeded the safety cap")
        else:
            outcome = self._run(self._entering_dantzig, self._float_cap())
            if outcome == "cap":
                self._perturb(cost)
                outcome = self._run(self._entering_bland, self._float_cap())
                if outcome == "cap":
                    raise SimplexCycleError("float mode cycled beyond the iteration cap")
        if outcome == UNBOUNDED:
            return LPSolution(status=UNBOUNDED, x=None, objective=None)
        return self._extract()

    def _float_cap(self) -> int:
        return max(20_000, 80 * (len(self.T) + self.ncol))

    def _perturb(self, cost):
        # deterministic tiny objective perturbation; optimum re-evaluated
        # with the original objective by _extract, error stays ~1e-10 scale
        scale = max((abs(c) for c in cost.values()), default=1.0) or 1.0
        d = self.d
        for v in range(self.n_structural):
            if self.status[v] == _BASIC:
                continue
            eps = scale * 1e-10 * (v + 1)
            d[v] = d.get(v, 0.0) + eps

    def _extract(self) -> LPSolution:
        x = [self.val[v] for v in range(self.n_structural)]
        obj = sum(
            (c * x[v] for v, c in enumerate(self.lp.objective) if c != 0),
            self.conv(self.lp.objective_constant),
        )
        if self.rational:
            problem = check_feasible(self.lp, x, 0)
            if problem is not None:
                raise LPError(f"internal error: optimal point infeasible ({problem})")
        basis = tuple(sorted(self.label[c] for c in self.basic))
        at_up = tuple(
            sorted(
                self.label[v]
                for v in range(self.ncol)
                if v < self.first_artificial and self.status[v] == _AT_UP
            )
        )
        return LPSolution(
            status=OPTIMAL, x=x, objective=obj, basis=basis, nonbasic_at_upper=at_up
        )


def solve(lp: LinearProgram, mode: str = "rational") -> LPSolution:
    """Optimal basic solution of lp, or infeasible/unbounded status."""
    if mode not in ("rational", "float"):
        raise LPError(f"unknown arithmetic mode {mode!r}")
    return _Simplex(lp, rational=(mode == "rational")).solve()


def solve_with_separation(
    lp: LinearProgram,
    oracle: Callable[[Sequence], List[Row]],
    max_rounds: int = 200,
    mode: str = "rational",
    batch_cap: int = 50,
) -> LPSolution:
    """Cutting-plane loop: solve, ask the oracle for violated rows, repeat.

    The oracle must return rows valid for the full implicit system; a
    returned row that is already present indicates an oracle bug and is
    reported as an error.  At most batch_cap rows are appended per round.
    """
    seen = {row.canonical_key() for row in lp.rows}
    work = lp
    sol = None
    for rounds in range(1, max_rounds + 1):
        sol = solve(work, mode)
        if sol.status != OPTIMAL:
            sol.rounds = rounds
            return sol
        cuts = oracle(sol.x)
        if not cuts:
            sol.rounds = rounds
            return sol
        cuts = cuts[:batch_cap]
        for row in cuts:
            key = row.canonical_key()
            if key in seen:
                raise SeparationError(
                    f"oracle returned an already-present row: {row}",
                    last_point=sol.x,
                    rounds=rounds,
                )
            seen.add(key)
        work = work.with_extra_rows(cuts)
    raise SeparationError(
        f"separation did not converge within {max_rounds} rounds",
        last_point=None if sol is None else sol.x,
        rounds=max_rounds,
    )


def lp_to_text(lp: LinearProgram, name: str = "lp") -> str:
    """Dump in a standard LP-exchange text format (for external cross-checks)."""

    def term(v, c):
        c = to_q(c)
        sign = "+" if c >= 0 else "-"
        return f"{sign} {abs(c)} x{v}"

    lines = [f"\\ {name}", "Minimize", " obj: " + " ".join(
        term(v, c) for v, c in enumerate(lp.objective) if c != 0
    )]
    lines.append("Subject To")
    opmap = {LE: "<=", GE: ">=", EQ: "="}
    for idx, row in enumerate(lp.rows):
        body = " ".join(term(v, c) for v, c in row.coeffs)
        lines.append(f" r{idx}: {body} {opmap[row.op]} {row.rhs}")
    lines.append("Bounds")
    for v in range(lp.n_vars):
        hi = "+inf" if lp.upper[v] is None else str(lp.upper[v])
        lines.append(f" {lp.lower[v]} <= x{v} <= {hi}")
    lines.append("End")
    return "\n".join(lines) + "\n"
