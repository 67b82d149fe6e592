"""Exact optimization of the 0-1 assembly programs.

Two solvers with identical semantics:

* ``brute_force`` — vectorized enumeration of every binary assignment
  (capped at 22 binaries), with slack variables filled in closed form.
  Serves as the oracle.
* ``solve`` — best-first branch & bound on an LP relaxation.  Constraint
  rows are activated lazily: each node solves the LP over only the rows
  its relaxation actually violates, which keeps the simplex tableaus
  small without giving up exactness (the final point is checked against
  every row of the program).

Ties between equally-valued optima are broken toward fewer active edge
variables, then lexicographically smallest assignment (variable order =
program order, earlier variable = most significant).
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .ipbuild import (
    EQ,
    GE,
    KIND_EDGE,
    KIND_SLACK_LO,
    KIND_SLACK_UP,
    LE,
    BinaryProgram,
    VarRef,
)
from .lp import solve_lp

MAX_BRUTE_FORCE = 22
DEFAULT_TIME_LIMIT = 300.0
MAX_TIME_LIMIT = 3600.0

_CHUNK_BITS = 18  # enumerate at most 2**18 assignments per vectorized chunk

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_TIME_LIMIT = "time_limit"


class TooLargeError(ValueError):
    """Raised when brute force is asked for more binaries than it enumerates."""


class MissingVariableError(KeyError):
    """An assignment lacks a value for one of the program's variables."""


@dataclass
class SolveResult:
    status: str
    objective: float | None
    assignment: dict[VarRef, float] | None
    bound: float | None = None
    gap: float | None = None
    nodes: int = 0
    wall_time: float = 0.0
    lp_iterations: int = 0


@dataclass
class Violation:
    constraint_index: int
    family: str
    relation: str
    lhs: float
    rhs: float
    amount: float


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_family(self) -> dict[str, list[Violation]]:
        out: dict[str, list[Violation]] = {}
        for v in self.violations:
            out.setdefault(v.family, []).append(v)
        return out


# ---------------------------------------------------------------------------
# Compiled form shared by both solvers.


class _Row:
    __slots__ = ("cols", "coefs", "rel", "rhs", "family", "slack_col",
                 "slack_sigma", "bin_cols", "bin_coefs")

    def __init__(self, cols, coefs, rel, rhs, family, slack_col, slack_sigma,
                 bin_cols, bin_coefs):
        self.cols = cols
        self.coefs = coefs
        self.rel = rel
        self.rhs = rhs
        self.family = family
        self.slack_col = slack_col      # -1 when the row has no slack term
        self.slack_sigma = slack_sigma
        self.bin_cols = bin_cols        # non-slack columns of the row
        self.bin_coefs = bin_coefs


class _Compiled:
    def __init__(self, p: BinaryProgram):
        p.validate()
        self.program = p
        self.refs: list[VarRef] = [v.ref for v in p.variables]
        self.index: dict[VarRef, int] = {r: i for i, r in enumerate(self.refs)}
        n = len(self.refs)
        self.n = n
        self.c = np.zeros(n)
        for ref, coef in p.objective.items():
            self.c[self.index[ref]] += coef
        self.lb = np.array([v.lb for v in p.variables], dtype=float)
        self.ub = np.array([v.ub for v in p.variables], dtype=float)
        self.binary = np.array([v.binary for v in p.variables], dtype=bool)
        self.bin_idx = np.nonzero(self.binary)[0]
        kinds = [r.kind for r in self.refs]
        self.start_upper = np.array([k == KIND_SLACK_LO for k in kinds],
                                    dtype=bool)
        self.edge_cols = np.array(
            [i for i in self.bin_idx if kinds[i] == KIND_EDGE], dtype=int)

        slack_kinds = {KIND_SLACK_UP, KIND_SLACK_LO}
        self.rows: list[_Row] = []
        for con in p.constraints:
            cols = np.array([self.index[r] for _, r in con.terms], dtype=int)
            coefs = np.array([co for co, _ in con.terms], dtype=float)
            slack_col, slack_sigma = -1, 0.0
            keep = np.ones(len(cols), dtype=bool)
            for j, (_, ref) in enumerate(con.terms):
                if ref.kind in slack_kinds:
                    if slack_col >= 0:
                        raise ValueError(
                            "constraint carries more than one slack term")
                    slack_col = int(cols[j])
                    slack_sigma = float(coefs[j])
                    keep[j] = False
            self.rows.append(_Row(cols, coefs, con.relation, con.rhs,
                                  con.family, slack_col, slack_sigma,
                                  cols[keep], coefs[keep]))

        # CSR-style layout for fast "evaluate every row at x" checks.
        if self.rows:
            self.row_ptr = np.zeros(len(self.rows) + 1, dtype=int)
            flat_cols = []
            flat_coefs = []
            for i, row in enumerate(self.rows):
                flat_cols.append(row.cols)
                flat_coefs.append(row.coefs)
                self.row_ptr[i + 1] = self.row_ptr[i] + len(row.cols)
            self.flat_cols = np.concatenate(flat_cols)
            self.flat_coefs = np.concatenate(flat_coefs)
            self.rhs = np.array([r.rhs for r in self.rows])
            self.rel_le = np.array([r.rel == LE for r in self.rows])
            self.rel_ge = np.array([r.rel == GE for r in self.rows])
            self.rel_eq = np.array([r.rel == EQ for r in self.rows])
        else:
            self.row_ptr = np.zeros(1, dtype=int)
            self.flat_cols = np.zeros(0, dtype=int)
            self.flat_coefs = np.zeros(0)
            self.rhs = np.zeros(0)
            self.rel_le = np.zeros(0, dtype=bool)
            self.rel_ge = np.zeros(0, dtype=bool)
            self.rel_eq = np.zeros(0, dtype=bool)

    def row_values(self, x: np.ndarray) -> np.ndarray:
        if not self.rows:
            return np.zeros(0)
        prods = self.flat_coefs * x[self.flat_cols]
        return np.add.reduceat(prods, self.row_ptr[:-1])

    def violations(self, x: np.ndarray, tol: float) -> np.ndarray:
        """Per-row constraint violation magnitudes at x (0 when satisfied)."""
        lhs = self.row_values(x)
        over = lhs - self.rhs
        v = np.zeros(len(self.rows))
        v[self.rel_le] = np.maximum(0.0, over[self.rel_le])
        v[self.rel_ge] = np.maximum(0.0, -over[self.rel_ge])
        v[self.rel_eq] = np.abs(over[self.rel_eq])
        v[v <= tol] = 0.0
        return v


def _minimal_slack(need: float, sigma: float, cap: float,
                   tol: float) -> float | None:
    """Smallest slack value neutralizing a shortfall of `need`, or None.

    `need` is how much the slack term sigma*s must contribute (signed);
    returns None when the required value is negative-infeasible or above
    the cap.
    """
    if abs(need) <= tol:
        return 0.0
    s = need / sigma
    if s < -tol:
        return None
    s = max(s, 0.0)
    if s > cap + max(tol, 1e-9):
        return None
    return s


def _row_slack(row: _Row, lhs_bin: float, cap: float,
               tol: float) -> float | None:
    """Closed-form minimal slack for one row given its non-slack lhs."""
    if row.slack_col < 0:
        ok = ((row.rel == LE and lhs_bin <= row.rhs + tol)
              or (row.rel == GE and lhs_bin >= row.rhs - tol)
              or (row.rel == EQ and abs(lhs_bin - row.rhs) <= tol))
        return 0.0 if ok else None
    # sigma*s must bring lhs_bin into the feasible side.
    if row.rel == LE:
        need = row.rhs - lhs_bin if lhs_bin > row.rhs + tol else 0.0
    elif row.rel == GE:
        need = row.rhs - lhs_bin if lhs_bin < row.rhs - tol else 0.0
    else:
        need = row.rhs - lhs_bin if abs(lhs_bin - row.rhs) > tol else 0.0
    return _minimal_slack(need, row.slack_sigma, cap, tol)


# ---------------------------------------------------------------------------
# Brute force.


def brute_force(p: BinaryProgram) -> SolveResult:
    """Exact enumeration over all binary assignments (oracle solver)."""
    t0 = time.monotonic()
    comp = _Compiled(p)
    k = len(comp.bin_idx)
    if k > MAX_BRUTE_FORCE:
        raise TooLargeError(
            f"{k} binary variables exceed the brute-force cap of "
            f"{MAX_BRUTE_FORCE}")

    non_bin = np.setdiff1d(np.arange(comp.n), comp.bin_idx)
    for i in non_bin:
        if comp.refs[i].kind not in (KIND_SLACK_UP, KIND_SLACK_LO):
            raise ValueError(
                f"brute force supports binary + slack variables only, got "
                f"{comp.refs[i].name}")

    bin_pos = {int(v): j for j, v in enumerate(comp.bin_idx)}
    edge_pos = np.array([bin_pos[int(i)] for i in comp.edge_cols], dtype=int)
    c_bin = comp.c[comp.bin_idx]

    # Per-row views in enumeration space.
    row_bin_pos = [np.array([bin_pos[int(cc)] for cc in r.bin_cols], dtype=int)
                   for r in comp.rows]
    slack_caps = np.array([comp.ub[r.slack_col] if r.slack_col >= 0 else 0.0
                           for r in comp.rows])
    slack_lams = np.array(
        [comp.c[r.slack_col] if r.slack_col >= 0 else 0.0 for r in comp.rows])

    # Fixed binaries (lb == ub) restrict the enumeration by masking.
    fix_lo = comp.lb[comp.bin_idx]
    fix_hi = comp.ub[comp.bin_idx]

    best_obj = -np.inf
    best_edges = -1
    best_code = -1
    shifts = (k - 1 - np.arange(k)).astype(np.uint64)

    total = 1 << k
    chunk = 1 << min(_CHUNK_BITS, k)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(float)
        feas = np.ones(len(codes), dtype=bool)
        for j in range(k):
            if fix_lo[j] > 0.5:
                feas &= bits[:, j] > 0.5
            if fix_hi[j] < 0.5:
                feas &= bits[:, j] < 0.5
        obj = bits @ c_bin
        for ri, row in enumerate(comp.rows):
            pos = row_bin_pos[ri]
            lhs = bits[:, pos] @ row.bin_coefs if len(pos) else \
                np.zeros(len(codes))
            if row.slack_col < 0:
                if row.rel == LE:
                    feas &= lhs <= row.rhs + 1e-9
                elif row.rel == GE:
                    feas &= lhs >= row.rhs - 1e-9
                else:
                    feas &= np.abs(lhs - row.rhs) <= 1e-9
            else:
                if row.rel == LE:
                    need = np.where(lhs > row.rhs + 1e-9, row.rhs - lhs, 0.0)
                elif row.rel == GE:
                    need = np.where(lhs < row.rhs - 1e-9, row.rhs - lhs, 0.0)
                else:
                    need = np.where(np.abs(lhs - row.rhs) > 1e-9,
                                    row.rhs - lhs, 0.0)
                with np.errstate(divide="ignore", invalid="ignore"):
                    s = np.where(need == 0.0, 0.0, need / row.slack_sigma)
                feas &= s >= -1e-9
                s = np.maximum(s, 0.0)
                feas &= s <= slack_caps[ri] + 1e-9
                obj = obj + slack_lams[ri] * s
        if not feas.any():
            continue
        obj_masked = np.where(feas, obj, -np.inf)
        chunk_best = float(obj_masked.max())
        if chunk_best < best_obj - 1e-12:
            continue
        cand = np.nonzero(obj_masked >= chunk_best - 1e-12)[0]
        edges = bits[np.ix_(cand, edge_pos)].sum(axis=1) if len(edge_pos) \
            else np.zeros(len(cand))
        order = np.lexsort((cand, edges))  # fewest edges, then smallest code
        pick = cand[order[0]]
        pick_obj = float(obj[pick])
        pick_edges = int(edges[order[0]])
        pick_code = int(codes[pick])
        if (pick_obj > best_obj + 1e-12
                or (abs(pick_obj - best_obj) <= 1e-12
                    and (pick_edges, pick_code) < (best_edges, best_code))):
            best_obj = pick_obj
            best_edges = pick_edges
            best_code = pick_code

    if best_code < 0:
        return SolveResult(STATUS_INFEASIBLE, None, None,
                           wall_time=time.monotonic() - t0)

    bits = np.array([(best_code >> int(s)) & 1 for s in shifts], dtype=float)
    x = np.zeros(comp.n)
    x[comp.bin_idx] = bits
    for ri, row in enumerate(comp.rows):
        if row.slack_col >= 0:
            lhs = float(x[row.bin_cols] @ row.bin_coefs)
            s = _row_slack(row, lhs, slack_caps[ri], 1e-9)
            x[row.slack_col] = 0.0 if s is None else s
    objective = float(np.dot(comp.c, x))
    assignment = {ref: float(x[i]) for i, ref in enumerate(comp.refs)}
    return SolveResult(STATUS_OPTIMAL, objective, assignment,
                       bound=objective, gap=0.0, nodes=1 << k,
                       wall_time=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# Branch & bound.


class _OutOfTime(Exception):
    pass


def solve(p: BinaryProgram, time_limit: float | None = None) -> SolveResult:
    """Exact branch & bound with lazily generated constraint rows."""
    t0 = time.monotonic()
    budget = DEFAULT_TIME_LIMIT if time_limit is None else float(time_limit)
    budget = min(budget, MAX_TIME_LIMIT)
    deadline = t0 + budget

    comp = _Compiled(p)
    n = comp.n
    lp_iters = 0
    nodes = 0

    if n == 0:
        return SolveResult(STATUS_OPTIMAL, 0.0, {}, bound=0.0, gap=0.0,
                           nodes=0, wall_time=time.monotonic() - t0)

    def node_relaxation(fixes: dict[int, float],
                        active: tuple[int, ...]):
        """Solve the node LP, activating violated rows until clean.

        Returns (bound, x, active') or None when infeasible.
        """
        nonlocal lp_iters
        lb = comp.lb.copy()
        ub = comp.ub.copy()
        for j, val in fixes.items():
            lb[j] = val
            ub[j] = val
        act = set(active)
        while True:
            if time.monotonic() > deadline:
                raise _OutOfTime()
            act_list = sorted(act)
            if act_list:
                cols = sorted({int(cc) for ri in act_list
                               for cc in comp.rows[ri].cols})
                col_of = {j: t for t, j in enumerate(cols)}
                A = np.zeros((len(act_list), len(cols)))
                b = np.zeros(len(act_list))
                rel = []
                for t, ri in enumerate(act_list):
                    row = comp.rows[ri]
                    for cc, co in zip(row.cols, row.coefs):
                        A[t, col_of[int(cc)]] += co
                    b[t] = row.rhs
                    rel.append(row.rel)
                res = solve_lp(A, rel, b, comp.c[cols], lb[cols], ub[cols],
                               start_at_upper=comp.start_upper[cols])
                lp_iters += res.iterations
                if res.status == "infeasible":
                    return None
                if res.status != "optimal":
                    raise RuntimeError(f"LP returned {res.status}")
                x = _bounds_solution(comp.c, lb, ub, comp.start_upper)
                x[cols] = res.x
            else:
                x = _bounds_solution(comp.c, lb, ub, comp.start_upper)
            viol = comp.violations(x, 1e-7)
            new = [ri for ri in np.nonzero(viol)[0] if ri not in act]
            if not new:
                return float(np.dot(comp.c, x)), x, tuple(act_list)
            act.update(int(ri) for ri in new)

    def try_incumbent(x: np.ndarray):
        """Round an integral relaxation point into a candidate solution."""
        xi = x.copy()
        xi[comp.bin_idx] = np.round(xi[comp.bin_idx])
        for row in comp.rows:
            if row.slack_col >= 0:
                lhs = float(xi[row.bin_cols] @ row.bin_coefs)
                cap = comp.ub[row.slack_col]
                s = _row_slack(row, lhs, cap, 1e-6)
                if s is None:
                    return None
                xi[row.slack_col] = s
        # Hard rows must hold at the rounded point.
        for ri, row in enumerate(comp.rows):
            if row.slack_col >= 0:
                continue
            lhs = float(xi[row.cols] @ row.coefs)
            tol = 1e-6 * (1.0 + float(np.abs(row.coefs).sum()))
            if row.rel == LE and lhs > row.rhs + tol:
                return None
            if row.rel == GE and lhs < row.rhs - tol:
                return None
            if row.rel == EQ and abs(lhs - row.rhs) > tol:
                return None
        return float(np.dot(comp.c, xi)), xi

    incumbent_obj = -np.inf
    incumbent_x: np.ndarray | None = None
    incumbent_key: tuple[int, tuple[float, ...]] | None = None
    seen_infeasible = False
    timed_out = False
    dangling_bound = -np.inf   # bound of a node interrupted mid-solve

    seq = 0
    heap: list[tuple[float, int, dict[int, float], tuple[int, ...]]] = []
    # Root enters with an infinite optimistic bound.
    heapq.heappush(heap, (-np.inf, seq, {}, ()))

    while heap:
        if time.monotonic() > deadline:
            timed_out = True
            break
        neg_bound, _, fixes, active = heapq.heappop(heap)
        nodes += 1
        parent_bound = -neg_bound
        if parent_bound <= incumbent_obj + 1e-9:
            continue
        try:
            out = node_relaxation(fixes, active)
        except _OutOfTime:
            timed_out = True
            dangling_bound = max(dangling_bound, parent_bound)
            break
        if out is None:
            seen_infeasible = True
            continue
        bound, x, active2 = out
        if bound <= incumbent_obj + 1e-9:
            continue
        xb = x[comp.bin_idx]
        frac = np.abs(xb - np.round(xb))
        if frac.size == 0 or frac.max() <= 1e-6:
            cand = try_incumbent(x)
            if cand is not None:
                obj, xi = cand
                key = (int(xi[comp.edge_cols].sum()) if len(comp.edge_cols)
                       else 0,
                       tuple(xi[comp.bin_idx]))
                if (obj > incumbent_obj + 1e-12
                        or (abs(obj - incumbent_obj) <= 1e-12
                            and (incumbent_key is None
                                 or key < incumbent_key))):
                    incumbent_obj = obj
                    incumbent_x = xi
                    incumbent_key = key
            else:
                seen_infeasible = True
            continue
        # Branch on the most fractional free binary (smallest index on ties).
        scores = np.minimum(frac, 1.0 - frac)
        free = np.array([int(j) not in fixes for j in comp.bin_idx])
        scores = np.where(free & (frac > 1e-6), scores, -1.0)
        j = int(comp.bin_idx[int(np.argmax(scores))])
        for val in (1.0, 0.0):
            seq += 1
            child = dict(fixes)
            child[j] = val
            heapq.heappush(heap, (-bound, seq, child, active2))

    wall = time.monotonic() - t0
    if timed_out:
        best_bound = max([incumbent_obj, dangling_bound]
                         + [-nb for nb, *_ in heap])
        objective = incumbent_obj if incumbent_x is not None else None
        assignment = (_to_assignment(comp, incumbent_x)
                      if incumbent_x is not None else None)
        gap = (best_bound - incumbent_obj) if incumbent_x is not None \
            else np.inf
        return SolveResult(STATUS_TIME_LIMIT, objective, assignment,
                           bound=float(best_bound), gap=float(gap),
                           nodes=nodes, wall_time=wall,
                           lp_iterations=lp_iters)
    if incumbent_x is None:
        return SolveResult(STATUS_INFEASIBLE, None, None, nodes=nodes,
                           wall_time=wall, lp_iterations=lp_iters)
    return SolveResult(STATUS_OPTIMAL, float(incumbent_obj),
                       _to_assignment(comp, incumbent_x),
                       bound=float(incumbent_obj), gap=0.0, nodes=nodes,
                       wall_time=wall, lp_iterations=lp_iters)


def _bounds_solution(c: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                     start_upper: np.ndarray) -> np.ndarray:
    """Optimum of the completely unconstrained (bounds-only) problem."""
    x = np.where(c > 0, ub, lb)
    # Zero-coefficient variables sit at their default position.
    zero = c == 0
    x[zero] = np.where(start_upper[zero], ub[zero], lb[zero])
    return x.astype(float)


def _to_assignment(comp: _Compiled, x: np.ndarray) -> dict[VarRef, float]:
    return {ref: float(x[i]) for i, ref in enumerate(comp.refs)}


# ---------------------------------------------------------------------------
# Feasibility checking.


def check_feasible(p: BinaryProgram, assignment: dict[VarRef, float],
                   tol: float = 1e-6,
                   families: set[str] | None = None) -> FeasibilityReport:
    """Check an assignment against the program's constraints.

    All program variables must be present in the assignment; restrict the
    check to specific constraint families via `families`.
    """
    missing = [v.ref.name for v in p.variables if v.ref not in assignment]
    if missing:
        raise MissingVariableError(
            f"assignment is missing variables: {', '.join(sorted(missing))}")
    report = FeasibilityReport()
    for i, con in enumerate(p.constraints):
        if families is not None and con.family not in families:
            continue
        lhs = sum(assignment[ref] * coef for coef, ref in con.terms)
        if con.relation == LE:
            amount = lhs - con.rhs
        elif con.relation == GE:
            amount = con.rhs - lhs
        else:
            amount = abs(lhs - con.rhs)
        if amount > tol:
            report.violations.append(
                Violation(i, con.family, con.relation, float(lhs),
                          float(con.rhs), float(amount)))
    return report
