"""Bounded-variable primal simplex on a dense tableau.

Solves   max c.x   s.t.  A x {<=,=,>=} b,  lb <= x <= ub
with a revised two-phase simplex: logical variables turn rows into
equalities, artificials absorb rows that the starting point violates, and
Dantzig pricing falls back to Bland's rule when the objective stalls.
Problem sizes here are a few hundred rows and columns, so a dense basis
inverse is perfectly adequate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-10
STALL_EPS = 1e-13


class SimplexError(RuntimeError):
    """Internal simplex failure (iteration cap exceeded)."""


@dataclass
class LPResult:
    status: str            # "optimal" | "infeasible" | "unbounded"
    objective: float
    x: np.ndarray          # structural variable values
    iterations: int


def solve_lp(A: np.ndarray, rel: list[str], b: np.ndarray, c: np.ndarray,
             lb: np.ndarray, ub: np.ndarray,
             start_at_upper: np.ndarray | None = None,
             max_iter: int = 100_000) -> LPResult:
    """Maximize c.x over the polyhedron; see module docstring.

    start_at_upper optionally marks structural variables whose initial
    nonbasic position should be their upper bound (a warm-start hint that
    often makes the all-logical basis feasible and skips phase 1).
    """
    m, n = A.shape
    if m == 0:
        x = _bounds_optimum(c, lb, ub, start_at_upper)
        return LPResult("optimal", float(c @ x), x, 0)

    # Columns: structurals, then one logical per row, then artificials.
    logical_lb = np.zeros(m)
    logical_ub = np.zeros(m)
    for i, r in enumerate(rel):
        if r == "<=":
            logical_lb[i], logical_ub[i] = 0.0, np.inf
        elif r == ">=":
            logical_lb[i], logical_ub[i] = -np.inf, 0.0
        elif r == "=":
            logical_lb[i], logical_ub[i] = 0.0, 0.0
        else:
            raise ValueError(f"bad relation {r}")

    x0 = _initial_point(lb, ub, start_at_upper)
    s_needed = b - A @ x0

    art_rows: list[int] = []
    art_signs: list[float] = []
    logical_start = np.clip(s_needed, logical_lb, logical_ub)
    resid = s_needed - logical_start
    for i in range(m):
        if abs(resid[i]) > TOL:
            art_rows.append(i)
            art_signs.append(1.0 if resid[i] > 0 else -1.0)

    n_art = len(art_rows)
    N = n + m + n_art
    A_full = np.zeros((m, N))
    A_full[:, :n] = A
    A_full[np.arange(m), n + np.arange(m)] = 1.0
    for k, (i, s) in enumerate(zip(art_rows, art_signs)):
        A_full[i, n + m + k] = s

    lo = np.concatenate([lb, logical_lb, np.zeros(n_art)])
    hi = np.concatenate([ub, logical_ub, np.full(n_art, np.inf)])

    # Current values of all variables; basis starts as logicals except on
    # artificial rows.
    xval = np.concatenate([x0, logical_start, np.abs(np.array(resid))[art_rows]
                           if n_art else np.zeros(0)])
    basis = np.array([n + i for i in range(m)], dtype=int)
    for k, i in enumerate(art_rows):
        basis[i] = n + m + k
        # The displaced logical sits at the bound nearest its needed value.
        xval[n + i] = logical_start[i]

    state = _State(A_full, lo, hi, xval, basis, max_iter)

    iterations = 0
    if n_art:
        c1 = np.zeros(N)
        c1[n + m:] = -1.0
        it = state.run(c1)
        iterations += it
        phase1_obj = float(c1 @ state.xval)
        if phase1_obj < -1e-8:
            return LPResult("infeasible", -np.inf,
                            state.xval[:n].copy(), iterations)
        # Pin artificials to zero for phase 2.
        state.lo[n + m:] = 0.0
        state.hi[n + m:] = 0.0
        state.xval[n + m:] = 0.0

    c2 = np.zeros(N)
    c2[:n] = c
    try:
        it = state.run(c2)
    except _Unbounded:
        return LPResult("unbounded", np.inf, state.xval[:n].copy(),
                        iterations)
    iterations += it
    x = state.xval[:n].copy()
    return LPResult("optimal", float(c @ x), x, iterations)


def _initial_point(lb: np.ndarray, ub: np.ndarray,
                   start_at_upper: np.ndarray | None) -> np.ndarray:
    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    if start_at_upper is not None:
        x0 = np.where(start_at_upper & np.isfinite(ub), ub, x0)
    return x0.astype(float)


def _bounds_optimum(c: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                    start_at_upper: np.ndarray | None) -> np.ndarray:
    x = _initial_point(lb, ub, start_at_upper)
    better_up = (c > 0) & np.isfinite(ub)
    better_dn = (c < 0) & np.isfinite(lb)
    x = np.where(better_up, ub, x)
    x = np.where(better_dn, lb, x)
    return x


class _Unbounded(Exception):
    pass


class _State:
    """Mutable simplex state: values, basis, and dense basis inverse."""

    def __init__(self, A: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 xval: np.ndarray, basis: np.ndarray, max_iter: int):
        self.A = A
        self.lo = lo
        self.hi = hi
        self.xval = xval
        self.basis = basis
        self.max_iter = max_iter
        self.m, self.N = A.shape
        self._refactor()

    def _refactor(self) -> None:
        B = self.A[:, self.basis]
        self.B_inv = np.linalg.inv(B)

    def run(self, c: np.ndarray) -> int:
        """Pivot until optimal for objective c (maximize). Returns iterations."""
        m, N = self.m, self.N
        iters = 0
        pivots_since_refactor = 0
        stall = 0
        bland = False
        last_obj = float(c @ self.xval)
        in_basis = np.zeros(N, dtype=bool)
        in_basis[self.basis] = True

        while True:
            if iters >= self.max_iter:
                raise SimplexError("simplex iteration cap exceeded")
            y = c[self.basis] @ self.B_inv
            d = c - y @ self.A
            at_lb = np.abs(self.xval - self.lo) <= 1e-9
            at_ub = np.abs(self.xval - self.hi) <= 1e-9
            fixed = (self.hi - self.lo) <= TOL
            eligible_up = (~in_basis) & (~fixed) & at_lb & (d > 1e-9)
            eligible_dn = (~in_basis) & (~fixed) & at_ub & (d < -1e-9)
            eligible = eligible_up | eligible_dn
            if not eligible.any():
                return iters
            idxs = np.nonzero(eligible)[0]
            if bland:
                e = int(idxs[0])
            else:
                e = int(idxs[np.argmax(np.abs(d[idxs]))])
            delta = 1.0 if eligible_up[e] else -1.0

            w = self.B_inv @ self.A[:, e]
            # Max step before entering flips to its other bound.
            t_best = self.hi[e] - self.lo[e]
            leave = -1
            dw = delta * w
            for i in range(m):
                bi = self.basis[i]
                if dw[i] > TOL:
                    t = (self.xval[bi] - self.lo[bi]) / dw[i]
                elif dw[i] < -TOL:
                    t = (self.hi[bi] - self.xval[bi]) / (-dw[i])
                else:
                    continue
                if t < t_best - 1e-12:
                    t_best = t
                    leave = i
                elif leave >= 0 and abs(t - t_best) <= 1e-12 \
                        and bi < self.basis[leave]:
                    leave = i
            if not np.isfinite(t_best):
                raise _Unbounded()
            t_best = max(t_best, 0.0)

            self.xval[self.basis] -= t_best * dw
            self.xval[e] += delta * t_best
            if leave < 0:
                # Bound flip: entering moved to its opposite bound.
                pass
            else:
                lv = self.basis[leave]
                # Snap the leaving variable to the bound it reached.
                if dw[leave] > 0:
                    self.xval[lv] = self.lo[lv]
                else:
                    self.xval[lv] = self.hi[lv]
                in_basis[lv] = False
                in_basis[e] = True
                self.basis[leave] = e
                pivots_since_refactor += 1
                if pivots_since_refactor >= 64:
                    self._refactor()
                    pivots_since_refactor = 0
                else:
                    # Product-form update of the dense inverse.
                    piv = w[leave]
                    if abs(piv) < 1e-12:
                        self._refactor()
                        pivots_since_refactor = 0
                    else:
                        row = self.B_inv[leave] / piv
                        self.B_inv -= np.outer(w, row)
                        self.B_inv[leave] = row

            iters += 1
            obj = float(c @ self.xval)
            if obj > last_obj + STALL_EPS:
                stall = 0
                last_obj = obj
            else:
                stall += 1
                if stall > 4 * (m + self.N) + 32:
                    bland = True
        return iters
