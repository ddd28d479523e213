"""Self-contained dense LP and binary-MIP solvers.

The LP solver is a two-phase primal simplex on the revised (explicit
basis-inverse) form.  It returns row duals and reduced costs, so strong
duality and complementary slackness can be checked by callers.  The MIP
solver is a best-bound branch-and-bound over binary variables, re-solving
the LP relaxation from scratch at every node.

Pivot rules are fixed so that identical inputs always produce identical
solutions: Dantzig pricing with lowest-index ties, switching to Bland's
rule after 2*(rows+cols) consecutive degenerate pivots.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

# Solution statuses.
OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

# Row relations.
LE = "<="
EQ = "="
GE = ">="

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-9   # reduced-cost threshold for entering columns
INTEGRALITY_TOL = 1e-6
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64

_INF = math.inf


class InputError(ValueError):
    """Malformed problem data (dimension mismatch, bad bounds, ...)."""


class SolverError(RuntimeError):
    """The solver could not complete (numerical breakdown, unbounded MIP relaxation)."""


def _as_float_vector(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    return arr


@dataclass
class LpInstance:
    """min objective @ x  s.t.  rows, per-variable bounds.

    rows is a list of (coefficients, relation, rhs) with relation one of
    "<=", "=", ">=".  bounds is a list of (lower, upper) pairs where None
    means unbounded on that side; default is x >= 0.
    """

    objective: np.ndarray
    row_coeffs: np.ndarray      # (m, n)
    row_relations: list
    row_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, objective, rows=(), bounds=None):
        self.objective = _as_float_vector(objective, "objective")
        n = self.objective.size
        coeffs, relations, rhs = [], [], []
        for k, row in enumerate(rows):
            try:
                a, rel, b = row
            except (TypeError, ValueError):
                raise InputError(f"row {k} is not a (coeffs, relation, rhs) triple")
            a = _as_float_vector(a, f"row {k} coefficients")
            if a.size != n:
                raise InputError(
                    f"row {k} has {a.size} coefficients, expected {n}")
            if rel not in (LE, EQ, GE):
                raise InputError(f"row {k} relation {rel!r} not one of <=, =, >=")
            coeffs.append(a)
            relations.append(rel)
            rhs.append(float(b))
        self.row_coeffs = (np.vstack(coeffs) if coeffs
                           else np.zeros((0, n)))
        self.row_relations = relations
        self.row_rhs = np.asarray(rhs, dtype=float)
        if bounds is None:
            bounds = [(0.0, None)] * n
        if len(bounds) != n:
            raise InputError(f"{len(bounds)} bounds for {n} variables")
        lo = np.empty(n)
        hi = np.empty(n)
        for j, (a, b) in enumerate(bounds):
            lo[j] = -_INF if a is None else float(a)
            hi[j] = _INF if b is None else float(b)
            if lo[j] > hi[j] + 1e-12:
                raise InputError(f"variable {j}: lower bound {lo[j]} > upper bound {hi[j]}")
        self.lower = lo
        self.upper = hi
        if not np.all(np.isfinite(self.row_coeffs)):
            raise InputError("non-finite row coefficient")
        if not np.all(np.isfinite(self.objective)):
            raise InputError("non-finite objective coefficient")

    @property
    def n_vars(self):
        return self.objective.size

    @property
    def n_rows(self):
        return self.row_rhs.size


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    objective: float

    def dual_objective(self, lp: LpInstance) -> float:
        """duals @ rhs plus the bound-dual contribution of the reduced costs."""
        if self.status != OPTIMAL:
            raise SolverError("dual objective only defined for optimal solutions")
        total = float(self.duals @ lp.row_rhs)
        for j in range(lp.n_vars):
            r = self.reduced_costs[j]
            if lp.lower[j] == lp.upper[j]:
                total += r * lp.lower[j]
            elif r > OPTIMALITY_TOL:
                total += r * lp.lower[j]
            elif r < -OPTIMALITY_TOL:
                total += r * lp.upper[j]
        return total


@dataclass
class MipInstance:
    """An LpInstance plus the index set of binary variables."""

    lp: LpInstance
    binary_indices: list

    def __init__(self, lp, binary_indices):
        self.lp = lp
        idx = sorted(int(j) for j in binary_indices)
        for j in idx:
            if not 0 <= j < lp.n_vars:
                raise InputError(f"binary index {j} out of range")
            if lp.lower[j] < -1e-12 or lp.upper[j] > 1 + 1e-12:
                raise InputError(f"binary variable {j} must carry bounds [0, 1]")
        self.binary_indices = idx


@dataclass
class MipSolution:
    status: str
    x: np.ndarray | None
    objective: float


# ---------------------------------------------------------------------------
# standard-form conversion
# ---------------------------------------------------------------------------

class _Standardized:
    """min c z, A z = b, z >= 0, with bookkeeping to map back to the input.

    Variable handling at build time: finite lower bounds are shifted out,
    upper bounds become explicit rows, free variables are split, and
    variables with lower == upper are substituted away.
    """

    def __init__(self, lp: LpInstance):
        n = lp.n_vars
        m_in = lp.n_rows
        A_in = lp.row_coeffs
        lo_all, hi_all = lp.lower, lp.upper
        has_lo = lo_all > -_INF
        has_hi = hi_all < _INF
        fixed = has_lo & has_hi & (hi_all - lo_all <= 1e-12)
        shifted = has_lo & ~fixed
        mirrored = ~has_lo & has_hi
        free = ~has_lo & ~has_hi
        # offsets absorb finite bounds into the rhs: x = lo + z (shifted),
        # x = hi - z (mirrored, column negated), x = lo (fixed)
        offset = np.zeros(n)
        offset[shifted | fixed] = lo_all[shifted | fixed]
        offset[mirrored] = hi_all[mirrored]
        const = float(lp.objective @ offset)
        keep = ~fixed
        keep_idx = np.nonzero(keep)[0]
        col_of = -np.ones(n, dtype=int)
        col_of[keep_idx] = np.arange(keep_idx.size)
        sign = np.where(mirrored[keep_idx], -1.0, 1.0)
        base_cols = A_in[:, keep_idx] * sign[None, :] if m_in else np.zeros((0, keep_idx.size))
        base_cost = lp.objective[keep_idx] * sign
        free_idx = np.nonzero(free)[0]
        if free_idx.size:
            neg_cols = -A_in[:, free_idx] if m_in else np.zeros((0, free_idx.size))
            base_cols = np.hstack([base_cols, neg_cols])
            base_cost = np.concatenate([base_cost, -lp.objective[free_idx]])
        # per input variable: ("shift", col, lo) | ("mirror", col, hi) |
        # ("free", col_pos, col_neg) | ("fixed", value)
        self.var_map = []
        n_keep = keep_idx.size
        for j in range(n):
            if fixed[j]:
                self.var_map.append(("fixed", lo_all[j]))
            elif shifted[j]:
                self.var_map.append(("shift", int(col_of[j]), lo_all[j]))
            elif mirrored[j]:
                self.var_map.append(("mirror", int(col_of[j]), hi_all[j]))
            else:
                extra = n_keep + int(np.searchsorted(free_idx, j))
                self.var_map.append(("free", int(col_of[j]), extra))
        bound_mask = shifted & has_hi
        bound_cols = col_of[np.nonzero(bound_mask)[0]]
        bound_ubs = (hi_all - lo_all)[bound_mask]
        n_struct = base_cols.shape[1]
        b_in = lp.row_rhs - A_in @ offset if m_in else np.zeros(0)
        relations = list(lp.row_relations) + [LE] * bound_cols.size
        m = m_in + bound_cols.size
        A = np.zeros((m, n_struct))
        A[:m_in, :] = base_cols
        b = np.concatenate([b_in, bound_ubs])
        A[m_in + np.arange(bound_cols.size), bound_cols] = 1.0
        col_cost = base_cost
        # equilibrate rows so pivot magnitudes are O(1) regardless of the
        # input's coefficient scale; duals are unscaled on the way out
        self.row_scale = np.maximum(1.0, np.abs(A).max(axis=1, initial=0.0))
        A /= self.row_scale[:, None]
        b = b / self.row_scale
        # normalize rhs >= 0, remembering flips for dual recovery
        self.row_sign = np.ones(m)
        for i in range(m):
            if b[i] < 0:
                A[i] *= -1.0
                b[i] = -b[i]
                self.row_sign[i] = -1.0
                if relations[i] == LE:
                    relations[i] = GE
                elif relations[i] == GE:
                    relations[i] = LE
        # slack / surplus columns
        slack_of_row = {}
        extra = []
        for i in range(m):
            if relations[i] == LE:
                slack_of_row[i] = n_struct + len(extra)
                extra.append((i, 1.0))
            elif relations[i] == GE:
                extra.append((i, -1.0))
        n_total = n_struct + len(extra)
        full = np.zeros((m, n_total))
        full[:, :n_struct] = A
        for k, (i, sgn) in enumerate(extra):
            full[i, n_struct + k] = sgn
        # column equilibration (row scaling leaves every |entry| <= 1, so
        # scales are >= 1); the solver works in scaled units throughout
        col_max = np.abs(full).max(axis=0, initial=0.0) if full.size else np.zeros(n_total)
        self.col_scale = np.where(col_max > 1e-12, 1.0 / np.maximum(col_max, 1e-12), 1.0)
        full *= self.col_scale
        self.A = full
        self.b = b
        self.cost = np.concatenate([np.asarray(col_cost, dtype=float),
                                    np.zeros(len(extra))]) * self.col_scale
        self.const = const
        self.m_in = m_in
        self.n_struct = n_struct
        self.slack_of_row = slack_of_row

    def crash_basis(self):
        """Initial basis: row slacks where available, otherwise singleton
        columns with a positive entry (zero-cost ones preferred), otherwise
        None (an artificial will be created)."""
        m = self.b.size
        basis = [None] * m
        for i, j in self.slack_of_row.items():
            basis[i] = j
        nz = np.abs(self.A) > 1e-12
        singleton = np.nonzero(nz.sum(axis=0) == 1)[0]
        # candidates per row, ordered zero-cost first then by column index
        per_row = {}
        for j in singleton:
            i = int(np.argmax(nz[:, j]))
            if self.A[i, j] > 1e-12:
                per_row.setdefault(i, []).append((abs(self.cost[j]) > 1e-15, j))
        used = set(self.slack_of_row.values())
        for i in range(m):
            if basis[i] is not None or i not in per_row:
                continue
            for _, j in sorted(per_row[i]):
                if j not in used:
                    basis[i] = int(j)
                    used.add(int(j))
                    break
        return basis

    def recover_x(self, z, lp: LpInstance):
        x = np.empty(lp.n_vars)
        for j, entry in enumerate(self.var_map):
            kind = entry[0]
            if kind == "fixed":
                x[j] = entry[1]
            elif kind == "shift":
                x[j] = entry[2] + z[entry[1]]
            elif kind == "mirror":
                x[j] = entry[2] - z[entry[1]]
            else:
                x[j] = z[entry[1]] - z[entry[2]]
        return x


class _Simplex:
    """Primal simplex with an explicit basis inverse on A z = b, z >= 0."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b.copy()
        self.m, self.n = A.shape
        self.basis = list(basis)
        self._factorize()

    def _factorize(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise SolverError("singular basis matrix")
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-11] = 0.0

    def duals(self, cost):
        cB = cost[self.basis]
        return cB @ self.Binv

    def objective(self, cost):
        return float(cost[self.basis] @ self.xB)

    def solution(self):
        z = np.zeros(self.n)
        z[self.basis] = np.maximum(self.xB, 0.0)
        return z

    def run(self, cost, allowed, max_iters=None):
        """Minimize cost over allowed entering columns.

        Returns "optimal" or "unbounded".  allowed is a boolean mask of
        columns permitted to enter the basis.
        """
        m, n = self.m, self.n
        if max_iters is None:
            max_iters = 50000 + 200 * (m + n)
        bland = False
        degenerate_run = 0
        bland_after = 2 * (m + n)
        since_refactor = 0
        in_basis = np.zeros(n, dtype=bool)
        in_basis[self.basis] = True
        # columns proven non-improving after refactorization (noise-level
        # reduced costs); cleared whenever a real pivot happens
        parked = np.zeros(n, dtype=bool)
        for _ in range(max_iters):
            y = cost[self.basis] @ self.Binv
            red = cost - y @ self.A
            cand = allowed & ~in_basis & ~parked & (red < -OPTIMALITY_TOL)
            if not cand.any():
                # recompute the inverse so the reported point carries no
                # accumulated rank-1 update drift
                self._factorize()
                return OPTIMAL
            idx = np.nonzero(cand)[0]
            if bland:
                e = int(idx[0])
            else:
                e = int(idx[np.argmin(red[idx])])
            d = self.Binv @ self.A[:, e]
            # prefer comfortably-sized pivots; fall back to tiny ones before
            # concluding the direction is unblocked
            scale = max(1.0, float(np.abs(d).max(initial=0.0)))
            pos = d > 1e-7 * scale
            if not pos.any():
                pos = d > 1e-10 * scale
            if not pos.any():
                # unblocked direction: confirm against a fresh inverse that
                # the reduced cost is not just accumulated rounding
                self._factorize()
                y = cost[self.basis] @ self.Binv
                red_e = cost[e] - y @ self.A[:, e]
                noise = 1e-7 * max(1.0, abs(cost[e]),
                                   float(np.abs(y) @ np.abs(self.A[:, e])))
                d = self.Binv @ self.A[:, e]
                scale = max(1.0, float(np.abs(d).max(initial=0.0)))
                pos = d > 1e-10 * scale
                if not pos.any():
                    if red_e < -noise:
                        return UNBOUNDED
                    parked[e] = True
                    continue
            ratios = np.full(m, np.inf)
            ratios[pos] = self.xB[pos] / d[pos]
            theta = ratios.min()
            tied = np.nonzero(ratios <= theta + 1e-9)[0]
            if bland:
                r = int(min(tied, key=lambda i: self.basis[i]))
            else:
                r = int(max(tied, key=lambda i: (d[i], -i)))
            # pivot: e enters, basis[r] leaves
            parked[:] = False
            leave = self.basis[r]
            in_basis[leave] = False
            in_basis[e] = True
            self.basis[r] = e
            piv_row = self.Binv[r] / d[r]
            self.Binv -= np.outer(d, piv_row)
            self.Binv[r] = piv_row
            step = theta if theta > 0 else 0.0
            self.xB -= step * d
            self.xB[r] = step
            self.xB[np.abs(self.xB) < 1e-11] = 0.0
            if theta <= 1e-12:
                degenerate_run += 1
                if degenerate_run > bland_after:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                self._factorize()
                since_refactor = 0
        raise SolverError("simplex iteration limit exceeded")


def solve_lp(lp: LpInstance) -> LpSolution:
    """Two-phase primal simplex.  Infeasible/unbounded come back as statuses."""
    std = _Standardized(lp)
    m = std.b.size
    if m == 0:
        # bounds-only problem: each variable sits at whichever finite bound
        # its cost prefers; unbounded if a favorable direction has no bound
        x = np.empty(lp.n_vars)
        for j in range(lp.n_vars):
            c = lp.objective[j]
            lo, hi = lp.lower[j], lp.upper[j]
            if c > 0:
                if lo <= -_INF:
                    return LpSolution(UNBOUNDED, None, None, None, -_INF)
                x[j] = lo
            elif c < 0:
                if hi >= _INF:
                    return LpSolution(UNBOUNDED, None, None, None, -_INF)
                x[j] = hi
            else:
                x[j] = min(max(0.0, lo), hi)
        return LpSolution(OPTIMAL, x, np.zeros(0), lp.objective.copy(),
                          float(lp.objective @ x))

    basis = std.crash_basis()
    need_art = [i for i in range(m) if basis[i] is None]
    A = std.A
    n_real = A.shape[1]
    if need_art:
        art_cols = np.zeros((m, len(need_art)))
        for k, i in enumerate(need_art):
            art_cols[i, k] = 1.0
            basis[i] = n_real + k
        A = np.hstack([A, art_cols])
    n_total = A.shape[1]
    sx = _Simplex(A, std.b, basis)

    dropped_rows = []
    if need_art:
        cost1 = np.zeros(n_total)
        cost1[n_real:] = 1.0
        allowed1 = np.ones(n_total, dtype=bool)
        status = sx.run(cost1, allowed1)
        if status != OPTIMAL or sx.objective(cost1) > FEASIBILITY_TOL:
            return LpSolution(INFEASIBLE, None, None, None, _INF)
        # drive remaining artificials out of the basis (or drop their rows)
        for r in range(m):
            if sx.basis[r] < n_real:
                continue
            row = sx.Binv[r] @ A[:, :n_real]
            pivots = np.nonzero(np.abs(row) > 1e-7)[0]
            pivots = [j for j in pivots if j not in sx.basis]
            if pivots:
                e = int(pivots[0])
                d = sx.Binv @ A[:, e]
                piv_row = sx.Binv[r] / d[r]
                sx.Binv -= np.outer(d, piv_row)
                sx.Binv[r] = piv_row
                theta = sx.xB[r] / d[r] if abs(sx.xB[r]) > 1e-11 else 0.0
                sx.xB -= theta * d
                sx.xB[r] = theta
                sx.basis[r] = e
            else:
                dropped_rows.append(r)
        if dropped_rows:
            keep = [i for i in range(m) if i not in set(dropped_rows)]
            A = A[keep][:, :n_real]
            sx = _Simplex(A, std.b[keep],
                          [sx.basis[i] for i in keep])
            n_total = n_real
            row_positions = keep
        else:
            row_positions = list(range(m))
    else:
        row_positions = list(range(m))

    cost2 = np.zeros(n_total)
    cost2[:n_real] = std.cost
    allowed2 = np.zeros(n_total, dtype=bool)
    allowed2[:n_real] = True
    status = sx.run(cost2, allowed2)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, None, None, -_INF)

    z = sx.solution()[:n_real] * std.col_scale[:n_real]
    x = std.recover_x(z, lp)
    # duals in input-row order; redundant rows dropped in phase 1 get dual 0
    y = sx.duals(cost2)
    duals_full = np.zeros(m)
    for pos, i in enumerate(row_positions):
        duals_full[i] = y[pos]
    duals_full *= std.row_sign / std.row_scale
    duals = duals_full[:std.m_in]
    reduced = lp.objective - duals @ lp.row_coeffs if std.m_in else lp.objective.copy()
    obj = float(lp.objective @ x)

    resid = _feasibility_residual(lp, x)
    if resid > FEASIBILITY_TOL * (1.0 + np.abs(lp.row_rhs).max(initial=0.0)):
        raise SolverError(f"simplex returned infeasible point (residual {resid:.3e})")
    return LpSolution(OPTIMAL, x, duals, reduced, obj)


def _feasibility_residual(lp, x):
    worst = 0.0
    if lp.n_rows:
        lhs = lp.row_coeffs @ x
        for i, rel in enumerate(lp.row_relations):
            if rel == LE:
                worst = max(worst, lhs[i] - lp.row_rhs[i])
            elif rel == GE:
                worst = max(worst, lp.row_rhs[i] - lhs[i])
            else:
                worst = max(worst, abs(lhs[i] - lp.row_rhs[i]))
    worst = max(worst, np.max(lp.lower - x, initial=0.0))
    worst = max(worst, np.max(x - lp.upper, initial=0.0))
    return worst


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------

def lp_from_arrays(objective, row_coeffs, row_relations, row_rhs, lower, upper):
    """LpInstance over pre-validated arrays, skipping per-row parsing.

    Callers own the consistency of the shapes; arrays are not copied.
    """
    lp = object.__new__(LpInstance)
    lp.objective = objective
    lp.row_coeffs = row_coeffs
    lp.row_relations = row_relations
    lp.row_rhs = row_rhs
    lp.lower = lower
    lp.upper = upper
    return lp


def _lp_with_bounds(lp, lower, upper):
    """Shallow LP clone with replaced bounds (rows and objective shared)."""
    return lp_from_arrays(lp.objective, lp.row_coeffs, lp.row_relations,
                          lp.row_rhs, lower, upper)


def _node_lp(mip, fixed):
    lp = mip.lp
    lower = lp.lower.copy()
    upper = lp.upper.copy()
    for j, v in fixed.items():
        lower[j] = upper[j] = float(v)
    return _lp_with_bounds(lp, lower, upper)


def _round_and_fix(mip, sol):
    """Deterministic incumbent attempt: snap the binaries of an LP point to
    the nearest integer, fix them, and re-solve for the continuous rest."""
    fixed = {j: float(round(sol.x[j])) for j in mip.binary_indices}
    trial = solve_lp(_node_lp(mip, fixed))
    if trial.status != OPTIMAL:
        return None, _INF
    x = trial.x.copy()
    for j in mip.binary_indices:
        x[j] = fixed[j]
    return x, trial.objective


def solve_mip(mip: MipInstance) -> MipSolution:
    """Best-bound branch and bound on the binary variables.

    Branches on the most fractional binary (ties to the lowest index).
    Children enter the queue carrying the parent's LP bound and are solved
    when popped.  A round-and-fix pass at the root seeds the incumbent.
    Raises SolverError if any node LP relaxation is unbounded.
    """
    binaries = mip.binary_indices
    root = solve_lp(_node_lp(mip, {}))
    if root.status == UNBOUNDED:
        raise SolverError("LP relaxation is unbounded")
    if root.status == INFEASIBLE:
        return MipSolution(INFEASIBLE, None, _INF)
    incumbent, inc_obj = (None, _INF) if not binaries else _round_and_fix(mip, root)
    heap = []
    seq = 0
    heapq.heappush(heap, (root.objective, seq, {}, root))
    seq += 1
    while heap:
        bound, _, fixed, sol = heapq.heappop(heap)
        if bound >= inc_obj - 1e-9:
            break  # best-bound order: nothing left can improve
        if sol is None:
            sol = solve_lp(_node_lp(mip, fixed))
            if sol.status == UNBOUNDED:
                raise SolverError("LP relaxation is unbounded")
            if sol.status == INFEASIBLE or sol.objective >= inc_obj - 1e-9:
                continue
        frac = np.array([min(sol.x[j], 1.0 - sol.x[j]) for j in binaries])
        if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
            x = sol.x.copy()
            for j in binaries:
                x[j] = round(x[j])
            if sol.objective < inc_obj - 1e-9:
                incumbent, inc_obj = x, sol.objective
            continue
        jb = binaries[int(np.argmax(frac))]
        # explore the branch agreeing with the LP point first
        first = int(round(sol.x[jb]))
        for v in (first, 1 - first):
            child_fixed = dict(fixed)
            child_fixed[jb] = v
            heapq.heappush(heap, (sol.objective, seq, child_fixed, None))
            seq += 1
    if incumbent is None:
        return MipSolution(INFEASIBLE, None, _INF)
    return MipSolution(OPTIMAL, incumbent, inc_obj)
