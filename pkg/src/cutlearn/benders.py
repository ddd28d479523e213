"""Benders decomposition for two-stage problems with complete recourse.

Each iteration solves the relaxed master (a binary MIP over first-stage
variables plus one recourse-value variable per scenario), prices every
scenario subproblem at the master solution, and adds optimality cuts
theta_w >= rhs - g @ x built from the subproblem duals.  The lower bound
is the master objective, the upper bound the best probability-weighted
recourse evaluation seen so far, and the loop stops when the relative gap
closes or a limit is hit.

The cut-selection hook is what the learning-enhanced variant overrides;
the classic method accepts every violated cut.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .solver_core import (
    GE, INFEASIBLE, OPTIMAL, UNBOUNDED,
    InputError, LpInstance, MipInstance, SolverError,
    solve_lp, solve_mip,
)

VIOLATION_TOL = 1e-6
DUPLICATE_TOL = 1e-9

STATUS_CONVERGED = "converged"
STATUS_ITERATION_LIMIT = "iteration_limit"
STATUS_TIME_LIMIT = "time_limit"
STATUS_STALLED = "stalled"

LOG_COLUMNS = ("iteration", "lb", "ub", "gap_pct", "cuts_added", "cuts_total",
               "rmp_time_s", "cum_rmp_time_s", "sp_time_s", "cum_sp_time_s")


@dataclass
class CutObservation:
    """Features of a candidate cut: its violation at the current master
    solution and how many cuts its scenario produced before it."""

    violation: float
    scenario_cut_count: int

    def as_vector(self):
        return np.array([self.violation, float(self.scenario_cut_count)])


@dataclass
class Cut:
    scenario: int
    dual: np.ndarray
    coeffs: np.ndarray     # g = T^T pi
    rhs: float             # h @ pi
    observation: CutObservation | None = None
    born_iteration: int = 0


@dataclass
class IterationRecord:
    iteration: int
    lb: float
    ub: float
    gap_pct: float
    cuts_added: int
    cuts_total: int
    rmp_time_s: float
    cum_rmp_time_s: float
    sp_time_s: float
    cum_sp_time_s: float
    delta_value: float | None = None
    retrain_count: int | None = None
    cuts_violated: int = 0      # informational; not part of the CSV schema

    def as_row(self, learned=False):
        row = [self.iteration, repr(self.lb), repr(self.ub), repr(self.gap_pct),
               self.cuts_added, self.cuts_total,
               f"{self.rmp_time_s:.6f}", f"{self.cum_rmp_time_s:.6f}",
               f"{self.sp_time_s:.6f}", f"{self.cum_sp_time_s:.6f}"]
        if learned:
            row += ["" if self.delta_value is None else repr(self.delta_value),
                    0 if self.retrain_count is None else self.retrain_count]
        return row


@dataclass
class BendersState:
    """Mutable per-run state: cut pools, counters, bounds, and the log."""

    n_scenarios: int
    pools: list = None
    cut_counts: np.ndarray = None
    iteration: int = 0
    lb: float = -math.inf
    ub: float = math.inf
    incumbent_x: np.ndarray | None = None
    incumbent_theta: np.ndarray | None = None
    best_x: np.ndarray | None = None
    log: list = field(default_factory=list)

    def __post_init__(self):
        if self.pools is None:
            self.pools = [[] for _ in range(self.n_scenarios)]
        if self.cut_counts is None:
            self.cut_counts = np.zeros(self.n_scenarios, dtype=int)

    @property
    def cuts_total(self):
        return int(sum(len(p) for p in self.pools))

    def add_cut(self, cut: Cut) -> bool:
        """Append unless an identical cut (coefficients and rhs within
        1e-9) is already pooled for the scenario."""
        for other in self.pools[cut.scenario]:
            if (abs(other.rhs - cut.rhs) <= DUPLICATE_TOL
                    and np.all(np.abs(other.coeffs - cut.coeffs) <= DUPLICATE_TOL)):
                return False
        self.pools[cut.scenario].append(cut)
        self.cut_counts[cut.scenario] += 1
        return True


@dataclass
class BendersResult:
    status: str
    objective: float          # best feasible value (the final upper bound)
    x: np.ndarray | None
    lb: float
    ub: float
    gap_pct: float
    iterations: int
    cuts_total: int
    state: BendersState


def compute_gap(ub, lb):
    """Relative optimality gap in percent, guarding tiny lower bounds."""
    if abs(lb) < 1e-9:
        if ub - lb < 1e-9:
            return 0.0
        return math.inf
    return 100.0 * (ub - lb) / abs(lb)


def build_rmp(problem, state: BendersState) -> MipInstance:
    """Master MIP: first-stage binaries plus one recourse variable per
    scenario, constrained by the pooled cuts."""
    n1 = problem.n_binary
    ns = problem.n_scenarios
    probs = problem.probabilities
    objective = np.concatenate([problem.first_stage_costs, probs])
    rows = []
    for w, pool in enumerate(state.pools):
        for cut in pool:
            coeffs = np.zeros(n1 + ns)
            coeffs[:n1] = cut.coeffs
            coeffs[n1 + w] = 1.0
            rows.append((coeffs, GE, cut.rhs))
    bounds = ([(0.0, 1.0)] * n1
              + [(float(lbw), None) for lbw in problem.theta_lower_bounds])
    lp = LpInstance(objective, rows, bounds)
    return MipInstance(lp, list(range(n1)))


# masters with at most this many binaries are solved by exact vectorized
# enumeration (theta collapses to the max over pooled cut values at any
# fixed binary x); larger ones go through branch and bound
ENUMERATION_LIMIT = 18
_ENUM_FLOAT_BUDGET = 16_000_000  # cap on cached per-code theta values


def _enumeration_applies(problem):
    n = problem.n_binary
    return (n <= ENUMERATION_LIMIT
            and (1 << n) * max(problem.n_scenarios, n) <= _ENUM_FLOAT_BUDGET)


def _enumerate_rmp(problem, state: BendersState):
    """Exact master optimum by sweeping all binary first-stage vectors.

    For fixed x the optimal recourse variables are
    theta_w = max(lower bound, max over pooled cuts of rhs - g @ x),
    so the master reduces to arithmetic over the 2^n codes.  Cut pools
    only grow during a run, so the per-code theta values are cached on
    the state and updated with the cuts added since the previous solve.
    Ties resolve to the lowest binary code.
    """
    n = problem.n_binary
    total = 1 << n
    bit = np.arange(n, dtype=np.int64)
    lbs = problem.theta_lower_bounds
    cache = getattr(state, "_enum_cache", None)
    if cache is None or cache["seen"] is None or len(cache["seen"]) != state.n_scenarios:
        codes = np.arange(total, dtype=np.int64)
        X = ((codes[:, None] >> bit[None, :]) & 1).astype(float)
        cache = {
            "X": X,
            "first_stage": X @ problem.first_stage_costs,
            "theta": np.broadcast_to(lbs, (total, lbs.size)).copy(),
            "seen": [0] * state.n_scenarios,
        }
        state._enum_cache = cache
    X = cache["X"]
    theta = cache["theta"]
    for w, pool in enumerate(state.pools):
        for cut in pool[cache["seen"][w]:]:
            np.maximum(theta[:, w], cut.rhs - X @ cut.coeffs, out=theta[:, w])
        cache["seen"][w] = len(pool)
    obj = cache["first_stage"] + theta @ problem.probabilities
    best = int(np.argmin(obj))
    x_hat = ((best >> bit) & 1).astype(float)
    return x_hat, theta[best].copy(), float(obj[best])


def solve_rmp(problem, state: BendersState):
    """Solve the master; returns (x_hat, theta_hat, z_hat) and raises the
    lower bound.  Infeasibility means the first-stage model itself is
    inconsistent, which is a construction bug, not a data condition."""
    if _enumeration_applies(problem):
        x_hat, theta_hat, objective = _enumerate_rmp(problem, state)
    else:
        sol = solve_mip(build_rmp(problem, state))
        if sol.status != OPTIMAL:
            raise SolverError("master problem infeasible: inconsistent first-stage model")
        n1 = problem.n_binary
        x_hat = sol.x[:n1].copy()
        theta_hat = sol.x[n1:].copy()
        objective = sol.objective
    state.lb = max(state.lb, objective)
    state.incumbent_x = x_hat
    state.incumbent_theta = theta_hat
    return x_hat, theta_hat, objective


def solve_subproblem(problem, scenario, x_hat):
    """Recourse LP for one scenario at the current first stage; returns
    the row duals and the recourse value (equal primal and dual value by
    strong duality)."""
    sol = solve_lp(problem.recourse_lp(scenario, x_hat))
    if sol.status == INFEASIBLE:
        raise SolverError(
            f"recourse LP infeasible for scenario {scenario}: "
            "complete recourse is violated")
    if sol.status == UNBOUNDED:
        raise SolverError(f"recourse LP unbounded for scenario {scenario}")
    return sol.duals, sol.objective


def make_cut(pi, scenario, problem, observation=None, iteration=0) -> Cut:
    s = problem.scenarios[scenario]
    return Cut(scenario=scenario, dual=np.asarray(pi, dtype=float),
               coeffs=s.T.T @ pi, rhs=float(s.h @ pi),
               observation=observation, born_iteration=iteration)


def violation(cut: Cut, x_hat, theta_hat):
    """VL: by how much the cut is violated at (x_hat, theta_hat)."""
    return float(cut.rhs - cut.coeffs @ x_hat - theta_hat[cut.scenario])


def select_all_violated(candidates, state):
    """Classic rule: every violated cut enters the master."""
    return list(candidates)


def run_decomposition(problem, tolerance_pct, select_cuts=select_all_violated,
                      max_iterations=10000, time_limit_s=None,
                      log_extras=None) -> BendersResult:
    """Shared engine for the classic and the learning-enhanced methods.

    select_cuts(candidates, state) picks the subset of violated cuts to
    add; candidates is a list of Cut objects carrying observations.
    log_extras(state) may return (delta_value, retrain_count) per
    iteration for the learning-enhanced log schema.
    """
    if tolerance_pct <= 0:
        raise InputError("tolerance must be positive")
    state = BendersState(n_scenarios=problem.n_scenarios)
    probs = problem.probabilities
    cum_rmp = cum_sp = 0.0
    status = STATUS_ITERATION_LIMIT
    for t in range(max_iterations):
        state.iteration = t
        t0 = time.perf_counter()
        x_hat, theta_hat, _ = solve_rmp(problem, state)
        rmp_time = time.perf_counter() - t0
        cum_rmp += rmp_time

        t0 = time.perf_counter()
        duals = []
        values = np.empty(problem.n_scenarios)
        for w in range(problem.n_scenarios):
            pi, zeta = solve_subproblem(problem, w, x_hat)
            duals.append(pi)
            values[w] = zeta
        sp_time = time.perf_counter() - t0
        cum_sp += sp_time

        upper = float(problem.first_stage_costs @ x_hat + probs @ values)
        if upper < state.ub:
            state.ub = upper
            state.best_x = x_hat.copy()

        nc_before = state.cut_counts.copy()
        candidates = []
        for w in range(problem.n_scenarios):
            vl = values[w] - theta_hat[w]
            if vl > VIOLATION_TOL:
                obs = CutObservation(vl, int(nc_before[w]))
                candidates.append(make_cut(duals[w], w, problem, obs, t))
        chosen = select_cuts(candidates, state) if candidates else []
        added = 0
        for cut in chosen:
            if state.add_cut(cut):
                added += 1

        gap = compute_gap(state.ub, state.lb)
        extras = log_extras(state) if log_extras else (None, None)
        state.log.append(IterationRecord(
            iteration=t, lb=state.lb, ub=state.ub, gap_pct=gap,
            cuts_added=added, cuts_total=state.cuts_total,
            rmp_time_s=rmp_time, cum_rmp_time_s=cum_rmp,
            sp_time_s=sp_time, cum_sp_time_s=cum_sp,
            delta_value=extras[0], retrain_count=extras[1],
            cuts_violated=len(candidates)))

        if gap <= tolerance_pct:
            status = STATUS_CONVERGED
            break
        if time_limit_s is not None and cum_rmp + cum_sp >= time_limit_s:
            status = STATUS_TIME_LIMIT
            break
        if added == 0:
            # no cut can move the master, so the bounds are final
            status = STATUS_STALLED if gap > tolerance_pct else STATUS_CONVERGED
            break
    gap = compute_gap(state.ub, state.lb)
    return BendersResult(status=status, objective=state.ub, x=state.best_x,
                         lb=state.lb, ub=state.ub, gap_pct=gap,
                         iterations=len(state.log), cuts_total=state.cuts_total,
                         state=state)


def run_classic_bd(problem, tolerance_pct, max_iterations=10000,
                   time_limit_s=None) -> BendersResult:
    """Classic multi-cut Benders: add every violated cut each iteration."""
    return run_decomposition(problem, tolerance_pct,
                             select_cuts=select_all_violated,
                             max_iterations=max_iterations,
                             time_limit_s=time_limit_s)


def write_log_csv(records, fh, learned=False):
    import csv

    writer = csv.writer(fh)
    header = list(LOG_COLUMNS)
    if learned:
        header += ["delta_value", "retrain_count"]
    writer.writerow(header)
    for rec in records:
        writer.writerow(rec.as_row(learned=learned))
