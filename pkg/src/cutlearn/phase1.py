"""Offline cut sampling on a training problem.

A sampling path starts from the cut-free master and repeatedly: solves the
master, draws scenarios (without replacement) until one produces a violated
cut, records the cut's violation and its scenario's prior cut count, adds
that single cut, re-solves the master, and records how much the master
objective moved.  Raw rows are kept unlabeled so any threshold can label
them later: a row is valuable (+1) when its objective change is at least
the threshold times the next row's change; the last row of a path is
always valuable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .benders import (
    VIOLATION_TOL, BendersState, CutObservation,
    build_rmp, make_cut, solve_rmp, solve_subproblem,
)
from .solver_core import OPTIMAL, InputError, SolverError, solve_lp

DEFAULT_NUM_PATHS = 2
_RATIO_EPS = 1e-12


def default_path_length(problem):
    """Twice the scenario count, the working default for path length."""
    return 2 * problem.n_scenarios


@dataclass
class TrainingRow:
    path: int
    step: int
    violation: float          # VL of the sampled cut
    scenario_cut_count: int   # cuts its scenario had produced before it
    objective_delta: float    # PI: |master objective change| from adding it

    @property
    def observation(self):
        return CutObservation(self.violation, self.scenario_cut_count)


@dataclass
class LabeledRow:
    features: CutObservation
    label: int               # -1 or 1
    delta: float


@dataclass
class RowStore:
    """Raw sampled rows plus provenance; labels are derived on demand."""

    rows: list
    n_paths: int
    path_length: int
    seed: int | None = None
    truncated_paths: set = field(default_factory=set)

    def path_rows(self, k):
        return [r for r in self.rows if r.path == k]

    def to_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(["path", "step", "vl", "nc", "pi", "truncated"])
        for r in self.rows:
            writer.writerow([r.path, r.step, repr(float(r.violation)),
                             r.scenario_cut_count, repr(float(r.objective_delta)),
                             int(r.path in self.truncated_paths)])

    @classmethod
    def from_csv(cls, fh):
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "step", "vl", "nc", "pi", "truncated"]:
            raise InputError("unrecognized row-store CSV header")
        rows = []
        truncated = set()
        for rec in reader:
            if not rec:
                continue
            path, step = int(rec[0]), int(rec[1])
            rows.append(TrainingRow(path, step, float(rec[2]), int(rec[3]),
                                    float(rec[4])))
            if int(rec[5]):
                truncated.add(path)
        n_paths = 1 + max((r.path for r in rows), default=-1)
        length = max((r.step for r in rows), default=-1) + 1
        return cls(rows, n_paths, length, truncated_paths=truncated)


def _master_solver(problem, relax_masters):
    if not relax_masters:
        return lambda state: solve_rmp(problem, state)

    def relaxed(state):
        sol = solve_lp(build_rmp(problem, state).lp)
        if sol.status != OPTIMAL:
            raise SolverError("relaxed master did not solve")
        n1 = problem.n_binary
        return sol.x[:n1], sol.x[n1:], sol.objective

    return relaxed


def sample_cut_path(training, n_steps, seed, path_index=0, relax_masters=False):
    """One sampling path of up to n_steps rows.

    Returns (rows, truncated); truncated means some step exhausted every
    scenario without finding a violated cut, i.e. the training problem was
    solved before the path completed.
    """
    if n_steps < 0:
        raise InputError("path length must be nonnegative")
    rng = np.random.default_rng(seed)
    state = BendersState(n_scenarios=training.n_scenarios)
    solve_master = _master_solver(training, relax_masters)
    x_hat, theta_hat, z_hat = solve_master(state)
    rows = []
    for step in range(n_steps):
        order = rng.permutation(training.n_scenarios)
        hit = None
        for w in order:
            pi, zeta = solve_subproblem(training, int(w), x_hat)
            vl = zeta - theta_hat[int(w)]
            if vl > VIOLATION_TOL:
                hit = (int(w), pi, vl)
                break
        if hit is None:
            return rows, True
        w, pi, vl = hit
        nc = len(state.pools[w])
        state.add_cut(make_cut(pi, w, training, CutObservation(vl, nc), step))
        x_hat, theta_hat, z_new = solve_master(state)
        rows.append(TrainingRow(path_index, step, float(vl), nc,
                                float(abs(z_new - z_hat))))
        z_hat = z_new
    return rows, False


def run_phase1(training, n_paths=DEFAULT_NUM_PATHS, path_length=None, seed=0,
               relax_masters=False) -> RowStore:
    """Sample n_paths independent paths with seeds derived from one root
    seed; raw rows are returned so labels can be recomputed per threshold."""
    if n_paths < 1:
        raise InputError("need at least one sampling path")
    if path_length is None:
        path_length = default_path_length(training)
    if path_length < 1:
        raise InputError("path length must be positive")
    root = (seed if isinstance(seed, np.random.SeedSequence)
            else np.random.SeedSequence(seed))
    child_seeds = root.spawn(n_paths)
    store = RowStore(rows=[], n_paths=n_paths, path_length=path_length, seed=seed)
    for k in range(n_paths):
        rows, truncated = sample_cut_path(training, path_length, child_seeds[k],
                                          path_index=k,
                                          relax_masters=relax_masters)
        store.rows.extend(rows)
        if truncated:
            store.truncated_paths.add(k)
    return store


def transform_labels(rows, delta):
    """Label each row: +1 at the end of its path, otherwise -1 exactly when
    its objective change is below delta times the next row's change.

    Zero denominators: a positive change followed by a (numerically) zero
    one counts as an infinite ratio (+1); two zero changes in a row mean no
    improvement (-1).
    """
    if not 0.0 <= delta <= 2.0:
        raise InputError("delta must lie in [0, 2]")
    by_path = {}
    for row in rows:
        by_path.setdefault(row.path, []).append(row)
    labeled = []
    for path in sorted(by_path):
        seq = sorted(by_path[path], key=lambda r: r.step)
        for i, row in enumerate(seq):
            if i == len(seq) - 1:
                label = 1
            else:
                pi_n = row.objective_delta
                pi_next = seq[i + 1].objective_delta
                if pi_next < _RATIO_EPS:
                    label = 1 if pi_n >= _RATIO_EPS else -1
                else:
                    label = -1 if pi_n / pi_next < delta else 1
            labeled.append(LabeledRow(row.observation, label, delta))
    return labeled
