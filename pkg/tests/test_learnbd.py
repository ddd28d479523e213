import numpy as np
import pytest

from cutlearn.benders import STATUS_CONVERGED, run_classic_bd
from cutlearn.learnbd import (
    ConstantClassifier, DeltaSchedule, run_learnbd,
)
from cutlearn.phase1 import run_phase1
from cutlearn.problems import (
    build_cflp, extensive_form, generate_cflp, sample_scenarios,
)
from cutlearn.solver_core import InputError, solve_mip


def small_problem(seed=0, n_scen=3):
    data = generate_cflp(3, 4, seed=seed, capacity=30.0,
                         setup_range=(5.0, 25.0), demand_range=(3.0, 10.0),
                         cost_range=(0.5, 4.0))
    scen = sample_scenarios(data.demands, 0.15, n_scen, seed=seed + 1)
    return build_cflp(data, scen)


def cut_signature(state):
    return [[(c.scenario, round(c.rhs, 9), tuple(np.round(c.coeffs, 9)))
             for c in pool] for pool in state.pools]


def test_delta_schedule_default_and_validation():
    sched = DeltaSchedule.default()
    assert sched.values[0] == 1.2
    assert sched.values[-1] == 0.7
    assert len(sched.values) == 51
    assert sched.current == 1.2
    sched.advance()
    assert sched.current == 1.19
    with pytest.raises(InputError):
        DeltaSchedule([1.0, 1.0])
    with pytest.raises(InputError):
        DeltaSchedule([])


def test_all_positive_stub_reproduces_classic_bd():
    for seed in range(3):
        problem = small_problem(seed=seed)
        bd = run_classic_bd(problem, tolerance_pct=1e-4)
        lbd = run_learnbd(problem, rows=[], tolerance_pct=1e-4,
                          classifier_factory=lambda d: ConstantClassifier(1))
        assert lbd.status == bd.status == STATUS_CONVERGED
        assert cut_signature(lbd.state) == cut_signature(bd.state)
        assert lbd.iterations == bd.iterations
        assert lbd.objective == pytest.approx(bd.objective, abs=1e-9)
        assert lbd.retrain_count == 0
        for a, b in zip(lbd.state.log, bd.state.log):
            assert a.lb == b.lb and a.ub == b.ub and a.cuts_added == b.cuts_added


def test_all_negative_stub_walks_schedule_then_falls_back():
    problem = small_problem(seed=5)
    sched = DeltaSchedule([1.2, 1.1, 1.0])
    lbd = run_learnbd(problem, rows=[], tolerance_pct=1e-4, schedule=sched,
                      classifier_factory=lambda d: ConstantClassifier(-1))
    assert lbd.status == STATUS_CONVERGED
    assert lbd.fallback_used
    assert lbd.retrain_count == 3
    oracle = solve_mip(extensive_form(problem))
    assert lbd.objective == pytest.approx(oracle.objective, rel=1e-6)
    # all rejecting thresholds burn through before any cut is added
    assert lbd.delta_trace[0][0] == "fallback"


def test_toy_problem_with_trained_classifier(toy_bd_problem):
    store = run_phase1(toy_bd_problem, n_paths=2, path_length=1, seed=3)
    lbd = run_learnbd(toy_bd_problem, store, tolerance_pct=0.01,
                      C=10.0, gamma=1.0)
    assert lbd.status == STATUS_CONVERGED
    assert lbd.objective == pytest.approx(1.0, abs=1e-6)


def test_learnbd_matches_bd_objective_with_real_classifier():
    problem = small_problem(seed=2, n_scen=4)
    store = run_phase1(problem, n_paths=2, path_length=6, seed=11)
    lbd = run_learnbd(problem, store, tolerance_pct=1e-4, C=10.0, gamma=1.0)
    bd = run_classic_bd(problem, tolerance_pct=1e-4)
    assert lbd.status == STATUS_CONVERGED
    assert lbd.objective == pytest.approx(bd.objective, rel=1e-6)
    oracle = solve_mip(extensive_form(problem))
    assert lbd.objective == pytest.approx(oracle.objective, rel=1e-6)


def test_added_cuts_subset_of_violations_and_bound_discipline():
    problem = small_problem(seed=7, n_scen=4)
    store = run_phase1(problem, n_paths=2, path_length=5, seed=4)
    lbd = run_learnbd(problem, store, tolerance_pct=1e-4, C=5.0, gamma=0.5)
    log = lbd.state.log
    for rec in log:
        assert 0 <= rec.cuts_added <= problem.n_scenarios
    lbs = [r.lb for r in log]
    ubs = [r.ub for r in log]
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(ubs, ubs[1:]))
    assert all(u >= l - 1e-6 for l, u in zip(lbs, ubs))


def test_delta_trace_nonincreasing_and_changes_only_on_rejection():
    problem = small_problem(seed=9, n_scen=3)
    store = run_phase1(problem, n_paths=2, path_length=5, seed=6)
    lbd = run_learnbd(problem, store, tolerance_pct=1e-4, C=1.0, gamma=1.0,
                      schedule=DeltaSchedule([1.2, 1.1, 1.0, 0.9, 0.8]))
    numeric = [v for v, _, _ in lbd.delta_trace if v != "fallback"]
    assert numeric == sorted(numeric, reverse=True)
    # per-iteration log retrain counts never decrease
    counts = [r.retrain_count for r in lbd.state.log]
    assert counts == sorted(counts)


def test_determinism_under_fixed_rows():
    problem = small_problem(seed=3, n_scen=3)
    store = run_phase1(problem, n_paths=2, path_length=4, seed=8)
    a = run_learnbd(problem, store, tolerance_pct=1e-4, C=2.0, gamma=0.8)
    b = run_learnbd(problem, store, tolerance_pct=1e-4, C=2.0, gamma=0.8)
    assert a.objective == b.objective
    assert a.iterations == b.iterations
    assert cut_signature(a.state) == cut_signature(b.state)
    assert a.delta_trace == b.delta_trace


def test_missing_rows_rejected():
    problem = small_problem()
    with pytest.raises(InputError, match="rows required"):
        run_learnbd(problem, rows=[], tolerance_pct=1e-4)


def test_log_carries_delta_and_retrain_columns():
    problem = small_problem(seed=4)
    store = run_phase1(problem, n_paths=2, path_length=4, seed=2)
    lbd = run_learnbd(problem, store, tolerance_pct=1e-4, C=1.0, gamma=1.0)
    rec = lbd.state.log[0]
    assert rec.retrain_count is not None
    row = rec.as_row(learned=True)
    assert len(row) == 12
