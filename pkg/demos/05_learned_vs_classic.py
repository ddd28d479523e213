"""Learned cut selection vs. classic Benders on one instance.

The learned run trains classifiers from cuts sampled on a training problem
(same structure, its own scenario draw), then filters candidate cuts every
iteration.  Compare total cuts and master-solve time.

Run: python3 demos/05_learned_vs_classic.py
"""

from cutlearn import run_classic_bd, run_learnbd, run_phase1, sample_scenarios
from cutlearn.problems import build_cflp, generate_cflp

data = generate_cflp(n_facilities=10, n_customers=25, seed=21)
test_scen = sample_scenarios(data.demands, sigma_ratio=0.1, count=12, seed=22)
train_scen = sample_scenarios(data.demands, sigma_ratio=0.1, count=12, seed=23)
testing = build_cflp(data, test_scen)
training = build_cflp(data, train_scen)

rows = run_phase1(training, n_paths=2, seed=24)
print(f"phase 1 sampled {len(rows.rows)} rows")

bd = run_classic_bd(testing, tolerance_pct=0.01)
lbd = run_learnbd(testing, rows, tolerance_pct=0.01, C=10.0, gamma=1.0)

for name, res in (("classic", bd), ("learned", lbd)):
    rec = res.state.log[-1]
    print(f"{name:>8}: {res.iterations:>3} iterations, {res.cuts_total:>4} cuts, "
          f"gap {res.gap_pct:.4f}%, master time {rec.cum_rmp_time_s:.2f}s, "
          f"objective {res.objective:.2f}")
print(f"\nlearned-method threshold trace: {lbd.delta_trace}")
print(f"retraining events: {lbd.retrain_count}; "
      f"fallback used: {lbd.fallback_used}")
