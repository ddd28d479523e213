"""Offline cut sampling and the cut classifier.

Sample cuts along independent paths on a training problem, label them at a
threshold, train the RBF-kernel classifier, and inspect its accuracy and
support-vector count.

Run: python3 demos/04_cut_sampling_and_classifier.py
"""

from collections import Counter

from cutlearn import (
    accuracy, build_cflp, run_phase1, sample_scenarios, train_svm,
    transform_labels,
)
from cutlearn.problems import generate_cflp
from cutlearn.svm import grid_search

data = generate_cflp(n_facilities=6, n_customers=12, seed=3,
                     capacity=60.0, setup_range=(20.0, 60.0),
                     demand_range=(4.0, 14.0), cost_range=(0.5, 4.0))
scen = sample_scenarios(data.demands, sigma_ratio=0.1, count=10, seed=4)
training = build_cflp(data, scen)

store = run_phase1(training, n_paths=2, seed=11)   # path length 2 * scenarios
print(f"sampled {len(store.rows)} rows over {store.n_paths} paths")
print("first rows (violation, prior scenario cuts, objective change):")
for row in store.rows[:5]:
    print(f"  path {row.path} step {row.step}: "
          f"({row.violation:.3f}, {row.scenario_cut_count}, "
          f"{row.objective_delta:.3f})")

for delta in (1.2, 1.0, 0.8):
    labeled = transform_labels(store.rows, delta)
    counts = Counter(r.label for r in labeled)
    print(f"threshold {delta}: labels {dict(counts)}")

C, gamma = grid_search(store, 1.2, [1.0, 10.0, 100.0], [0.1, 1.0, 10.0],
                       n_folds=4)
labeled = transform_labels(store.rows, 1.2)
model = train_svm(labeled, C, gamma)
print(f"\ngrid search chose C={C}, gamma={gamma}")
print(f"support vectors: {model.n_support} of {len(labeled)} rows")
print(f"training accuracy: {accuracy(model, labeled):.2f}%")
