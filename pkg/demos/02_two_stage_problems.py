"""Building two-stage problems and checking them against the extensive form.

A tiny facility-location instance under demand uncertainty: sample
scenarios, assemble the two-stage data, and solve the monolithic
extensive-form MIP as ground truth.

Run: python3 demos/02_two_stage_problems.py
"""

import numpy as np

from cutlearn import (
    CflpData, ScenarioSet, build_cflp, extensive_form, sample_scenarios,
    solve_mip,
)

data = CflpData(capacities=[25.0, 30.0],
                setup_costs=[12.0, 15.0],
                demands=[8.0, 6.0, 9.0],
                penalties=[20.0, 20.0, 20.0],
                transport_costs=[[1.0, 2.0, 1.5],
                                 [2.5, 0.5, 1.0]])

scen = sample_scenarios(data.demands, sigma_ratio=0.2, count=5, seed=42)
print("sampled demand scenarios (rows) with probabilities:")
for row, p in zip(scen.demands, scen.probabilities):
    print("  ", np.round(row, 2), " p =", p)

problem = build_cflp(data, scen)
oracle = solve_mip(extensive_form(problem))
x = oracle.x[:problem.n_binary]
print("\nextensive-form optimum:", round(oracle.objective, 4))
print("open facilities:", [i for i, v in enumerate(x) if v > 0.5])
