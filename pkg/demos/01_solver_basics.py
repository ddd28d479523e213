"""The in-process LP and MIP solvers: duals, reduced costs, strong duality.

Run: python3 demos/01_solver_basics.py
"""

import numpy as np

from cutlearn import LpInstance, MipInstance, solve_lp, solve_mip

# min -x - 2y  s.t.  x + y <= 4,  y <= 3,  x, y >= 0
lp = LpInstance([-1.0, -2.0],
                rows=[([1.0, 1.0], "<=", 4.0), ([0.0, 1.0], "<=", 3.0)])
sol = solve_lp(lp)
print("LP status:", sol.status)
print("  x* =", sol.x, " objective =", sol.objective)
print("  row duals =", sol.duals)
print("  strong duality gap =", abs(sol.objective - sol.dual_objective(lp)))

# a small knapsack as a binary MIP: min -(3a + 4b + 5c), 2a + 3b + 4c <= 5
mip = MipInstance(LpInstance([-3.0, -4.0, -5.0],
                             rows=[([2.0, 3.0, 4.0], "<=", 5.0)],
                             bounds=[(0, 1)] * 3),
                  binary_indices=[0, 1, 2])
best = solve_mip(mip)
print("\nMIP status:", best.status)
print("  x* =", best.x, " objective =", best.objective)
