import numpy as np
import pytest

from cutlearn.problems import CflpData, ScenarioSet, ScenarioRecourse, TwoStageProblem, build_cflp
from cutlearn.solver_core import GE


@pytest.fixture
def toy_cflp_problem():
    """1 facility (u=10, k=5), 1 customer (d=4, rho=5, c=1), 1 scenario.
    Extensive optimum: open and ship 4 units, total 9."""
    data = CflpData(capacities=[10.0], setup_costs=[5.0], demands=[4.0],
                    penalties=[5.0], transport_costs=[[1.0]])
    scen = ScenarioSet(demands=[[4.0]], probabilities=[1.0])
    return build_cflp(data, scen)


@pytest.fixture
def toy_bd_problem():
    """min x + E[Q], one scenario with Q(x) = min 3y s.t. y >= 1 - x.

    Classic decomposition trace: iteration 0 yields lb 0, ub 3 and the cut
    theta >= 3 - 3x; iteration 1 yields x = 1 and lb = ub = 1.
    """
    scenario = ScenarioRecourse(
        q=np.array([3.0]),
        W=np.array([[1.0]]),
        T=np.array([[1.0]]),
        h=np.array([1.0]),
        relations=[GE],
        probability=1.0)
    return TwoStageProblem(np.array([1.0]), [scenario])
