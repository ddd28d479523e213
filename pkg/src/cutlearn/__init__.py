"""Two-stage stochastic programming toolkit: a self-contained LP/MIP
solver, capacitated facility location and multicommodity network design
builders, classic Benders decomposition, and a learning-enhanced variant
whose SVM classifier picks which optimality cuts enter the master."""

from .benders import (
    BendersResult, BendersState, Cut, CutObservation,
    compute_gap, make_cut, run_classic_bd, solve_rmp, solve_subproblem,
    violation,
)
from .learnbd import ConstantClassifier, DeltaSchedule, LearnBdResult, run_learnbd
from .phase1 import (
    LabeledRow, RowStore, TrainingRow, run_phase1, sample_cut_path,
    transform_labels,
)
from .problems import (
    CflpData, CmndData, ScenarioSet, TwoStageProblem,
    build_cflp, build_cmnd, extensive_form, generate_cflp, generate_cmnd,
    load_cflp, load_cmnd, parse_orlib_cap, sample_scenarios,
)
from .solver_core import (
    LpInstance, LpSolution, MipInstance, MipSolution,
    solve_lp, solve_mip,
)
from .svm import (
    SvmModel, TransferScaling, accuracy, grid_search, hinge_loss,
    load_model, predict, rbf_kernel, save_model, scale_features_transfer,
    train_svm,
)

__version__ = "0.1.0"
