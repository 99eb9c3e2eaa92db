"""Distributionally robust inverse multiobjective optimization.

Estimates unknown linear-term parameters of a multiobjective quadratic
decision problem from noisy Pareto-optimal decisions, either by plain
empirical risk minimization or by minimizing the worst-case expected
surrogate loss over a 1-Wasserstein ball via a cutting-plane exchange loop.
"""

from .model import (EstimatorConfig, MqpInstance, ObservationSet, ThetaSpec,
                    VBounds, apply_theta, build_portfolio_instance,
                    build_synthetic_instance, portfolio_theta_spec,
                    synthetic_theta_spec)
from .pareto import (BadArity, NoiseModel, WeightGrid, generate_observations,
                     observations_from_csv, observations_from_json,
                     observations_to_csv, observations_to_json,
                     sample_weight_grid)
from .qp import QpSolution, WeightVector, frontier_points, solve_frontier, solve_wp
from .loss import (ConstantsBundle, LossEvaluation, compute_constants,
                   empirical_risk, prediction_error, surrogate_loss)
from .erm import ErmResult, emit_kkt_formulation, fit_erm
from .robust import (CuttingPlaneState, RobustResult, fit_robust, inner_v_solve,
                     max_violation, select_radius, solve_master,
                     worst_case_objective)

__all__ = [
    "EstimatorConfig", "MqpInstance", "ObservationSet", "ThetaSpec", "VBounds",
    "apply_theta", "build_portfolio_instance", "build_synthetic_instance",
    "portfolio_theta_spec", "synthetic_theta_spec",
    "BadArity", "NoiseModel", "WeightGrid", "generate_observations",
    "observations_from_csv", "observations_from_json", "observations_to_csv",
    "observations_to_json", "sample_weight_grid",
    "QpSolution", "WeightVector", "frontier_points", "solve_frontier", "solve_wp",
    "ConstantsBundle", "LossEvaluation", "compute_constants", "empirical_risk",
    "prediction_error", "surrogate_loss",
    "ErmResult", "emit_kkt_formulation", "fit_erm",
    "CuttingPlaneState", "RobustResult", "fit_robust", "inner_v_solve",
    "max_violation", "select_radius", "solve_master", "worst_case_objective",
]

__version__ = "0.1.0"
