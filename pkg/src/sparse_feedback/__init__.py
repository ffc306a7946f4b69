"""Sparse (l1-optimal) dynamic feedback controllers for discrete-time LTI plants."""

from .estimator import SparseFeedbackController, TrackingController
from .l1lp import InfeasibleError, L1Program, L1Solution, SolverError, Status, solve
from .model import (AssumptionError, AugmentedSystem, Compensator, DimensionError, LtiSystem,
                    Norm, SolutionPair, SynthesisSpec, TrackingCompensator, Variant,
                    basis_vector, kron, numerical_rank, rank_condition, reachability_matrix,
                    shift_matrix, zoh_discretize)
from .realization import RealizationData, RealizationError, closed_loop, realize, verify_nilpotent
from .simulate import (Trajectory, audit_constraints, check_equivalence, run_closed_loop,
                       run_tracking)
from .synthesis import (OpenLoopSolution, feasibility_report, project_onto_constraints,
                        solve_open_loop, synthesize)
from .tracking import (ReferenceSignal, SteadyState, assemble_tracking, feedforward_gains,
                       steady_state)

__version__ = "0.1.0"

__all__ = [
    "SparseFeedbackController",
    "TrackingController",
    "InfeasibleError",
    "L1Program",
    "L1Solution",
    "SolverError",
    "Status",
    "solve",
    "AssumptionError",
    "AugmentedSystem",
    "Compensator",
    "DimensionError",
    "LtiSystem",
    "Norm",
    "SolutionPair",
    "SynthesisSpec",
    "TrackingCompensator",
    "Variant",
    "basis_vector",
    "kron",
    "numerical_rank",
    "rank_condition",
    "reachability_matrix",
    "shift_matrix",
    "zoh_discretize",
    "RealizationData",
    "RealizationError",
    "closed_loop",
    "realize",
    "verify_nilpotent",
    "Trajectory",
    "audit_constraints",
    "check_equivalence",
    "run_closed_loop",
    "run_tracking",
    "OpenLoopSolution",
    "feasibility_report",
    "project_onto_constraints",
    "solve_open_loop",
    "synthesize",
    "ReferenceSignal",
    "SteadyState",
    "assemble_tracking",
    "feedforward_gains",
    "steady_state",
]
