"""Two-stage EV charging allocation: queue-aware quotas, then utility-maximizing assignment."""

__version__ = "0.1.0"

from .assignment import Assignment, AssignmentProblem, brute_force_assignment, solve_assignment
from .economics import EvRequest, Station, UtilityMatrix, build_utility_matrix, optimal_charge
from .participation import ParticipationParams, heterogeneous_fixed_points, sustainable_interval
from .quota import QuotaPlan, StationFlowState, advance_state, solve_quota
from .queueing import StationQueueParams, erlang_p0, expected_in_system
from .simulation import EpochReport, ScenarioConfig, run_scenario

__all__ = [
    "Assignment", "AssignmentProblem", "brute_force_assignment", "solve_assignment",
    "EvRequest", "Station", "UtilityMatrix", "build_utility_matrix", "optimal_charge",
    "ParticipationParams", "heterogeneous_fixed_points", "sustainable_interval",
    "QuotaPlan", "StationFlowState", "advance_state", "solve_quota",
    "StationQueueParams", "erlang_p0", "expected_in_system",
    "EpochReport", "ScenarioConfig", "run_scenario",
]
