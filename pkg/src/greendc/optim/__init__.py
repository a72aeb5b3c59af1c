from .barrier import ConvexProgram, BarrierOptions, BarrierResult, barrier_minimize, phase_one, PhaseOneProgram, \
    newton_direction, is_strictly_feasible
from .problem import SolveOptions, ProblemInstance, ObjectiveGradient, QueueEvaluation, green_server_cap, \
    build_problem, objective_gradient, constraint_report, max_violation, gd1_queue_terms, mm1_queue_terms
from .solve import SolveResult, solve, initial_point, kkt_residuals, STATUS_OPTIMAL, STATUS_INFEASIBLE, \
    STATUS_NON_CERTIFIED, STATUS_FEASIBLE_NOT_CONVERGED, STATUSES
