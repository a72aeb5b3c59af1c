"""
Log-barrier interior method for smooth (or piecewise smooth) convex programs

    minimize f(x) subject to c(x) < 0 and A x = b

Each centering step minimizes ``t * f(x) - sum_i log(-c_i(x))`` by damped Newton steps on the KKT system
``[[H, A^T], [A, 0]]``, then the barrier weight ``1 / t`` is reduced until the duality gap bound
``m / t`` falls below the requested relative tolerance.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
from typing_extensions import Protocol

from greendc.basic_typing import Matrix, Vector


logger = logging.getLogger(__name__)


class ConvexProgram(Protocol):
    """
    The callbacks of a program solved by :func:`barrier_minimize`.

    ``objective_derivatives`` must return a positive semi-definite Hessian (an approximation is allowed
    where the objective is not twice differentiable), ``constraint_derivatives`` returns the Jacobian of
    the constraints and the weighted sum of their Hessians.
    """
    equality_matrix: Matrix
    equality_rhs: Vector

    def objective(self, x: Vector) -> float:
        ...

    def objective_derivatives(self, x: Vector) -> Tuple[Vector, Matrix]:
        ...

    def constraints(self, x: Vector) -> Vector:
        ...

    def constraint_derivatives(self, x: Vector, weights: Vector) -> Tuple[Matrix, Matrix]:
        ...


@dataclass(frozen=True)
class BarrierOptions:
    """
    Args:
        tolerance: relative tolerance on the duality gap bound ``m / t``
        max_iterations: maximum number of Newton steps, all centerings included
        initial_weight: initial barrier weight ``1 / t``. If ``None``, chosen so that the first gap bound
            matches the magnitude of the objective at the starting point
        reduction: factor dividing the barrier weight after each centering
        newton_tolerance: a centering stops when half the squared Newton decrement is below this value
        max_centering_iterations: maximum number of Newton steps of one centering
        armijo: sufficient decrease fraction of the backtracking line search
        backtracking: step shrink factor of the backtracking line search
        min_step: smallest step tried by the line search
    """
    tolerance: float = 1e-7
    max_iterations: int = 500
    initial_weight: Optional[float] = None
    reduction: float = 10.0
    newton_tolerance: float = 1e-9
    max_centering_iterations: int = 60
    armijo: float = 0.25
    backtracking: float = 0.5
    min_step: float = 1e-12


@dataclass
class BarrierResult:
    """
    Args:
        x: the final point, strictly feasible
        value: objective at ``x``
        iterations: number of Newton steps performed
        converged: the duality gap bound reached the tolerance within the iteration budget
        t: final barrier parameter (inverse of the barrier weight)
        gap: final duality gap bound ``m / t``
        newton_decrement: last squared Newton decrement
        inequality_duals: multiplier estimates ``1 / (t * -c_i(x))``
        equality_duals: multiplier estimates of the equality constraints
        stopped: ``stop_when`` returned True
    """
    x: Vector
    value: float
    iterations: int
    converged: bool
    t: float
    gap: float
    newton_decrement: float
    inequality_duals: Vector
    equality_duals: Vector
    stopped: bool = False


def is_strictly_feasible(program: ConvexProgram, x: Vector) -> bool:
    c = program.constraints(x)
    return bool(np.all(np.isfinite(c)) and np.all(c < 0))


def newton_direction(hessian: Matrix, gradient: Vector, a: Matrix, residual: Vector) -> Tuple[Vector, Vector]:
    """
    Solve the KKT system ``[[H, A^T], [A, 0]] [dx, w] = [-g, b - A x]``.

    Falls back to a least-squares solution when the system is singular.

    Returns:
        a tuple (dx, w)
    """
    n = len(gradient)
    p = a.shape[0]
    if p == 0:
        try:
            return scipy.linalg.solve(hessian, -gradient, assume_a='pos'), np.zeros(0)
        except (scipy.linalg.LinAlgError, ValueError):
            return np.linalg.lstsq(hessian, -gradient, rcond=None)[0], np.zeros(0)

    kkt = np.block([[hessian, a.T], [a, np.zeros([p, p])]])
    rhs = np.concatenate([-gradient, residual])
    try:
        solution = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(solution)):
            raise np.linalg.LinAlgError('non finite KKT solution')
    except np.linalg.LinAlgError:
        solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return solution[:n], solution[n:]


def _barrier_merit(program: ConvexProgram, x: Vector, t: float) -> float:
    c = program.constraints(x)
    if not np.all(c < 0):
        return math.inf
    return t * program.objective(x) - float(np.sum(np.log(-c)))


def _line_search(program: ConvexProgram, x: Vector, dx: Vector, t: float, merit: float, slope: float,
                 options: BarrierOptions) -> Tuple[float, float]:
    """
    Backtracking line search that keeps the iterates strictly feasible.

    Returns:
        a tuple (step, merit at the new point). The step is 0 if no acceptable step was found
    """
    step = 1.0
    # floating point noise of the merit, significant when t * f is large
    slack = 1e-13 * max(1.0, abs(merit))
    while step >= options.min_step:
        candidate = _barrier_merit(program, x + step * dx, t)
        if math.isfinite(candidate) and candidate <= merit + options.armijo * step * slope + slack:
            return step, candidate
        step *= options.backtracking
    return 0.0, merit


def _center(program: ConvexProgram,
            x: Vector,
            t: float,
            options: BarrierOptions,
            budget: int,
            stop_when: Optional[Callable[[Vector], bool]]) -> Tuple[Vector, Vector, int, float, bool]:
    """
    Damped Newton minimization of the barrier merit for a fixed ``t``.

    Returns:
        a tuple (x, equality duals, iterations, last squared decrement, stopped)
    """
    a = program.equality_matrix
    b = program.equality_rhs
    w = np.zeros(a.shape[0])
    decrement = math.inf
    merit = _barrier_merit(program, x, t)
    iterations = 0
    nb_variables = len(x)
    while iterations < min(budget, options.max_centering_iterations):
        c = program.constraints(x)
        inv_slack = -1.0 / c
        gradient_f, hessian_f = program.objective_derivatives(x)
        jacobian, hessian_c = program.constraint_derivatives(x, inv_slack)

        gradient = t * gradient_f + jacobian.T @ inv_slack
        hessian = t * hessian_f + (jacobian.T * inv_slack ** 2) @ jacobian + hessian_c
        ridge = 1e-12 * max(1.0, float(np.trace(hessian)) / nb_variables)
        hessian = hessian + ridge * np.eye(nb_variables)

        dx, w = newton_direction(hessian, gradient, a, b - a @ x)
        decrement = float(-gradient @ dx)
        if decrement * 0.5 <= options.newton_tolerance:
            break

        step, new_merit = _line_search(program, x, dx, t, merit, -abs(decrement), options)
        iterations += 1
        if step == 0.0:
            # a kink of the objective or numerical noise: the point is as centered as it gets
            break
        x = x + step * dx
        improvement = merit - new_merit
        merit = new_merit
        if stop_when is not None and stop_when(x):
            return x, w / t, iterations, decrement, True
        if improvement <= 1e-14 * max(1.0, abs(merit)):
            break
    return x, w / t, iterations, decrement, False


def barrier_minimize(program: ConvexProgram,
                     x0: Vector,
                     options: BarrierOptions = BarrierOptions(),
                     stop_when: Optional[Callable[[Vector], bool]] = None) -> BarrierResult:
    """
    Minimize a convex program from a strictly feasible starting point.

    Args:
        program: the program
        x0: strictly feasible starting point (the equality constraints may be violated, the Newton steps
            restore them)
        options: the solver options
        stop_when: optional predicate evaluated after each Newton step. The solve stops as soon as it
            returns True

    Returns:
        a :class:`BarrierResult`
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    c = program.constraints(x)
    assert np.all(c < 0), 'the starting point must be strictly feasible'

    nb_constraints = len(c)
    value = program.objective(x)
    if options.initial_weight is None:
        t = max(nb_constraints, 1) / max(abs(value), 1.0)
    else:
        assert options.initial_weight > 0, 'the barrier weight must be positive'
        t = 1.0 / options.initial_weight

    iterations = 0
    converged = False
    stopped = False
    equality_duals = np.zeros(program.equality_matrix.shape[0])
    decrement = math.inf
    while True:
        x, equality_duals, nb, decrement, stopped = _center(
            program, x, t, options, options.max_iterations - iterations, stop_when)
        iterations += nb
        value = program.objective(x)
        gap = nb_constraints / t
        logger.debug(f'barrier t={t:.3e}, gap={gap:.3e}, objective={value:.10g}, newton={iterations}')
        if stopped:
            break
        if gap <= options.tolerance * max(1.0, abs(value)):
            converged = True
            break
        if iterations >= options.max_iterations:
            break
        t *= options.reduction

    c = program.constraints(x)
    return BarrierResult(
        x=x,
        value=value,
        iterations=iterations,
        converged=converged,
        t=t,
        gap=nb_constraints / t,
        newton_decrement=decrement,
        inequality_duals=-1.0 / (t * c),
        equality_duals=equality_duals,
        stopped=stopped)


class PhaseOneProgram:
    """
    Feasibility search: minimize ``s`` subject to ``c(x) < s`` and ``A x = b`` over ``(x, s)``.

    A lower bound on ``s`` keeps the program bounded.
    """
    def __init__(self, program: ConvexProgram, s_lower_bound: float):
        self.program = program
        self.s_lower_bound = s_lower_bound
        a = program.equality_matrix
        self.equality_matrix = np.concatenate([a, np.zeros([a.shape[0], 1])], axis=1)
        self.equality_rhs = program.equality_rhs

    def objective(self, y: Vector) -> float:
        return float(y[-1])

    def objective_derivatives(self, y: Vector) -> Tuple[Vector, Matrix]:
        gradient = np.zeros(len(y))
        gradient[-1] = 1.0
        return gradient, np.zeros([len(y), len(y)])

    def constraints(self, y: Vector) -> Vector:
        return np.concatenate([self.program.constraints(y[:-1]) - y[-1], [self.s_lower_bound - y[-1]]])

    def constraint_derivatives(self, y: Vector, weights: Vector) -> Tuple[Matrix, Matrix]:
        jacobian, hessian = self.program.constraint_derivatives(y[:-1], weights[:-1])
        nb = len(y)
        full_jacobian = np.zeros([jacobian.shape[0] + 1, nb])
        full_jacobian[:-1, :-1] = jacobian
        full_jacobian[:-1, -1] = -1.0
        full_jacobian[-1, -1] = -1.0
        full_hessian = np.zeros([nb, nb])
        full_hessian[:-1, :-1] = hessian
        return full_jacobian, full_hessian


def phase_one(program: ConvexProgram, x0: Vector, options: BarrierOptions) -> Tuple[Vector, bool, float]:
    """
    Find a strictly feasible point starting from ``x0`` (which should satisfy the equality constraints).

    Returns:
        a tuple (point, feasible, s). When infeasible, ``point`` minimizes the largest constraint violation
        ``s``
    """
    c0 = program.constraints(x0)
    violation = float(np.max(c0))
    s0 = violation + max(1.0, abs(violation))
    phase = PhaseOneProgram(program, s_lower_bound=-max(1.0, abs(violation)))
    y0 = np.concatenate([np.asarray(x0, dtype=np.float64), [s0]])
    result = barrier_minimize(phase, y0, options, stop_when=lambda y: y[-1] < 0)
    x = result.x[:-1]
    feasible = is_strictly_feasible(program, x)
    logger.info(f'phase I: feasible={feasible}, max violation={float(np.max(program.constraints(x))):.3e}')
    return x, feasible, float(result.x[-1])
