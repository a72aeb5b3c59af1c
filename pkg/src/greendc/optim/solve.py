import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import lsq_linear

from greendc.allocation import Allocation, BROWN, GREEN
from greendc.basic_typing import Vector
from greendc.energy.profit import ProfitBreakdown, failing_pairs, slot_profit
from greendc.optim.barrier import BarrierResult, barrier_minimize, is_strictly_feasible, phase_one
from greendc.optim.problem import ProblemInstance, SolveOptions, constraint_report, max_violation


logger = logging.getLogger(__name__)

STATUS_OPTIMAL = 'optimal'
STATUS_FEASIBLE_NOT_CONVERGED = 'feasible-not-converged'
STATUS_INFEASIBLE = 'infeasible'
STATUS_NON_CERTIFIED = 'non-certified'
STATUSES = (STATUS_OPTIMAL, STATUS_FEASIBLE_NOT_CONVERGED, STATUS_INFEASIBLE, STATUS_NON_CERTIFIED)

# number of service rate increases tried to bring a starting point below the drop thresholds
_MAX_RATE_INCREASES = 20


@dataclass
class SolveResult:
    """
    Outcome of a slot solve.

    Args:
        allocation: the allocation found (all zeros when infeasible)
        objective: slot profit of ``allocation`` recomputed by :func:`greendc.energy.slot_profit`, currency
        status: one of ``optimal``, ``feasible-not-converged``, ``infeasible``, ``non-certified``
        kkt_residuals: relative stationarity, complementarity and primal residuals at the barrier solution
        iterations: Newton steps summed over the starts
        breakdown: profit breakdown of ``allocation``
        slacks: slack of every constraint at ``allocation``
        diagnostics: everything else worth reporting (infeasibility reason, failing profitability pairs,
            degenerate classes, starts...)
        wall_time: seconds spent in the solve
    """
    allocation: Allocation
    objective: float
    status: str
    kkt_residuals: Dict[str, float]
    iterations: int
    breakdown: ProfitBreakdown
    slacks: Dict[str, float] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status != STATUS_INFEASIBLE


def initial_point(problem: ProblemInstance, start: int, seed: int = 0) -> Vector:
    """
    Starting point of the barrier solve, as a full allocation vector.

    The request rates of each class are split across data centers in proportion to their green capacity,
    the rest goes to the brown queues weighted by the brown price rank. Starts other than the first are
    randomly perturbed. Service rates are 1.2 times the request rates, then raised where a drop threshold is
    exceeded.
    """
    nb_dcs, nb_classes = problem.nb_dcs, problem.nb_classes
    enabled = problem.enabled.reshape([2, nb_dcs, nb_classes])
    capacities = np.asarray([c.per_server_capacity for c in problem.classes])
    demand = problem.demand
    target = demand * (0.999 if problem.options.relax_demand_equality else 1.0)

    if problem.frozen_alloc:
        lam = problem.fixed_values[0::2].reshape([2, nb_dcs, nb_classes]).copy()
    else:
        lam = np.zeros([2, nb_dcs, nb_classes])
        load = demand / capacities
        share = load / np.sum(load)
        for i in range(nb_dcs):
            lam[GREEN, i] = problem.green_caps[i] * share * capacities / 1.2 * 0.9 * enabled[GREEN, i]
        green_total = lam[GREEN].sum(axis=0)
        scale = np.minimum(1.0, 0.9 * target / np.maximum(green_total, 1e-300))
        lam[GREEN] *= scale[None, :]

        remaining = target - lam[GREEN].sum(axis=0)
        ranks = np.argsort(np.argsort(problem.env.brown_price, kind='stable'), kind='stable')
        weights = (nb_dcs - ranks)[:, None] * enabled[BROWN]
        lam[BROWN] = remaining[None, :] * weights / np.maximum(weights.sum(axis=0, keepdims=True), 1e-300)

        nb_active = np.maximum(enabled.sum(axis=(0, 1)), 1)
        lam = np.where(enabled, np.maximum(lam, 1e-3 * target / nb_active), 0.0)
        if start > 0:
            rng = np.random.RandomState(seed + start)
            lam = lam * np.exp(0.5 * rng.randn(*lam.shape))
        lam = lam * (target / lam.sum(axis=(0, 1)))[None, None, :]

    mu = np.where(enabled, np.maximum(1.2 * lam, 1.2), 0.0)

    if not problem.frozen_alloc:
        # move green requests to the brown queue of the same data center until the green servers fit the cap
        for i in np.flatnonzero(enabled[GREEN].any(axis=1)):
            for _ in range(_MAX_RATE_INCREASES):
                used = float(np.sum(mu[GREEN, i] / capacities))
                if used < 0.98 * problem.green_caps[i]:
                    break
                factor = 0.9 * problem.green_caps[i] / used
                moved = lam[GREEN, i] * (1.0 - factor)
                lam[GREEN, i] -= moved
                lam[BROWN, i] += moved
                mu[:, i] = np.where(enabled[:, i], np.maximum(1.2 * lam[:, i], 1.2), 0.0)

    x = np.zeros(problem.nb_variables)
    x[0::2] = lam.ravel()
    x[1::2] = mu.ravel()

    for q in problem.sla_queues:
        for _ in range(_MAX_RATE_INCREASES):
            value = problem.queue_terms(q, x[2 * q], x[2 * q + 1])[0]
            if value < problem.thresholds[q]:
                break
            x[2 * q + 1] *= 1.5
    return x


def _run_start(problem: ProblemInstance,
               start: int,
               options: SolveOptions) -> Tuple[Optional[BarrierResult], Vector]:
    """
    Returns:
        a tuple (barrier result or None if no strictly feasible point was found, last point)
    """
    x0 = initial_point(problem, start, options.seed)
    z0 = problem.restrict(x0)
    barrier_options = options.barrier_options()
    if not is_strictly_feasible(problem, z0):
        z0, feasible, s = phase_one(problem, z0, barrier_options)
        if not feasible:
            logger.info(f'start={start}: no strictly feasible point found (s={s:.3e})')
            return None, problem.expand(z0)
    result = barrier_minimize(problem, z0, barrier_options)
    logger.debug(f'start={start}: value={result.value:.10g}, converged={result.converged}, '
                 f'iterations={result.iterations}')
    return result, problem.expand(result.x)


def kkt_residuals(problem: ProblemInstance, result: BarrierResult) -> Dict[str, float]:
    """
    Relative KKT residuals at the barrier solution.

    The stationarity residual is minimized over the equality multipliers and over the convex combinations of
    the gradients available at the kinks of the loss, the inequality multipliers being those of the barrier.
    """
    z = result.x
    x = problem.expand(z)
    gradient = problem.gradient_full(x)[problem.free]
    jacobian, _ = problem.constraint_derivatives(z, np.zeros(len(result.inequality_duals)))
    base = gradient + jacobian.T @ result.inequality_duals

    a = problem.equality_matrix
    kinks = [d[problem.free] for d in problem.kink_directions(x)]
    columns = [a.T] + ([np.stack(kinks, axis=1)] if kinks else [])
    m = np.concatenate(columns, axis=1)
    if m.shape[1] == 0:
        residual = base
    else:
        lower = np.concatenate([np.full(a.shape[0], -np.inf), np.zeros(len(kinks))])
        upper = np.concatenate([np.full(a.shape[0], np.inf), np.ones(len(kinks))])
        fit = lsq_linear(m, -base, bounds=(lower, upper))
        residual = base + m @ fit.x

    scale = max(1.0, float(np.max(np.abs(gradient))) if len(gradient) else 1.0)
    b = problem.equality_rhs
    equality = float(np.max(np.abs(a @ z - b))) / max(1.0, float(np.max(np.abs(b)))) if len(b) else 0.0
    c = problem.constraints(z)
    return {
        'stationarity': float(np.max(np.abs(residual))) / scale if len(residual) else 0.0,
        'complementarity': result.gap / max(1.0, abs(result.value)),
        'primal_equality': equality,
        'primal_inequality': max(0.0, float(np.max(c))) if len(c) else 0.0,
        'kinks': float(len(kinks)),
    }


def _snap_small_allocations(problem: ProblemInstance, x: Vector) -> Vector:
    """
    Request rates below the empty queue threshold are set to 0 and moved to the largest queue of the class.
    """
    x = x.copy()
    lam = x[0::2].reshape([2, problem.nb_dcs, problem.nb_classes])
    epsilons = problem.options.epsilon_alloc * np.maximum(problem.env.class_means, 1.0)
    for j in range(problem.nb_classes):
        column = lam[:, :, j]
        small = (column > 0) & (column < epsilons[j])
        if not np.any(small) or np.all(small):
            continue
        moved = float(np.sum(column[small]))
        column[small] = 0.0
        largest = np.unravel_index(np.argmax(column), column.shape)
        column[largest] += moved
    x[0::2] = lam.ravel()
    x[1::2] = np.where(problem.enabled, np.maximum(x[1::2], x[0::2]), x[1::2])
    return x


def _infeasible_result(problem: ProblemInstance,
                       reason: str,
                       last_point: Optional[Vector],
                       iterations: int,
                       started: float) -> SolveResult:
    diagnostics = {'infeasible_reason': reason}
    if last_point is not None:
        report = constraint_report(problem, problem.to_allocation(last_point))
        name, violation = max_violation(problem, report)
        diagnostics['max_violated_constraint'] = name
        diagnostics['max_violation'] = violation
    logger.info(f'slot program infeasible: {reason}')
    allocation = Allocation.zeros(problem.nb_dcs, problem.nb_classes)
    breakdown = slot_profit(allocation, problem.env, problem.dcs, problem.classes,
                            loss_model=problem.options.loss_model, search=problem.options.search)
    return SolveResult(
        allocation=allocation,
        objective=breakdown.total,
        status=STATUS_INFEASIBLE,
        kkt_residuals={},
        iterations=iterations,
        breakdown=breakdown,
        slacks={},
        diagnostics=diagnostics,
        wall_time=time.perf_counter() - started)


def solve(problem: ProblemInstance, options: Optional[SolveOptions] = None) -> SolveResult:
    """
    Maximize the slot profit.

    Each start runs a phase I search when its starting point is not strictly feasible, then the barrier
    method. The best start is kept (the first one on ties). The result is deterministic for a given seed.

    Args:
        problem: the program built by :func:`greendc.optim.build_problem`
        options: overrides the options the problem was built with (the structural options such as the
            loss model are those of the problem)

    Returns:
        a :class:`SolveResult`. Solver failures are reported through its status, never raised
    """
    started = time.perf_counter()
    if options is None:
        options = problem.options
    if problem.infeasible_reason is not None:
        return _infeasible_result(problem, problem.infeasible_reason, None, 0, started)

    best: Optional[BarrierResult] = None
    best_start = -1
    start_values: List[float] = []
    iterations = 0
    last_point = None
    for start in range(options.multistart):
        result, last_point = _run_start(problem, start, options)
        if result is None:
            start_values.append(float('nan'))
            continue
        iterations += result.iterations
        start_values.append(result.value)
        if best is None or result.value < best.value:
            best = result
            best_start = start

    if best is None:
        return _infeasible_result(problem, 'no strictly feasible point found', last_point, iterations, started)

    x = problem.expand(best.x)
    degenerate_names = [problem.classes[j].name for j in problem.degenerate_classes]
    ignored = [f'demand[{name}]' for name in degenerate_names]

    snapped = x if problem.frozen_alloc else _snap_small_allocations(problem, x)
    snapped = _drop_degenerate_classes(problem, snapped)
    report = constraint_report(problem, problem.to_allocation(snapped))
    worst_name, worst = max_violation(problem, report, ignore=ignored)
    if worst > options.feasibility_tolerance:
        # keep the barrier point when snapping broke a constraint
        snapped = _drop_degenerate_classes(problem, x)
        report = constraint_report(problem, problem.to_allocation(snapped))
        worst_name, worst = max_violation(problem, report, ignore=ignored)

    allocation = problem.to_allocation(snapped)
    breakdown = slot_profit(allocation, problem.env, problem.dcs, problem.classes,
                            loss_model=problem.options.loss_model, search=problem.options.search)
    kkt = kkt_residuals(problem, best)
    pairs = failing_pairs(problem.profitable, problem.dcs, problem.classes)
    evaluation = problem.evaluate_queues(problem.expand(best.x))

    if pairs:
        status = STATUS_NON_CERTIFIED
    elif best.converged and kkt['stationarity'] <= options.kkt_tolerance and \
            worst <= options.feasibility_tolerance:
        status = STATUS_OPTIMAL
    else:
        status = STATUS_FEASIBLE_NOT_CONVERGED

    diagnostics = {
        'failing_pairs': [f'{dc}:{cls}' for dc, cls in pairs],
        'profitability_margins': problem.margins.tolist(),
        'green_server_caps': problem.green_caps.tolist(),
        'disabled_green_dcs': [dc.name for i, dc in enumerate(problem.dcs)
                               if not problem.enabled.reshape([2, problem.nb_dcs, -1])[GREEN, i].any()],
        'degenerate_demand': degenerate_names,
        'starts': start_values,
        'best_start': best_start,
        'converged': best.converged,
        'max_violated_constraint': worst_name,
        'max_violation': worst,
        'argmin_ties': int(np.sum(evaluation.ties)),
        'loss_model': problem.options.loss_model,
    }
    logger.info(f'solve status={status}, profit={breakdown.total:.10g}, iterations={iterations}, '
                f'stationarity={kkt["stationarity"]:.3e}')
    return SolveResult(
        allocation=allocation,
        objective=breakdown.total,
        status=status,
        kkt_residuals=kkt,
        iterations=iterations,
        breakdown=breakdown,
        slacks=report,
        diagnostics=diagnostics,
        wall_time=time.perf_counter() - started)


def _drop_degenerate_classes(problem: ProblemInstance, x: Vector) -> Vector:
    """
    The classes with a negligible demand are solved with the demand floor, then their requests are removed.
    """
    if not problem.degenerate_classes:
        return x
    x = x.copy()
    for q in range(problem.nb_queues):
        if q % problem.nb_classes in problem.degenerate_classes:
            x[2 * q] = 0.0
    return x
