"""
Numerical audit of the properties that make the dropped request rate ``lambda * P_L(lambda, mu)`` convex:
the bounds of the Mills tail and of the loss prefactor, the analytic derivatives, the closed form and the
sign of ``g_n''``, the ``rho_n`` bracket and the convexity itself.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from greendc.queueing.loss import alpha_bounds, alpha_derivatives, alpha_normalized, g_second_derivative, \
    g_second_derivative_closed_form, loss_from_ratio, loss_probability, loss_shape, loss_terms, mills_tail, \
    mills_tail_bounds, rho_sequence
from greendc.queueing.types import QueueSpec, SearchConfig, WorkloadStats


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    'mills_sandwich': 1e-12,
    'alpha_bracket': 1e-12,
    'alpha_first_derivative': 1e-6,
    'alpha_second_derivative': 1e-6,
    'g_closed_form': 1e-4,
    'g_nonnegative': 1e-6,
    'g_nonnegative_any_index': 1e-6,
    'rho_bracket': 1e-12,
    'max_form': 1e-12,
    'midpoint_convexity': 1e-8,
    'perspective_identity': 1e-12,
    'scale_invariance': 1e-12,
}

# inactive indices of the loss exponent may have a negative curvature near t = 0; reported only
INFORMATIONAL_CHECKS = ('g_nonnegative_any_index',)


@dataclass(frozen=True)
class AuditGrid:
    """
    Args:
        t_values: normalized excess service rates
        n_values: indices of the loss exponent
        cvs: coefficients of variation
        effective_deadlines: deadline minus network delay, seconds
        correlations: lag-1 correlation decay factors of the autocovariance profiles used for the ``rho_n``
            bracket (``c_l = cv^2 * phi^l``)
        nb_random: number of random points of the convexity, perspective and scale checks
        scales: scale factors of the scale invariance check
        seed: seed of the random points
        tolerances: accepted violation per check
    """
    t_values: Tuple[float, ...] = tuple(np.round(np.linspace(0.0, 10.0, 101), 10).tolist())
    n_values: Tuple[int, ...] = tuple(range(1, 51))
    cvs: Tuple[float, ...] = (0.1, 0.3, 1.0)
    effective_deadlines: Tuple[float, ...] = (1.0, 5.0, 30.0)
    correlations: Tuple[float, ...] = (0.0, 0.5, 0.9)
    nb_random: int = 1000
    scales: Tuple[float, ...] = (0.5, 2.0, 10.0)
    seed: int = 0
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        if min(self.t_values) < 0:
            raise ValueError('t_values must be >= 0')
        if min(self.n_values) < 1:
            raise ValueError('n_values must be >= 1')
        if min(self.cvs) <= 0:
            raise ValueError('cvs must be > 0')


@dataclass
class AuditCheck:
    """
    Args:
        name: name of the check
        max_violation: largest violation over the points of the check
        tolerance: accepted violation
        nb_points: number of points checked
        worst_point: parameters of the largest violation
        informational: the check is reported but does not decide whether the audit passes
    """
    name: str
    max_violation: float
    tolerance: float
    nb_points: int
    worst_point: Dict[str, float] = field(default_factory=dict)
    informational: bool = False

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


@dataclass
class AuditReport:
    checks: List[AuditCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def check(self, name: str) -> AuditCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_records(self) -> List[Dict]:
        return [{'check': c.name, 'max_violation': c.max_violation, 'tolerance': c.tolerance,
                 'nb_points': c.nb_points, 'passed': c.passed, 'informational': c.informational,
                 'worst_point': dict(c.worst_point)}
                for c in self.checks]


class _Tracker:
    """Keep the largest violation of a check and where it happened"""
    def __init__(self, name: str, tolerance: float, informational: bool = False):
        self.name = name
        self.tolerance = tolerance
        self.informational = informational
        self.worst = 0.0
        self.worst_point: Dict[str, float] = {}
        self.nb_points = 0

    def add(self, violation: float, **point) -> None:
        self.nb_points += 1
        if math.isnan(violation):
            violation = math.inf
        if violation > self.worst or (not self.worst_point and violation == self.worst):
            self.worst = violation
            self.worst_point = point

    def result(self) -> AuditCheck:
        return AuditCheck(name=self.name, max_violation=self.worst, tolerance=self.tolerance,
                          nb_points=self.nb_points, worst_point=self.worst_point,
                          informational=self.informational)


def _relative(value: float, reference: float, floor: float = 0.0) -> float:
    return abs(value - reference) / max(abs(reference), floor, 1e-300)


def _central_difference(function: Callable[[float], float], t: float) -> float:
    h = 1e-4 * max(1.0, t)
    return (function(t + h) - function(t - h)) / (2.0 * h)


def _check_prefactor(grid: AuditGrid, trackers: Dict[str, _Tracker]) -> None:
    for t in grid.t_values:
        h = mills_tail(t)
        lower, upper = mills_tail_bounds(t)
        trackers['mills_sandwich'].add(max(lower - h, h - upper, 0.0), t=t)
        for cv in grid.cvs:
            alpha = alpha_normalized(t, cv)
            low, high = alpha_bounds(t, cv)
            trackers['alpha_bracket'].add(max(low - alpha, alpha - high, 0.0) / cv, t=t, cv=cv)
            if t < 2e-4 * max(1.0, t):
                continue
            _, d_alpha, d2_alpha = alpha_derivatives(t, cv)
            numeric_d = _central_difference(lambda u: alpha_normalized(u, cv), t)
            numeric_d2 = _central_difference(lambda u: alpha_derivatives(u, cv)[1], t)
            trackers['alpha_first_derivative'].add(_relative(numeric_d, d_alpha), t=t, cv=cv)
            trackers['alpha_second_derivative'].add(_relative(numeric_d2, d2_alpha), t=t, cv=cv)


def _check_terms(grid: AuditGrid, trackers: Dict[str, _Tracker]) -> None:
    search = SearchConfig(n_max=max(grid.n_values))
    for cv in grid.cvs:
        stats = WorkloadStats.iid(1.0, cv)
        for d in grid.effective_deadlines:
            shape = loss_shape(stats, d, search)
            for t in grid.t_values:
                if t <= 0:
                    continue
                # the index setting the loss at t
                active = loss_from_ratio(1.0 + cv * t, shape).argmin_n
                for n in grid.n_values:
                    numeric = g_second_derivative(t, n, shape, normalized=True)
                    closed = g_second_derivative_closed_form(t, n, shape, normalized=True)
                    point = dict(t=t, n=n, cv=cv, deadline=d)
                    trackers['g_closed_form'].add(_relative(numeric, closed, floor=1.0), **point)
                    trackers['g_nonnegative_any_index'].add(max(-numeric, 0.0), **point)
                    if n == active:
                        trackers['g_nonnegative'].add(max(-numeric, 0.0), **point)


def _check_rho(grid: AuditGrid, trackers: Dict[str, _Tracker]) -> None:
    n_max = max(grid.n_values)
    n = np.arange(1, n_max + 1)
    for cv in grid.cvs:
        for phi in grid.correlations:
            # nonnegative and nonincreasing autocovariance
            autocov = cv * cv * phi ** np.arange(n_max)
            rho = rho_sequence(autocov, n_max)
            lower = n * cv * cv
            upper = n * n * cv * cv
            violation = np.maximum(lower - rho, rho - upper) / upper
            worst = int(np.argmax(violation))
            trackers['rho_bracket'].add(max(float(violation[worst]), 0.0), n=int(n[worst]), cv=cv, phi=phi)


def _random_queues(grid: AuditGrid, random_state: np.random.RandomState):
    for _ in range(grid.nb_random):
        cv = float(random_state.choice(grid.cvs))
        d = float(random_state.choice(grid.effective_deadlines))
        yield cv, d


def _check_random_points(grid: AuditGrid, trackers: Dict[str, _Tracker]) -> None:
    random_state = np.random.RandomState(grid.seed)
    shapes = {(cv, d): loss_shape(WorkloadStats.iid(1.0, cv), d)
              for cv in grid.cvs for d in grid.effective_deadlines}

    def dropped_rate(lam, mu, shape):
        return lam * loss_from_ratio(mu / lam, shape).loss_prob

    for cv, d in _random_queues(grid, random_state):
        shape = shapes[(cv, d)]
        # two points of the region mu >= max(lambda, 1)
        points = []
        for _ in range(2):
            lam = random_state.uniform(1.0, 100.0)
            mu = lam * random_state.uniform(1.0, 2.0)
            points.append((lam, mu))
        (l1, m1), (l2, m2) = points
        middle = dropped_rate(0.5 * (l1 + l2), 0.5 * (m1 + m2), shape)
        average = 0.5 * (dropped_rate(l1, m1, shape) + dropped_rate(l2, m2, shape))
        trackers['midpoint_convexity'].add(max(middle - average, 0.0), cv=cv, deadline=d, lambda_1=l1, mu_1=m1,
                                           lambda_2=l2, mu_2=m2)

        x = m1 / l1
        terms = loss_terms(x, shape)
        loss = loss_from_ratio(x, shape).loss_prob
        trackers['max_form'].add(_relative(loss, float(np.max(terms)), floor=1e-300), cv=cv, deadline=d, ratio=x)

        stats = WorkloadStats.iid(l1, cv * l1)
        queue_loss = loss_probability(stats, QueueSpec(alloc_rate=l1, service_rate=m1, deadline=d)).loss_prob
        trackers['perspective_identity'].add(_relative(l1 * queue_loss, dropped_rate(l1, m1, shape), floor=1e-300),
                                             cv=cv, deadline=d, ratio=x)
        for c in grid.scales:
            scaled_stats = WorkloadStats.iid(c * l1, c * cv * l1)
            scaled = loss_probability(scaled_stats,
                                      QueueSpec(alloc_rate=c * l1, service_rate=c * m1, deadline=d)).loss_prob
            trackers['scale_invariance'].add(abs(scaled - queue_loss), cv=cv, deadline=d, ratio=x, scale=c)


def convexity_audit(grid: AuditGrid = AuditGrid()) -> AuditReport:
    """
    Run every check of the audit on a grid.

    Args:
        grid: the points and the tolerances

    Returns:
        an :class:`AuditReport` listing the largest violation of each check
    """
    trackers = {name: _Tracker(name, grid.tolerances.get(name, DEFAULT_TOLERANCES[name]),
                               informational=name in INFORMATIONAL_CHECKS)
                for name in DEFAULT_TOLERANCES}
    _check_prefactor(grid, trackers)
    _check_terms(grid, trackers)
    _check_rho(grid, trackers)
    _check_random_points(grid, trackers)

    report = AuditReport(checks=[t.result() for t in trackers.values()])
    for c in report.checks:
        log = logger.info if c.passed or c.informational else logger.warning
        log(f'audit check={c.name}, max violation={c.max_violation:.3e}, tolerance={c.tolerance:.1e}, '
            f'passed={c.passed}')
    return report
