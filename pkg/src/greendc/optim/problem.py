"""
Assembly of the per-slot profit maximization program.

The program is posed as the minimization of the negated slot profit over the flat vector of
:class:`greendc.allocation.Allocation`. Every queue ``q`` contributes

    T * (-a_q * lambda_q + b_q * F_q(lambda_q, mu_q) + c_q * mu_q)

with ``F_q = lambda_q * P_L`` the rate of requests missing the deadline (the perspective of the loss
probability, convex in the loss model region) and ``a_q``, ``b_q``, ``c_q`` the income and energy
constants of the queue.

Variables fixed by construction (disabled green queues, frozen allocations) are eliminated: the barrier
solver works on the free variables only.
"""
import collections
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from greendc.allocation import Allocation, BROWN, GREEN, SUPPLY_NAMES
from greendc.basic_typing import Matrix, Vector
from greendc.energy.power import SECONDS_PER_HOUR, base_power_per_server, proportional_power_per_server
from greendc.energy.profit import LOSS_MODEL_GD1, LOSS_MODEL_MM1, LOSS_MODELS, profitability_check, \
    profitability_margins
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment, check_network_delays
from greendc.optim.barrier import BarrierOptions
from greendc.queueing.loss import exponent_derivatives, loss_curvature, loss_shape, term_curvature
from greendc.queueing.mm1 import mm1_deadline_tail
from greendc.queueing.types import LossShape, SearchConfig


logger = logging.getLogger(__name__)

# relative gap of the exponent below which a neighbouring index is treated as a kink of the loss
KINK_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SolveOptions:
    """
    Options of :func:`greendc.optim.solve`.

    Args:
        tolerance: relative tolerance of the objective (duality gap bound of the barrier path)
        max_iterations: maximum number of Newton steps per start
        barrier_initial_weight: initial barrier weight. ``None`` picks it from the objective magnitude
        barrier_reduction: factor dividing the barrier weight after each centering
        epsilon_alloc: queues with less than ``epsilon_alloc * max(lambda_j, 1)`` requests/second are
            treated as empty
        seed: seed of the perturbed starting points
        multistart: number of starting points
        total_capacity_constraint: if True, the green and brown servers of a data center are bounded by
            its number of servers
        relax_demand_equality: if True, the classes may be partially served
        kkt_tolerance: relative KKT residual required for the ``optimal`` status
        feasibility_tolerance: scaled constraint violation accepted on the returned point
        loss_model: ``gd1`` or ``mm1``
        search: control of the scan of the loss exponent
    """
    tolerance: float = 1e-7
    max_iterations: int = 500
    barrier_initial_weight: Optional[float] = None
    barrier_reduction: float = 10.0
    epsilon_alloc: float = 1e-6
    seed: int = 0
    multistart: int = 3
    total_capacity_constraint: bool = True
    relax_demand_equality: bool = False
    kkt_tolerance: float = 1e-5
    feasibility_tolerance: float = 1e-6
    loss_model: str = LOSS_MODEL_GD1
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f'tolerance must be > 0, got={self.tolerance}')
        if not self.epsilon_alloc > 0:
            raise ValueError(f'epsilon_alloc must be > 0, got={self.epsilon_alloc}')
        if self.max_iterations < 1:
            raise ValueError(f'max_iterations must be >= 1, got={self.max_iterations}')
        if self.multistart < 1:
            raise ValueError(f'multistart must be >= 1, got={self.multistart}')
        if not self.barrier_reduction > 1:
            raise ValueError(f'barrier_reduction must be > 1, got={self.barrier_reduction}')
        if self.barrier_initial_weight is not None and not self.barrier_initial_weight > 0:
            raise ValueError(f'barrier_initial_weight must be > 0, got={self.barrier_initial_weight}')
        if not self.kkt_tolerance > 0:
            raise ValueError(f'kkt_tolerance must be > 0, got={self.kkt_tolerance}')
        if self.loss_model not in LOSS_MODELS:
            raise ValueError(f'loss_model must be one of {LOSS_MODELS}, got={self.loss_model}')

    def barrier_options(self) -> BarrierOptions:
        return BarrierOptions(
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            initial_weight=self.barrier_initial_weight,
            reduction=self.barrier_reduction)


def green_server_cap(dc: DataCenterSpec, green_energy: float, slot_length: float) -> int:
    """
    Number of servers the green energy of the slot can power at peak draw.

    Args:
        dc: the data center
        green_energy: green energy available over the slot, kWh
        slot_length: slot duration, seconds

    Returns:
        ``floor(available power / (peak_power * pue))``
    """
    assert green_energy >= 0, f'green_energy must be >= 0, got={green_energy}'
    assert slot_length > 0
    per_server = dc.peak_power * dc.pue
    if per_server == 0:
        return int(dc.max_servers)
    available_power = green_energy * SECONDS_PER_HOUR / slot_length
    # the relative nudge absorbs the rounding of exact ratios (e.g. 2.4 / 0.24)
    return int(math.floor(available_power / per_server * (1.0 + 1e-12)))


def gd1_queue_terms(lam: float, mu: float, shape: LossShape) -> Tuple[float, Vector, Matrix, bool, List[Vector]]:
    """
    Dropped request rate ``F = lambda * P_L(mu / lambda)`` of a G/D/1 queue and its derivatives.

    Returns:
        a tuple (F, gradient over (lambda, mu), PSD Hessian, tie flag, gradients of the neighbouring indices
        whose exponent is within the kink tolerance of the minimum)
    """
    if lam <= 0:
        return 0.0, np.zeros(2), np.zeros([2, 2]), False, []

    x = mu / lam
    p, dp, d2p, result = loss_curvature(x, shape)
    gradient = np.asarray([p - x * dp, dp])
    hessian = max(d2p, 0.0) / lam * np.asarray([[x * x, -x], [-x, 1.0]])

    alternatives = []
    if p > 0 and not result.clamped and math.isfinite(result.argmin_n):
        n = int(result.argmin_n)
        t = max(x - 1.0, 0.0) / shape.cv
        for other in (n - 1, n + 1):
            if other < 1 or other > shape.n_max or shape.rho[other - 1] <= 0:
                continue
            m_other = exponent_derivatives(t, other, shape)[0]
            if abs(m_other - result.m_min) <= KINK_TOLERANCE * max(1.0, result.m_min):
                g, dg, _ = term_curvature(x, other, shape)
                alternatives.append(np.asarray([g - x * dg, dg]))
    return lam * p, gradient, hessian, result.tie, alternatives


def mm1_queue_terms(lam: float, mu: float, effective_deadline: float) -> Tuple[float, Vector, Matrix, bool, List[Vector]]:
    """
    Dropped request rate of the M/M/1 deadline tail, ``F = lambda^2 / mu * exp(-(mu - lambda) * D')``.

    The Hessian is projected on the PSD cone.
    """
    if lam <= 0 or mu <= 0:
        return 0.0, np.zeros(2), np.zeros([2, 2]), False, []

    p = mm1_deadline_tail(lam, mu, effective_deadline)
    if p >= 1.0:
        return lam, np.asarray([1.0, 0.0]), np.zeros([2, 2]), False, []

    value = lam * p
    d_log = np.asarray([2.0 / lam + effective_deadline, -1.0 / mu - effective_deadline])
    hessian = value * (np.outer(d_log, d_log) + np.diag([-2.0 / lam ** 2, 1.0 / mu ** 2]))
    eigenvalues, eigenvectors = np.linalg.eigh(hessian)
    hessian = (eigenvectors * np.maximum(eigenvalues, 0.0)) @ eigenvectors.T
    return value, value * d_log, hessian, False, []


@dataclass
class QueueEvaluation:
    """
    Dropped request rates of all the queues at a point.

    Args:
        values: ``F_q``, shaped [nb_queues]
        gradients: derivatives over (lambda_q, mu_q), shaped [nb_queues, 2]
        hessians: PSD second derivatives, shaped [nb_queues, 2, 2]
        ties: the exponent minimum of the queue is attained at several indices
        kinks: (queue, alternative gradient) pairs at the kinks of the loss
    """
    values: Vector
    gradients: Matrix
    hessians: np.ndarray
    ties: np.ndarray
    kinks: List[Tuple[int, Vector]] = field(default_factory=list)


@dataclass
class ObjectiveGradient:
    """
    Args:
        gradient: gradient of the negated profit over the flat allocation vector
        ties: per queue, the gradient is the subgradient of the smallest active index
        kink_queues: queues located at a kink (a neighbouring index is nearly active)
    """
    gradient: Vector
    ties: np.ndarray
    kink_queues: List[int]

    @property
    def tie(self) -> bool:
        return bool(np.any(self.ties))


class ProblemInstance:
    """
    The slot program, with the callbacks expected by :func:`greendc.optim.barrier.barrier_minimize`.

    The callbacks ``objective``, ``objective_derivatives``, ``constraints`` and ``constraint_derivatives``
    operate on the free variables; :meth:`expand` maps them to the full allocation vector.
    """
    def __init__(self,
                 env: SlotEnvironment,
                 dcs: Sequence[DataCenterSpec],
                 classes: Sequence[ServiceClass],
                 options: SolveOptions,
                 demand: Vector,
                 degenerate_classes: List[int],
                 green_caps: np.ndarray,
                 enabled: np.ndarray,
                 fixed_values: Vector,
                 free: np.ndarray,
                 coefficients: Tuple[Vector, Vector, Vector],
                 shapes: List[LossShape],
                 inequality: Tuple[Matrix, Vector, List[str]],
                 equality: Tuple[Matrix, Vector, List[str]],
                 infeasible_reason: Optional[str],
                 frozen_alloc: bool):
        self.env = env
        self.dcs = list(dcs)
        self.classes = list(classes)
        self.options = options
        self.demand = demand
        self.degenerate_classes = degenerate_classes
        self.green_caps = green_caps
        self.enabled = enabled
        self.fixed_values = fixed_values
        self.free = free
        self.a, self.b, self.c = coefficients
        self.shapes = shapes
        self.inequality_full, self.inequality_rhs_full, self.inequality_names_full = inequality
        self.equality_full, self.equality_rhs_full, self.equality_names_full = equality
        self.infeasible_reason = infeasible_reason
        self.frozen_alloc = frozen_alloc

        self.nb_dcs = len(self.dcs)
        self.nb_classes = len(self.classes)
        self.nb_queues = 2 * self.nb_dcs * self.nb_classes
        self.nb_variables = 2 * self.nb_queues

        self.margins = profitability_margins(self.classes, self.dcs, env)
        self.profitable = profitability_check(self.classes, self.dcs, env)
        self.thresholds = np.asarray([self.classes[self._class_of(q)].drop_threshold for q in range(self.nb_queues)])

        is_free = np.zeros(self.nb_variables, dtype=bool)
        is_free[free] = True
        self.is_free = is_free

        # queues with a drop threshold constraint: an enabled queue whose request rate is free or positive.
        # The requests of a degenerate class are dropped from the allocation, so it has none
        lam_free = is_free[0::2]
        lam_fixed = fixed_values[0::2]
        degenerate = np.isin(np.arange(self.nb_queues) % self.nb_classes, degenerate_classes)
        self.sla_queues = np.flatnonzero(enabled & (lam_free | (lam_fixed > 0)) & ~degenerate)
        self.sla_names = [f'drop_threshold[{self.queue_name(q)}]' for q in self.sla_queues]

        self._reduce()
        self._cache_key = None
        self._cache_value = None

    # ---- indexing -----------------------------------------------------------------------------------

    def queue_index(self, supply: int, dc: int, cls: int) -> int:
        return supply * self.nb_dcs * self.nb_classes + dc * self.nb_classes + cls

    def _class_of(self, q: int) -> int:
        return q % self.nb_classes

    def _dc_of(self, q: int) -> int:
        return (q // self.nb_classes) % self.nb_dcs

    def _supply_of(self, q: int) -> int:
        return q // (self.nb_dcs * self.nb_classes)

    def queue_name(self, q: int) -> str:
        return f'{SUPPLY_NAMES[self._supply_of(q)]}:{self.dcs[self._dc_of(q)].name}:' \
               f'{self.classes[self._class_of(q)].name}'

    def expand(self, z: Vector) -> Vector:
        """Full allocation vector from the free variables"""
        x = self.fixed_values.copy()
        x[self.free] = z
        return x

    def restrict(self, x: Vector) -> Vector:
        return np.asarray(x, dtype=np.float64)[self.free]

    def to_allocation(self, x: Vector) -> Allocation:
        return Allocation.from_vector(x, self.nb_dcs, self.nb_classes)

    @property
    def linear_names(self) -> List[str]:
        return self.inequality_names

    @property
    def constraint_names(self) -> List[str]:
        return self.inequality_names + self.sla_names

    # ---- reduction over the free variables ----------------------------------------------------------

    def _reduce(self):
        fixed = ~self.is_free
        fixed_part = self.fixed_values * fixed

        g = self.inequality_full[:, self.free]
        h = self.inequality_rhs_full - self.inequality_full @ fixed_part
        keep = np.any(g != 0, axis=1)
        for index in np.flatnonzero(~keep):
            if h[index] < -self.options.feasibility_tolerance * max(1.0, abs(self.inequality_rhs_full[index])):
                self.infeasible_reason = self.infeasible_reason or \
                    f'constraint `{self.inequality_names_full[index]}` violated by the fixed variables'
        self.inequality_matrix = g[keep]
        self.inequality_rhs = h[keep]
        self.inequality_names = [n for n, k in zip(self.inequality_names_full, keep) if k]

        a = self.equality_full[:, self.free]
        b = self.equality_rhs_full - self.equality_full @ fixed_part
        keep = np.any(a != 0, axis=1)
        for index in np.flatnonzero(~keep):
            if abs(b[index]) > self.options.feasibility_tolerance * max(1.0, abs(self.equality_rhs_full[index])):
                self.infeasible_reason = self.infeasible_reason or \
                    f'constraint `{self.equality_names_full[index]}` violated by the fixed variables'
        self.equality_matrix = a[keep]
        self.equality_rhs = b[keep]
        self.equality_names = [n for n, k in zip(self.equality_names_full, keep) if k]

    # ---- full space evaluation ----------------------------------------------------------------------

    def queue_terms(self, q: int, lam: float, mu: float) -> Tuple[float, Vector, Matrix, bool, List[Vector]]:
        """
        Dropped request rate of queue ``q`` and its derivatives, with the loss model of the options
        """
        shape = self.shapes[q % (self.nb_dcs * self.nb_classes)]
        if self.options.loss_model == LOSS_MODEL_MM1:
            return mm1_queue_terms(lam, mu, shape.effective_deadline)
        return gd1_queue_terms(lam, mu, shape)

    def evaluate_queues(self, x: Vector) -> QueueEvaluation:
        """
        Dropped request rate of every queue at the full allocation vector ``x``. The last evaluation is cached.
        """
        key = x.tobytes()
        if key == self._cache_key:
            return self._cache_value

        values = np.zeros(self.nb_queues)
        gradients = np.zeros([self.nb_queues, 2])
        hessians = np.zeros([self.nb_queues, 2, 2])
        ties = np.zeros(self.nb_queues, dtype=bool)
        kinks = []
        for q in np.flatnonzero(self.enabled):
            values[q], gradients[q], hessians[q], ties[q], alternatives = self.queue_terms(q, x[2 * q], x[2 * q + 1])
            kinks += [(int(q), g) for g in alternatives]

        evaluation = QueueEvaluation(values=values, gradients=gradients, hessians=hessians, ties=ties, kinks=kinks)
        self._cache_key = key
        self._cache_value = evaluation
        return evaluation

    def objective_full(self, x: Vector) -> float:
        """Negated profit of the slot at the full allocation vector"""
        evaluation = self.evaluate_queues(x)
        slot_length = self.env.slot_length
        return slot_length * float(np.sum(-self.a * x[0::2] + self.b * evaluation.values + self.c * x[1::2]))

    def gradient_full(self, x: Vector) -> Vector:
        evaluation = self.evaluate_queues(x)
        slot_length = self.env.slot_length
        gradient = np.empty(self.nb_variables)
        gradient[0::2] = slot_length * (-self.a + self.b * evaluation.gradients[:, 0])
        gradient[1::2] = slot_length * (self.c + self.b * evaluation.gradients[:, 1])
        return gradient

    def hessian_full(self, x: Vector) -> Matrix:
        evaluation = self.evaluate_queues(x)
        weights = self.env.slot_length * np.maximum(self.b, 0.0)
        hessian = np.zeros([self.nb_variables, self.nb_variables])
        for q in np.flatnonzero(self.enabled):
            hessian[2 * q:2 * q + 2, 2 * q:2 * q + 2] = weights[q] * evaluation.hessians[q]
        return hessian

    def kink_directions(self, x: Vector) -> List[Vector]:
        """
        Differences between the gradient of the objective computed with a nearly active neighbouring index
        and the gradient computed with the active index, one full vector per kink.
        """
        evaluation = self.evaluate_queues(x)
        directions = []
        for q, alternative in evaluation.kinks:
            d = np.zeros(self.nb_variables)
            d[2 * q:2 * q + 2] = self.env.slot_length * self.b[q] * (alternative - evaluation.gradients[q])
            directions.append(d)
        return directions

    def sla_values_full(self, x: Vector) -> Vector:
        """``F_q - TH_q`` for the queues with a drop threshold constraint"""
        evaluation = self.evaluate_queues(x)
        return evaluation.values[self.sla_queues] - self.thresholds[self.sla_queues]

    # ---- callbacks of the barrier solver ------------------------------------------------------------

    def objective(self, z: Vector) -> float:
        return self.objective_full(self.expand(z))

    def objective_derivatives(self, z: Vector) -> Tuple[Vector, Matrix]:
        x = self.expand(z)
        gradient = self.gradient_full(x)[self.free]
        hessian = self.hessian_full(x)[np.ix_(self.free, self.free)]
        return gradient, hessian

    def constraints(self, z: Vector) -> Vector:
        x = self.expand(z)
        linear = self.inequality_matrix @ z - self.inequality_rhs
        return np.concatenate([linear, self.sla_values_full(x)])

    def constraint_derivatives(self, z: Vector, weights: Vector) -> Tuple[Matrix, Matrix]:
        x = self.expand(z)
        evaluation = self.evaluate_queues(x)
        nb_linear = self.inequality_matrix.shape[0]
        jacobian_full = np.zeros([len(self.sla_queues), self.nb_variables])
        hessian_full = np.zeros([self.nb_variables, self.nb_variables])
        sla_weights = weights[nb_linear:]
        for row, q in enumerate(self.sla_queues):
            jacobian_full[row, 2 * q:2 * q + 2] = evaluation.gradients[q]
            hessian_full[2 * q:2 * q + 2, 2 * q:2 * q + 2] += sla_weights[row] * evaluation.hessians[q]
        jacobian = np.concatenate([self.inequality_matrix, jacobian_full[:, self.free]], axis=0)
        return jacobian, hessian_full[np.ix_(self.free, self.free)]


def _queue_coefficients(env: SlotEnvironment,
                        dcs: Sequence[DataCenterSpec],
                        classes: Sequence[ServiceClass]) -> Tuple[Vector, Vector, Vector]:
    """
    Per unit of time, the profit of a queue is ``a * lambda - b * F - c * mu``.
    """
    nb_dcs, nb_classes = len(dcs), len(classes)
    a = np.zeros([2, nb_dcs, nb_classes])
    b = np.zeros([2, nb_dcs, nb_classes])
    c = np.zeros([2, nb_dcs, nb_classes])
    for i, dc in enumerate(dcs):
        base = base_power_per_server(dc)
        proportional = proportional_power_per_server(dc)
        for supply, price in ((GREEN, dc.green_unit_cost), (BROWN, env.brown_price[i])):
            for j, cls in enumerate(classes):
                unit = price / (SECONDS_PER_HOUR * cls.per_server_capacity)
                a[supply, i, j] = cls.income - proportional * unit
                b[supply, i, j] = cls.income + cls.penalty - proportional * unit
                c[supply, i, j] = base * unit
    return a.ravel(), b.ravel(), c.ravel()


def build_problem(env: SlotEnvironment,
                  dcs: Sequence[DataCenterSpec],
                  classes: Sequence[ServiceClass],
                  options: SolveOptions = SolveOptions(),
                  frozen_alloc: Optional[Allocation] = None) -> ProblemInstance:
    """
    Assemble the slot program.

    Args:
        env: the slot environment
        dcs: the data centers
        classes: the service classes
        options: the solver options
        frozen_alloc: if not None, the request rates of this allocation are fixed and only the service rates
            are optimized. Queues with a zero frozen request rate are disabled

    Returns:
        a :class:`ProblemInstance`. ``infeasible_reason`` is set when the program is infeasible by construction
    """
    assert len(dcs) >= 1 and len(classes) >= 1, 'at least one data center and one class are required'
    assert env.nb_dcs == len(dcs), 'the environment must have one entry per data center'
    assert env.nb_classes == len(classes), 'the environment must have statistics for each class'
    check_network_delays(dcs, classes)

    nb_dcs, nb_classes = len(dcs), len(classes)
    nb_queues = 2 * nb_dcs * nb_classes
    nb_variables = 2 * nb_queues
    half = nb_dcs * nb_classes

    def queue(supply, i, j):
        return supply * half + i * nb_classes + j

    capacities = np.asarray([c.per_server_capacity for c in classes])
    class_means = env.class_means
    epsilons = options.epsilon_alloc * np.maximum(class_means, 1.0)
    degenerate_classes = [j for j in range(nb_classes) if class_means[j] < epsilons[j]]
    demand = np.where(class_means < epsilons, epsilons, class_means)
    if degenerate_classes:
        logger.info(f'degenerate demand for classes={[classes[j].name for j in degenerate_classes]}')

    green_caps = np.asarray([green_server_cap(dc, env.green_energy[i], env.slot_length) for i, dc in enumerate(dcs)])
    min_green_servers = float(np.sum(1.0 / capacities))

    enabled = np.ones(nb_queues, dtype=bool)
    for i in range(nb_dcs):
        if green_caps[i] <= min_green_servers:
            # the green servers cannot host the minimal service rate of every class
            enabled[[queue(GREEN, i, j) for j in range(nb_classes)]] = False

    fixed_values = np.zeros(nb_variables)
    is_free = np.zeros(nb_variables, dtype=bool)
    for q in np.flatnonzero(enabled):
        is_free[2 * q] = True
        is_free[2 * q + 1] = True

    if frozen_alloc is not None:
        assert frozen_alloc.nb_dcs == nb_dcs and frozen_alloc.nb_classes == nb_classes, 'frozen allocation shape'
        frozen = frozen_alloc.to_vector()[0::2]
        for q in range(nb_queues):
            if frozen[q] <= 0:
                enabled[q] = False
                is_free[2 * q] = False
                is_free[2 * q + 1] = False
            elif not enabled[q]:
                raise ValueError(f'frozen allocation routes requests to disabled queue={q}')
            else:
                is_free[2 * q] = False
                fixed_values[2 * q] = frozen[q]

    shapes = [loss_shape(env.class_stats[j], classes[j].deadline - dcs[i].network_delay, options.search)
              for i in range(nb_dcs) for j in range(nb_classes)]

    # linear inequalities G x <= h over the full vector
    rows: List[Dict[int, float]] = []
    rhs: List[float] = []
    names: List[str] = []

    def add_row(coefficients, value, name):
        rows.append(coefficients)
        rhs.append(value)
        names.append(name)

    def name_of(q):
        supply = q // half
        i = (q // nb_classes) % nb_dcs
        j = q % nb_classes
        return f'{SUPPLY_NAMES[supply]}:{dcs[i].name}:{classes[j].name}'

    for q in np.flatnonzero(enabled):
        add_row({2 * q: -1.0}, 0.0, f'alloc_nonnegative[{name_of(q)}]')
        add_row({2 * q: 1.0, 2 * q + 1: -1.0}, 0.0, f'alloc_below_rate[{name_of(q)}]')
        add_row({2 * q + 1: -1.0}, -1.0, f'rate_at_least_one[{name_of(q)}]')

    for i, dc in enumerate(dcs):
        green = [queue(GREEN, i, j) for j in range(nb_classes) if enabled[queue(GREEN, i, j)]]
        if green:
            add_row({2 * q + 1: 1.0 / capacities[q % nb_classes] for q in green}, float(green_caps[i]),
                    f'green_server_cap[{dc.name}]')
        if options.total_capacity_constraint:
            used = [q for q in (queue(s, i, j) for s in (GREEN, BROWN) for j in range(nb_classes)) if enabled[q]]
            add_row({2 * q + 1: 1.0 / capacities[q % nb_classes] for q in used}, float(dc.max_servers),
                    f'total_server_cap[{dc.name}]')

    equality_rows: List[Dict[int, float]] = []
    equality_rhs: List[float] = []
    equality_names: List[str] = []
    for j, cls in enumerate(classes):
        coefficients = {2 * queue(s, i, j): 1.0 for s in (GREEN, BROWN) for i in range(nb_dcs)}
        if options.relax_demand_equality:
            add_row(coefficients, float(demand[j]), f'demand[{cls.name}]')
        else:
            equality_rows.append(coefficients)
            equality_rhs.append(float(demand[j]))
            equality_names.append(f'demand[{cls.name}]')

    def dense(row_list):
        m = np.zeros([len(row_list), nb_variables])
        for r, coefficients in enumerate(row_list):
            for column, value in coefficients.items():
                m[r, column] = value
        return m

    infeasible_reason = _infeasible_by_construction(env, dcs, classes, options, demand, enabled, degenerate_classes)
    if infeasible_reason is not None:
        logger.info(f'slot program infeasible by construction: {infeasible_reason}')

    return ProblemInstance(
        env=env,
        dcs=dcs,
        classes=classes,
        options=options,
        demand=demand,
        degenerate_classes=degenerate_classes,
        green_caps=green_caps,
        enabled=enabled,
        fixed_values=fixed_values,
        free=np.flatnonzero(is_free),
        coefficients=_queue_coefficients(env, dcs, classes),
        shapes=shapes,
        inequality=(dense(rows), np.asarray(rhs), names),
        equality=(dense(equality_rows).reshape(len(equality_rows), nb_variables), np.asarray(equality_rhs),
                  equality_names),
        infeasible_reason=infeasible_reason,
        frozen_alloc=frozen_alloc is not None)


def _infeasible_by_construction(env: SlotEnvironment,
                                dcs: Sequence[DataCenterSpec],
                                classes: Sequence[ServiceClass],
                                options: SolveOptions,
                                demand: Vector,
                                enabled: np.ndarray,
                                degenerate_classes: List[int]) -> Optional[str]:
    nb_dcs, nb_classes = len(dcs), len(classes)
    capacities = np.asarray([c.per_server_capacity for c in classes])
    enabled = enabled.reshape([2, nb_dcs, nb_classes])

    if options.total_capacity_constraint:
        for i, dc in enumerate(dcs):
            minimal = float(np.sum(enabled[:, i, :] / capacities[None, :]))
            if minimal >= dc.max_servers:
                return f'data center `{dc.name}` needs {minimal:.6g} servers for the minimal service rates, ' \
                       f'has max_servers={dc.max_servers}'
        required = float(np.sum(demand / capacities))
        available = float(sum(dc.max_servers for dc in dcs))
        if required >= available:
            return f'the demand needs {required:.6g} servers, the data centers have {available:.6g}'

    for j, cls in enumerate(classes):
        if j in degenerate_classes:
            continue
        if cls.drop_threshold == 0 and env.class_stats[j].cv > 0:
            return f'class `{cls.name}` has drop_threshold=0 with random arrivals (cv={env.class_stats[j].cv:.6g})'
        if not np.any(enabled[:, :, j]):
            return f'class `{cls.name}` has no queue available'
    return None


def objective_gradient(point: Allocation, problem: ProblemInstance) -> ObjectiveGradient:
    """
    Gradient of the negated slot profit at an allocation.

    At a tie of the exponent minimum, the gradient of the smallest active index is returned (a valid
    subgradient) and the tie is flagged.

    Args:
        point: the allocation, with positive request rates and service rates above them
        problem: the slot program

    Returns:
        an :class:`ObjectiveGradient`
    """
    x = point.to_vector()
    assert len(x) == problem.nb_variables, 'allocation shape mismatch'
    evaluation = problem.evaluate_queues(x)
    kink_queues = sorted({q for q, _ in evaluation.kinks})
    if np.any(evaluation.ties):
        logger.debug(f'objective gradient evaluated at an argmin tie, queues={np.flatnonzero(evaluation.ties)}')
    return ObjectiveGradient(gradient=problem.gradient_full(x), ties=evaluation.ties.copy(), kink_queues=kink_queues)


def constraint_report(problem: ProblemInstance, alloc: Allocation) -> Dict[str, float]:
    """
    Slack of every constraint of the program at an allocation (negative means violated).

    Equality constraints report ``rhs - lhs``.

    Returns:
        an ordered mapping constraint name -> slack
    """
    x = alloc.to_vector()
    report = collections.OrderedDict()
    slacks = problem.inequality_rhs_full - problem.inequality_full @ x
    for name, slack in zip(problem.inequality_names_full, slacks):
        report[name] = float(slack)
    for name, slack in zip(problem.sla_names, -problem.sla_values_full(x)):
        report[name] = float(slack)
    residuals = problem.equality_rhs_full - problem.equality_full @ x
    for name, residual in zip(problem.equality_names_full, residuals):
        report[name] = float(residual)
    return report


def max_violation(problem: ProblemInstance,
                  report: Dict[str, float],
                  ignore: Sequence[str] = ()) -> Tuple[Optional[str], float]:
    """
    The most violated constraint of a report, its violation scaled by the magnitude of its right hand side.
    Constraints named in `ignore` are skipped.

    Returns:
        a tuple (name, scaled violation). The name is None if no constraint is violated
    """
    scales = dict(zip(problem.inequality_names_full, np.maximum(1.0, np.abs(problem.inequality_rhs_full))))
    scales.update(zip(problem.equality_names_full, np.maximum(1.0, np.abs(problem.equality_rhs_full))))
    equality_names = set(problem.equality_names_full)
    worst_name = None
    worst = 0.0
    for name, slack in report.items():
        if name in ignore:
            continue
        violation = abs(slack) if name in equality_names else -slack
        violation /= scales.get(name, 1.0)
        if violation > worst:
            worst = violation
            worst_name = name
    return worst_name, worst
