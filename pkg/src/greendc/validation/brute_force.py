"""
Exhaustive grid search of the slot program on tiny instances.

The request rate of every queue takes the values ``k * lambda / nb_alloc_steps`` and its service rate
``lambda_q * r`` for ``r`` on a ratio grid (and at least 1 request/second). The profit is separable per
queue given the request rates, so the scan over the allocation simplex is done per data center first,
then over the split between data centers: every grid point is covered.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from greendc.allocation import Allocation
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment
from greendc.validation.reference import reference_loss, reference_queue_profit, reference_rho


logger = logging.getLogger(__name__)

MAX_DCS = 2
MAX_CLASSES = 1


@dataclass(frozen=True)
class BruteForceGrid:
    """
    Args:
        nb_alloc_steps: the class demand is split in this many steps
        nb_rates: number of service rate ratios per request rate
        max_ratio: largest ratio of the service rate over the request rate
        n_max: number of indices of the loss exponent
        max_cost: grids whose estimated number of operations exceeds this value are rejected
    """
    nb_alloc_steps: int = 100
    nb_rates: int = 301
    max_ratio: float = 4.0
    n_max: int = 1000
    max_cost: float = 5e9

    def __post_init__(self):
        if self.nb_alloc_steps < 1:
            raise ValueError(f'nb_alloc_steps must be >= 1, got={self.nb_alloc_steps}')
        if self.nb_rates < 2:
            raise ValueError(f'nb_rates must be >= 2, got={self.nb_rates}')
        if not self.max_ratio > 1:
            raise ValueError(f'max_ratio must be > 1, got={self.max_ratio}')

    def estimated_cost(self, nb_dcs: int) -> float:
        nb_queues = 2 * nb_dcs
        loss_table = nb_queues * (self.nb_alloc_steps + 1) * self.nb_rates * self.n_max
        pairs = nb_dcs * (self.nb_alloc_steps + 1) ** 2 * self.nb_rates
        return float(loss_table + pairs)


@dataclass
class BruteForceResult:
    """
    Args:
        allocation: best grid point, None if no grid point is feasible
        profit: profit of the best grid point, currency. NaN if infeasible
        feasible: True if a feasible grid point exists
        nb_points: number of (request rate, service rate) queue configurations evaluated
    """
    allocation: Optional[Allocation]
    profit: float
    feasible: bool
    nb_points: int


@dataclass
class _QueueTable:
    """Per request rate step: the candidate service rates (ascending) and the queue profits (-inf if infeasible)"""
    rates: List[np.ndarray]
    profits: List[np.ndarray]

    def best(self, step: int) -> Tuple[float, float]:
        profits = self.profits[step]
        index = int(np.argmax(profits))
        return float(profits[index]), float(self.rates[step][index])


def _green_cap(dc: DataCenterSpec, green_energy: float, slot_length: float) -> int:
    per_server = dc.peak_power * dc.pue
    if per_server == 0:
        return int(dc.max_servers)
    return int(math.floor(green_energy * 3600.0 / slot_length / per_server * (1.0 + 1e-12)))


def _queue_table(lam_steps: np.ndarray,
                 ratios: np.ndarray,
                 cls: ServiceClass,
                 dc: DataCenterSpec,
                 price: float,
                 env: SlotEnvironment,
                 rho: np.ndarray,
                 server_limit: float) -> _QueueTable:
    stats = env.class_stats[0]
    effective_deadline = cls.deadline - dc.network_delay
    rates = []
    profits = []
    for lam in lam_steps:
        if lam == 0:
            # an empty queue keeps its minimal service rate on
            mu = np.asarray([1.0])
            loss = np.zeros(1)
        else:
            mu = lam * ratios
            if lam < 1:
                mu = np.concatenate([[1.0], mu[mu > 1.0]])
            loss = reference_loss(mu / lam, stats.cv, effective_deadline, rho)
        profit = reference_queue_profit(lam, mu, loss, cls, dc, price, env.slot_length)
        feasible = (lam * loss <= cls.drop_threshold) & (mu / cls.per_server_capacity <= server_limit)
        rates.append(mu)
        profits.append(np.where(feasible, profit, -np.inf))
    return _QueueTable(rates=rates, profits=profits)


def _best_pair(green: Tuple[np.ndarray, np.ndarray],
               brown: Tuple[np.ndarray, np.ndarray],
               rate_budget: float) -> Tuple[float, float, float]:
    """
    Best green and brown service rates with ``mu_g + mu_b <= rate_budget``

    Returns:
        a tuple (profit, mu_g, mu_b)
    """
    mu_g, p_g = green
    mu_b, p_b = brown
    prefix = np.maximum.accumulate(p_b)
    prefix_index = np.zeros(len(p_b), dtype=np.int64)
    for k in range(1, len(p_b)):
        prefix_index[k] = k if p_b[k] > prefix[k - 1] else prefix_index[k - 1]

    index = np.searchsorted(mu_b, rate_budget - mu_g, side='right') - 1
    valid = index >= 0
    totals = np.where(valid, p_g + prefix[np.maximum(index, 0)], -np.inf)
    best = int(np.argmax(totals))
    if not np.isfinite(totals[best]):
        return -math.inf, 0.0, 0.0
    return float(totals[best]), float(mu_g[best]), float(mu_b[prefix_index[index[best]]])


def brute_force_solve(env: SlotEnvironment,
                      dcs: Sequence[DataCenterSpec],
                      classes: Sequence[ServiceClass],
                      grid: BruteForceGrid = BruteForceGrid(),
                      total_capacity_constraint: bool = True) -> BruteForceResult:
    """
    Best feasible grid point of the slot program.

    Args:
        env: the slot environment
        dcs: at most two data centers
        classes: a single class
        grid: the grid resolution
        total_capacity_constraint: if True, the green and brown servers of a data center are bounded by its
            number of servers

    Returns:
        a :class:`BruteForceResult`. Deterministic
    """
    if len(dcs) > MAX_DCS or len(classes) > MAX_CLASSES:
        raise ValueError(f'brute force is limited to {MAX_DCS} data centers and {MAX_CLASSES} class, '
                         f'got {len(dcs)} data centers and {len(classes)} classes')
    cost = grid.estimated_cost(len(dcs))
    if cost > grid.max_cost:
        raise ValueError(f'grid too large: estimated cost={cost:.3g} operations, limit={grid.max_cost:.3g}')

    cls = classes[0]
    for dc in dcs:
        if not dc.network_delay < cls.deadline:
            raise ValueError(f'network_delay of `{dc.name}` must be < deadline, got={dc.network_delay}')

    stats = env.class_stats[0]
    demand = stats.mean_rate
    nb_steps = grid.nb_alloc_steps
    lam_steps = demand * np.arange(nb_steps + 1) / nb_steps
    ratios = np.linspace(1.0, grid.max_ratio, grid.nb_rates)
    rho = reference_rho(stats.autocov / stats.mean_rate ** 2, grid.n_max)

    nb_points = 0
    # per data center and share of the demand: (profit, green step, mu_g, mu_b)
    dc_tables = []
    for i, dc in enumerate(dcs):
        cap = _green_cap(dc, env.green_energy[i], env.slot_length)
        server_limit = dc.max_servers if total_capacity_constraint else math.inf
        green_enabled = cap > 1.0 / cls.per_server_capacity
        brown = _queue_table(lam_steps, ratios, cls, dc, env.brown_price[i], env, rho, server_limit)
        green = None
        if green_enabled:
            green = _queue_table(lam_steps, ratios, cls, dc, dc.green_unit_cost, env, rho,
                                 min(cap, server_limit))
        nb_points += sum(len(r) for r in brown.rates) + (sum(len(r) for r in green.rates) if green else 0)

        rate_budget = dc.max_servers * cls.per_server_capacity if total_capacity_constraint else math.inf
        best = []
        for share in range(nb_steps + 1):
            candidate = (-math.inf, 0, 0.0, 0.0)
            green_steps = range(share + 1) if green_enabled else (0,)
            for g in green_steps:
                b = share - g
                p_b, mu_b = brown.best(b)
                if green is None:
                    p_g, mu_g = 0.0, 0.0
                else:
                    p_g, mu_g = green.best(g)
                value = p_g + p_b
                if green is not None and mu_g + mu_b > rate_budget and math.isfinite(value):
                    value, mu_g, mu_b = _best_pair((green.rates[g], green.profits[g]),
                                                   (brown.rates[b], brown.profits[b]), rate_budget)
                if value > candidate[0]:
                    candidate = (value, g, mu_g, mu_b)
            best.append(candidate)
        dc_tables.append(best)

    if len(dcs) == 1:
        shares = [(nb_steps,)]
    else:
        shares = [(s, nb_steps - s) for s in range(nb_steps + 1)]

    best_profit = -math.inf
    best_shares = None
    for split in shares:
        value = sum(dc_tables[i][s][0] for i, s in enumerate(split))
        if value > best_profit:
            best_profit = value
            best_shares = split

    logger.info(f'brute force: evaluated {nb_points} queue configurations, best profit={best_profit:.10g}')
    if best_shares is None or not math.isfinite(best_profit):
        return BruteForceResult(allocation=None, profit=math.nan, feasible=False, nb_points=nb_points)

    allocation = Allocation.zeros(len(dcs), 1)
    for i, share in enumerate(best_shares):
        _, g, mu_g, mu_b = dc_tables[i][share]
        allocation.green_alloc[i, 0] = lam_steps[g]
        allocation.green_rate[i, 0] = mu_g
        allocation.brown_alloc[i, 0] = lam_steps[share - g]
        allocation.brown_rate[i, 0] = mu_b
    return BruteForceResult(allocation=allocation, profit=float(best_profit), feasible=True, nb_points=nb_points)


