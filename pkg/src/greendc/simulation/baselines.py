"""
Comparators of the proposed allocation and the reference profits of the normalized profit gain.
"""
import dataclasses
import logging
import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from greendc.allocation import Allocation
from greendc.energy.profit import LOSS_MODEL_GD1, LOSS_MODEL_MM1, slot_profit
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment
from greendc.optim.problem import SolveOptions, build_problem, green_server_cap
from greendc.optim.solve import SolveResult, solve
from greendc.queueing.types import SearchConfig


logger = logging.getLogger(__name__)

BASELINE_MM1 = 'mm1'
BASELINE_EQUAL_SPLIT = 'equal_split'
BASELINES = (BASELINE_MM1, BASELINE_EQUAL_SPLIT)

# fraction of the green servers filled by the equal split requests. The rest is left for the service rates
EQUAL_SPLIT_GREEN_FILL = 0.8


def normalized_profit_gain(profit: float, base: float, maximum: float) -> float:
    """
    ``(profit - base) / (maximum - base)``.

    Returns:
        the gain, or NaN when ``maximum == base`` (the gain is undefined)
    """
    if maximum == base:
        logger.warning(f'normalized profit gain undefined: base == max == {base}')
        return math.nan
    return (profit - base) / (maximum - base)


def profit_base(alloc: Allocation,
                env: SlotEnvironment,
                dcs: Sequence[DataCenterSpec],
                classes: Sequence[ServiceClass],
                loss_model: str = LOSS_MODEL_GD1,
                search: Optional[SearchConfig] = None) -> float:
    """
    Profit of the request rates of ``alloc`` served with a service rate equal to the request rate.
    """
    base = Allocation(alloc.green_alloc, alloc.green_alloc, alloc.brown_alloc, alloc.brown_alloc)
    return slot_profit(base, env, dcs, classes, loss_model=loss_model, search=search).total


def profit_max(alloc: Allocation,
               env: SlotEnvironment,
               dcs: Sequence[DataCenterSpec],
               classes: Sequence[ServiceClass],
               grid_size: int = 100,
               max_ratio: float = 4.0,
               loss_model: str = LOSS_MODEL_GD1,
               search: Optional[SearchConfig] = None) -> float:
    """
    Empirical maximum of the profit of the request rates of ``alloc``: the service rate of every queue is
    swept over ``lambda * x`` for ``x`` in ``[1, max_ratio]`` (and the service rate of ``alloc``) and the best
    value of each queue is kept. The capacity constraints are not enforced.
    """
    assert grid_size >= 2, 'the grid needs at least 2 points'
    assert max_ratio > 1, f'max_ratio must be > 1, got={max_ratio}'
    best = slot_profit(alloc, env, dcs, classes, loss_model=loss_model, search=search).queue_profits()
    for ratio in np.linspace(1.0, max_ratio, grid_size):
        candidate = Allocation(alloc.green_alloc, alloc.green_alloc * ratio,
                               alloc.brown_alloc, alloc.brown_alloc * ratio)
        profits = slot_profit(candidate, env, dcs, classes, loss_model=loss_model,
                              search=search).queue_profits()
        best = np.maximum(best, profits)
    return float(np.sum(best))


def baseline_mm1(env: SlotEnvironment,
                 dcs: Sequence[DataCenterSpec],
                 classes: Sequence[ServiceClass],
                 options: SolveOptions = SolveOptions()) -> SolveResult:
    """
    The slot program solved with the loss probability of an M/M/1 queue,
    ``P = (lambda / mu) * exp(-(mu - lambda) * (D - d))``, in place of the Gaussian arrivals model.

    This comparator is a reconstruction: the objective of the returned result is the profit under the
    M/M/1 model.
    """
    options = dataclasses.replace(options, loss_model=LOSS_MODEL_MM1)
    return solve(build_problem(env, dcs, classes, options))


def equal_split_allocation(env: SlotEnvironment,
                           dcs: Sequence[DataCenterSpec],
                           classes: Sequence[ServiceClass]) -> Allocation:
    """
    Request rates of the equal split: every data center receives ``1 / N`` of each class. Within a data
    center the green queues take the requests up to ``EQUAL_SPLIT_GREEN_FILL`` of the green servers, the
    remainder of the class is spread equally over the brown queues.

    Returns:
        the allocation, service rates set to 0
    """
    nb_dcs, nb_classes = len(dcs), len(classes)
    demand = env.class_means
    capacities = np.asarray([c.per_server_capacity for c in classes])
    share = demand / nb_dcs

    green = np.zeros([nb_dcs, nb_classes])
    for i, dc in enumerate(dcs):
        cap = green_server_cap(dc, env.green_energy[i], env.slot_length)
        if cap <= np.sum(1.0 / capacities):
            continue
        needed = float(np.sum(share / capacities))
        fraction = min(1.0, EQUAL_SPLIT_GREEN_FILL * cap / needed) if needed > 0 else 0.0
        green[i] = fraction * share

    remainder = demand - green.sum(axis=0)
    brown = np.repeat(remainder[None, :] / nb_dcs, nb_dcs, axis=0)
    zeros = np.zeros([nb_dcs, nb_classes])
    return Allocation(green_alloc=green, green_rate=zeros, brown_alloc=brown, brown_rate=zeros.copy())


def baseline_equal_split(env: SlotEnvironment,
                         dcs: Sequence[DataCenterSpec],
                         classes: Sequence[ServiceClass],
                         options: SolveOptions = SolveOptions()) -> SolveResult:
    """
    Single data center design adapted to several data centers: the request rates are frozen to
    :func:`equal_split_allocation` and only the service rates are optimized.
    """
    frozen = equal_split_allocation(env, dcs, classes)
    return solve(build_problem(env, dcs, classes, options, frozen_alloc=frozen))


def green_energy_sweep(env: SlotEnvironment,
                       dcs: Sequence[DataCenterSpec],
                       classes: Sequence[ServiceClass],
                       increases: Sequence[float],
                       options: Optional[SolveOptions] = None) -> pd.DataFrame:
    """
    Profit of the proposed solve and of the equal split baseline as the available green energy of every
    data center grows by the given relative increases.

    Returns:
        a frame with columns ``green_increase``, ``proposed``, ``equal_split`` and their statuses. Both
        profits are computed with the Gaussian arrivals model
    """
    if options is None:
        options = SolveOptions()
    rows = []
    for increase in increases:
        assert increase >= -1, f'the green energy cannot be negative, got increase={increase}'
        scaled = dataclasses.replace(env, green_energy=env.green_energy * (1.0 + increase))
        proposed = solve(build_problem(scaled, dcs, classes, options))
        split = baseline_equal_split(scaled, dcs, classes, options)
        rows.append({
            'green_increase': float(increase),
            'proposed': proposed.objective,
            'equal_split': slot_profit(split.allocation, scaled, dcs, classes).total,
            'proposed_status': proposed.status,
            'equal_split_status': split.status,
        })
        logger.info(f'green increase={increase}: proposed={proposed.objective:.6g}')
    return pd.DataFrame(rows, columns=['green_increase', 'proposed', 'equal_split', 'proposed_status',
                                       'equal_split_status'])

