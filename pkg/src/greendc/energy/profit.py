from typing import List, Optional, Sequence, Tuple

import numpy as np

from greendc.allocation import Allocation, GREEN, BROWN, SUPPLY_NAMES
from greendc.energy.power import energy_kwh, proportional_power_per_server, queue_power, SECONDS_PER_HOUR
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment
from greendc.queueing.loss import loss_from_ratio, loss_shape
from greendc.queueing.mm1 import mm1_deadline_tail
from greendc.queueing.types import SearchConfig


LOSS_MODEL_GD1 = 'gd1'
LOSS_MODEL_MM1 = 'mm1'
LOSS_MODELS = (LOSS_MODEL_GD1, LOSS_MODEL_MM1)


def class_revenue(lam: float, loss: float, cls: ServiceClass, slot_length: float) -> float:
    """
    Revenue of a queue over a slot: income of the requests served within the deadline minus the
    penalty of the late ones.
    """
    assert 0 <= loss <= 1, f'loss must be a probability, got={loss}'
    assert lam >= 0, f'request rate must be >= 0, got={lam}'
    return (1.0 - loss) * cls.income * lam * slot_length - loss * cls.penalty * lam * slot_length


def queue_losses(alloc: Allocation,
                 env: SlotEnvironment,
                 dcs: Sequence[DataCenterSpec],
                 classes: Sequence[ServiceClass],
                 loss_model: str = LOSS_MODEL_GD1,
                 search: Optional[SearchConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Loss probability of every green and brown queue. A queue without requests has no loss.

    Returns:
        a tuple (green losses, brown losses), each shaped [nb_dcs, nb_classes]
    """
    assert loss_model in LOSS_MODELS, f'unknown loss model={loss_model}'
    losses = np.zeros([2, len(dcs), len(classes)])
    for i, dc in enumerate(dcs):
        for j, cls in enumerate(classes):
            effective_deadline = cls.deadline - dc.network_delay
            shape = None
            for supply in (GREEN, BROWN):
                lam = alloc.alloc(supply)[i, j]
                mu = alloc.rate(supply)[i, j]
                if lam <= 0:
                    continue
                if loss_model == LOSS_MODEL_MM1:
                    losses[supply, i, j] = mm1_deadline_tail(lam, mu, effective_deadline)
                else:
                    if shape is None:
                        shape = loss_shape(env.class_stats[j], effective_deadline, search)
                    losses[supply, i, j] = loss_from_ratio(mu / lam, shape).loss_prob
    return losses[GREEN], losses[BROWN]


class ProfitBreakdown:
    """
    Revenue and energy cost of every green and brown queue of a slot, each shaped [nb_dcs, nb_classes], in
    currency.
    """
    def __init__(self,
                 green_revenue: np.ndarray,
                 green_cost: np.ndarray,
                 brown_revenue: np.ndarray,
                 brown_cost: np.ndarray,
                 green_loss: np.ndarray,
                 brown_loss: np.ndarray,
                 green_energy: np.ndarray,
                 brown_energy: np.ndarray):
        self.green_revenue = green_revenue
        self.green_cost = green_cost
        self.brown_revenue = brown_revenue
        self.brown_cost = brown_cost
        self.green_loss = green_loss
        self.brown_loss = brown_loss
        self.green_energy = green_energy
        self.brown_energy = brown_energy

    @property
    def green_profit(self) -> float:
        return float(np.sum(self.green_revenue - self.green_cost))

    @property
    def brown_profit(self) -> float:
        return float(np.sum(self.brown_revenue - self.brown_cost))

    @property
    def total(self) -> float:
        return self.green_profit + self.brown_profit

    def queue_profits(self) -> np.ndarray:
        """
        Returns:
            profit of each queue shaped [2, nb_dcs, nb_classes], supply first
        """
        return np.stack([self.green_revenue - self.green_cost, self.brown_revenue - self.brown_cost])

    def dc_profits(self) -> np.ndarray:
        return self.queue_profits().sum(axis=(0, 2))

    def as_dict(self, dc_names: Sequence[str], class_names: Sequence[str]) -> dict:
        """
        Nested dictionary of the breakdown: supply / dc / class / {revenue, cost, loss}
        """
        values = {
            GREEN: (self.green_revenue, self.green_cost, self.green_loss),
            BROWN: (self.brown_revenue, self.brown_cost, self.brown_loss),
        }
        d = {'total': self.total, 'green_profit': self.green_profit, 'brown_profit': self.brown_profit}
        for supply, (revenue, cost, loss) in values.items():
            per_dc = {}
            for i, dc_name in enumerate(dc_names):
                per_dc[dc_name] = {
                    class_name: {'revenue': revenue[i, j], 'cost': cost[i, j], 'loss': loss[i, j]}
                    for j, class_name in enumerate(class_names)
                }
            d[SUPPLY_NAMES[supply]] = per_dc
        return d


def slot_profit(alloc: Allocation,
                env: SlotEnvironment,
                dcs: Sequence[DataCenterSpec],
                classes: Sequence[ServiceClass],
                loss_model: str = LOSS_MODEL_GD1,
                search: Optional[SearchConfig] = None) -> ProfitBreakdown:
    """
    Green and brown profit of a slot.

    The energy of each queue is its share of the data center power (base load of the servers that are
    on plus the load of the requests served) over the slot, priced at the green unit cost or the brown
    price of the data center.

    Args:
        alloc: the allocation
        env: the slot environment
        dcs: the data centers
        classes: the classes
        loss_model: ``gd1`` (Gaussian arrivals, deterministic service) or ``mm1``
        search: control of the scan of the loss exponent

    Returns:
        a :class:`ProfitBreakdown`
    """
    assert alloc.nb_dcs == len(dcs) and alloc.nb_classes == len(classes), 'allocation shape mismatch'
    green_loss, brown_loss = queue_losses(alloc, env, dcs, classes, loss_model=loss_model, search=search)

    slot_length = env.slot_length
    income = np.asarray([c.income for c in classes])[None, :]
    penalty = np.asarray([c.penalty for c in classes])[None, :]
    green_price = np.asarray([dc.green_unit_cost for dc in dcs])[:, None]
    brown_price = env.brown_price[:, None]

    def revenue(lam, loss):
        return (1.0 - loss) * income * lam * slot_length - loss * penalty * lam * slot_length

    def energy(lam, mu, loss):
        power = np.stack([queue_power(lam[i], mu[i], classes, dc, loss[i]) for i, dc in enumerate(dcs)])
        return energy_kwh(power, slot_length)

    green_energy = energy(alloc.green_alloc, alloc.green_rate, green_loss)
    brown_energy = energy(alloc.brown_alloc, alloc.brown_rate, brown_loss)
    return ProfitBreakdown(
        green_revenue=revenue(alloc.green_alloc, green_loss),
        green_cost=green_price * green_energy,
        brown_revenue=revenue(alloc.brown_alloc, brown_loss),
        brown_cost=brown_price * brown_energy,
        green_loss=green_loss,
        brown_loss=brown_loss,
        green_energy=green_energy,
        brown_energy=brown_energy)


def profitability_margins(classes: Sequence[ServiceClass],
                          dcs: Sequence[DataCenterSpec],
                          env: SlotEnvironment) -> np.ndarray:
    """
    Income per request minus the worst-case energy cost of processing it, for every (data center, class).

    Returns:
        margins in currency/request, shaped [nb_dcs, nb_classes]
    """
    margins = np.zeros([len(dcs), len(classes)])
    for i, dc in enumerate(dcs):
        unit_cost = max(env.brown_price[i], dc.green_unit_cost) / SECONDS_PER_HOUR
        for j, cls in enumerate(classes):
            margins[i, j] = cls.income - proportional_power_per_server(dc) / cls.per_server_capacity * unit_cost
    return margins


def profitability_check(classes: Sequence[ServiceClass],
                        dcs: Sequence[DataCenterSpec],
                        env: SlotEnvironment) -> np.ndarray:
    """
    Returns:
        boolean array [nb_dcs, nb_classes], True where serving the class at the data center is profitable
        (a sufficient condition for the slot program to be convex)
    """
    return profitability_margins(classes, dcs, env) > 0


def failing_pairs(profitable: np.ndarray,
                  dcs: Sequence[DataCenterSpec],
                  classes: Sequence[ServiceClass]) -> List[Tuple[str, str]]:
    """
    Returns:
        the (data center name, class name) pairs that are not profitable
    """
    return [(dcs[i].name, classes[j].name) for i, j in zip(*np.nonzero(~profitable))]
