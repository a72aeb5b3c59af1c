from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from greendc.queueing.types import WorkloadStats


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class ServiceClass:
    """
    SLA parameters of a service class.

    Args:
        deadline: SLA deadline, seconds
        income: income per request served within the deadline, currency/request
        penalty: penalty per request missing the deadline, currency/request
        per_server_capacity: requests/second a server can process
        drop_threshold: maximal average dropped request rate per queue, requests/second
        name: display name
    """
    deadline: float
    income: float
    penalty: float
    per_server_capacity: float
    drop_threshold: float
    name: str = 'class'

    def __post_init__(self):
        _require(self.deadline > 0, f'deadline must be > 0, got={self.deadline}')
        _require(self.income >= 0, f'income must be >= 0, got={self.income}')
        _require(self.penalty >= 0, f'penalty must be >= 0, got={self.penalty}')
        _require(self.per_server_capacity > 0, f'per_server_capacity must be > 0, got={self.per_server_capacity}')
        _require(self.drop_threshold >= 0, f'drop_threshold must be >= 0, got={self.drop_threshold}')


@dataclass(frozen=True)
class DataCenterSpec:
    """
    Hardware and energy parameters of a data center.

    Args:
        idle_power: power of an idle server, kW
        peak_power: power of a fully utilized server, kW
        pue: power usage effectiveness (facility power over IT power)
        max_servers: number of servers
        network_delay: network delay experienced by the requests routed to this data center, seconds
        green_unit_cost: cost of the renewable energy, currency/kWh
        name: display name
    """
    idle_power: float
    peak_power: float
    pue: float
    max_servers: float
    network_delay: float
    green_unit_cost: float
    name: str = 'dc'

    def __post_init__(self):
        _require(self.idle_power >= 0, f'idle_power must be >= 0, got={self.idle_power}')
        _require(self.peak_power >= self.idle_power,
                 f'peak_power must be >= idle_power, got peak_power={self.peak_power}, idle_power={self.idle_power}')
        _require(self.pue >= 1, f'pue must be >= 1, got={self.pue}')
        _require(self.max_servers >= 1, f'max_servers must be >= 1, got={self.max_servers}')
        _require(self.network_delay >= 0, f'network_delay must be >= 0, got={self.network_delay}')
        _require(self.green_unit_cost >= 0, f'green_unit_cost must be >= 0, got={self.green_unit_cost}')


def check_network_delays(dcs: Sequence[DataCenterSpec], classes: Sequence[ServiceClass]) -> None:
    """
    The network delay of every data center must be smaller than the shortest class deadline.
    """
    min_deadline = min(c.deadline for c in classes)
    for dc in dcs:
        _require(dc.network_delay < min_deadline,
                 f'network_delay of `{dc.name}` must be < min deadline ({min_deadline}), got={dc.network_delay}')


@dataclass(frozen=True)
class SlotEnvironment:
    """
    Exogenous inputs of one slot.

    Args:
        green_energy: available green energy per data center over the slot, kWh
        brown_price: price of the grid electricity per data center, currency/kWh
        slot_length: duration of the slot, seconds
        class_stats: arrival statistics of each class
    """
    green_energy: np.ndarray
    brown_price: np.ndarray
    slot_length: float
    class_stats: Sequence[WorkloadStats] = field(compare=False)

    def __post_init__(self):
        green_energy = np.asarray(self.green_energy, dtype=np.float64).copy()
        brown_price = np.asarray(self.brown_price, dtype=np.float64).copy()
        _require(green_energy.shape == brown_price.shape and len(green_energy.shape) == 1,
                 'green_energy and brown_price must be 1D arrays with one value per data center')
        _require(bool(np.all(green_energy >= 0)), 'green_energy must be >= 0')
        _require(bool(np.all(brown_price >= 0)), 'brown_price must be >= 0')
        _require(self.slot_length > 0, f'slot_length must be > 0, got={self.slot_length}')
        _require(len(self.class_stats) >= 1, 'class_stats must have at least one class')
        green_energy.setflags(write=False)
        brown_price.setflags(write=False)
        object.__setattr__(self, 'green_energy', green_energy)
        object.__setattr__(self, 'brown_price', brown_price)
        object.__setattr__(self, 'class_stats', tuple(self.class_stats))

    @property
    def class_means(self) -> np.ndarray:
        """Mean request rate of each class, requests/second"""
        return np.asarray([s.mean_rate for s in self.class_stats])

    @property
    def nb_dcs(self) -> int:
        return len(self.green_energy)

    @property
    def nb_classes(self) -> int:
        return len(self.class_stats)

    def green_power(self) -> np.ndarray:
        """Average available green power per data center over the slot, kW"""
        return self.green_energy * 3600.0 / self.slot_length
