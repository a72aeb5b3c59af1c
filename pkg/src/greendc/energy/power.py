from typing import Sequence, Tuple

import numpy as np

from greendc.energy.types import DataCenterSpec, ServiceClass


SECONDS_PER_HOUR = 3600.0


def base_power_per_server(dc: DataCenterSpec) -> float:
    """
    Power drawn by a server that is on, whatever its load (idle power plus facility overhead), kW
    """
    return dc.idle_power + (dc.pue - 1.0) * dc.peak_power


def proportional_power_per_server(dc: DataCenterSpec) -> float:
    """
    Power drawn by a fully utilized server on top of its base power, kW
    """
    return dc.peak_power - dc.idle_power


def total_power(m: float, utilization: float, dc: DataCenterSpec) -> float:
    """
    Power of ``m`` servers running at a given CPU utilization.

    Args:
        m: number of servers that are on (fractional servers are allowed)
        utilization: average CPU utilization in [0, 1]
        dc: the data center

    Returns:
        the power, kW
    """
    if not 0 <= utilization <= 1:
        raise ValueError(f'utilization must be in [0, 1], got={utilization}')
    assert m >= 0, f'number of servers must be >= 0, got={m}'
    return m * base_power_per_server(dc) + m * proportional_power_per_server(dc) * utilization


def server_usage(alloc_rates: Sequence[float],
                 service_rates: Sequence[float],
                 classes: Sequence[ServiceClass],
                 losses: Sequence[float]) -> Tuple[float, float]:
    """
    Number of servers and CPU utilization of the queues of one supply (green or brown) of a data center.

    Args:
        alloc_rates: request rate of each class
        service_rates: service rate of each class
        classes: the classes
        losses: loss probability of each class

    Returns:
        a tuple (servers, utilization). The utilization is 0 when no server is on
    """
    capacities = np.asarray([c.per_server_capacity for c in classes])
    servers = float(np.sum(np.asarray(service_rates) / capacities))
    busy = float(np.sum((1.0 - np.asarray(losses)) * np.asarray(alloc_rates) / capacities))
    if servers <= 0:
        return 0.0, 0.0
    return servers, busy / servers


def queue_power(alloc_rates: Sequence[float],
                service_rates: Sequence[float],
                classes: Sequence[ServiceClass],
                dc: DataCenterSpec,
                losses: Sequence[float]) -> np.ndarray:
    """
    Power drawn by each per-class queue of one data center.

    The servers of a class run at rate ``per_server_capacity``, so ``service_rate / per_server_capacity``
    servers are on and only the requests not lost load their CPU. Green and brown servers follow the same
    model.

    Returns:
        the power of each class, kW
    """
    capacities = np.asarray([c.per_server_capacity for c in classes])
    service_rates = np.asarray(service_rates, dtype=np.float64)
    served = (1.0 - np.asarray(losses, dtype=np.float64)) * np.asarray(alloc_rates, dtype=np.float64)
    return base_power_per_server(dc) * service_rates / capacities + \
        proportional_power_per_server(dc) * served / capacities


def green_power(alloc_rates: Sequence[float],
                service_rates: Sequence[float],
                classes: Sequence[ServiceClass],
                dc: DataCenterSpec,
                losses: Sequence[float]) -> float:
    """
    Power drawn by the green servers of one data center serving the given per-class request and service
    rates, kW
    """
    return float(np.sum(queue_power(alloc_rates, service_rates, classes, dc, losses)))


def energy_kwh(power_kw: float, slot_length: float) -> float:
    """
    Energy consumed over a slot by a constant power, kWh
    """
    return power_kw * slot_length / SECONDS_PER_HOUR
