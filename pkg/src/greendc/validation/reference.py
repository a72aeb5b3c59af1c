"""
Straight-line re-implementation of the loss and profit formulas.

Nothing here imports the queueing, energy or optim modules beyond their domain types: these functions are
the independent side of the oracles.
"""
import math
from typing import Sequence

import numpy as np
from scipy import stats as scipy_stats

from greendc.allocation import Allocation
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment


# relative excess service rate below which the exponent infimum is its limit 0
DEGENERATE_EXCESS = 1e-9


def reference_mills_tail(t: Sequence[float]) -> np.ndarray:
    """
    ``t * e^{t^2/2} * integral_t^inf e^{-u^2/2} du`` through the log survival function of the standard normal
    """
    t = np.asarray(t, dtype=np.float64)
    return t * math.sqrt(2.0 * math.pi) * np.exp(0.5 * t * t + scipy_stats.norm.logsf(t))


def reference_alpha(t: Sequence[float], cv: float) -> np.ndarray:
    return cv / math.sqrt(2.0 * math.pi) * (1.0 - reference_mills_tail(t))


def reference_rho(normalized_autocov: Sequence[float], n_max: int) -> np.ndarray:
    """
    ``rho_n = n c_0 + 2 sum_{l=1}^{n-1} (n - l) c_l`` for n = 1..n_max, one index at a time
    """
    c = list(normalized_autocov)
    rho = np.zeros(n_max)
    for n in range(1, n_max + 1):
        value = n * c[0]
        for lag in range(1, min(n, len(c))):
            value += 2.0 * (n - lag) * c[lag]
        rho[n - 1] = value
    return rho


def reference_loss(ratios: Sequence[float], cv: float, effective_deadline: float, rho: np.ndarray) -> np.ndarray:
    """
    Loss probability for each rate ratio ``mu / lambda``, the exponent minimum taken over every index

    Args:
        ratios: the rate ratios, each >= 1
        cv: coefficient of variation of the class
        effective_deadline: deadline minus network delay, seconds
        rho: the output of :func:`reference_rho`

    Returns:
        the probabilities, clamped to 1
    """
    ratios = np.atleast_1d(np.asarray(ratios, dtype=np.float64))
    if cv == 0:
        return np.zeros(len(ratios))

    excess = np.maximum(ratios - 1.0, 0.0)
    alpha = reference_alpha(excess / cv, cv)
    n = np.arange(1, len(rho) + 1)
    numerator = ((effective_deadline + n[None, :]) * excess[:, None] + effective_deadline) ** 2
    m_min = np.min(numerator / rho[None, :], axis=1)
    m_min = np.where(excess < DEGENERATE_EXCESS, 0.0, m_min)
    return np.minimum(alpha * np.exp(-0.5 * m_min), 1.0)


def reference_queue_profit(lam: np.ndarray,
                           mu: np.ndarray,
                           loss: np.ndarray,
                           cls: ServiceClass,
                           dc: DataCenterSpec,
                           price: float,
                           slot_length: float) -> np.ndarray:
    """
    Revenue minus energy cost of a queue over the slot. The arguments broadcast.
    """
    served = (1.0 - loss) * lam
    revenue = (served * cls.income - loss * lam * cls.penalty) * slot_length
    idle_and_overhead = dc.idle_power + (dc.pue - 1.0) * dc.peak_power
    power = idle_and_overhead * mu / cls.per_server_capacity + \
        (dc.peak_power - dc.idle_power) * served / cls.per_server_capacity
    return revenue - price * power * slot_length / 3600.0


def reference_slot_profit(alloc: Allocation,
                          env: SlotEnvironment,
                          dcs: Sequence[DataCenterSpec],
                          classes: Sequence[ServiceClass],
                          n_max: int = 1000) -> float:
    """
    Slot profit summed queue by queue
    """
    total = 0.0
    for j, cls in enumerate(classes):
        stats = env.class_stats[j]
        rho = reference_rho(stats.autocov / stats.mean_rate ** 2, n_max)
        for i, dc in enumerate(dcs):
            effective_deadline = cls.deadline - dc.network_delay
            queues = (
                (alloc.green_alloc[i, j], alloc.green_rate[i, j], dc.green_unit_cost),
                (alloc.brown_alloc[i, j], alloc.brown_rate[i, j], env.brown_price[i]),
            )
            for lam, mu, price in queues:
                loss = 0.0
                if lam > 0:
                    loss = float(reference_loss([mu / lam], stats.cv, effective_deadline, rho)[0])
                total += float(reference_queue_profit(lam, mu, loss, cls, dc, price, env.slot_length))
    return total
