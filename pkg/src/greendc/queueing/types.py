import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


# `argmin_n` of a loss result when the infimum over n is not attained (vanishing sequence)
ARGMIN_AT_INFINITY = math.inf

# relative slack allowed by the Cauchy-Schwarz check of the autocovariance
AUTOCOV_TOLERANCE = 1e-9


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class WorkloadStats:
    """
    Gaussian arrival statistics of one service class over one slot.

    Args:
        mean_rate: mean request rate, in requests/second
        variance: variance of the request rate, in (requests/second)^2
        autocov: autocovariance for lag 0..L (lag unit is one second). ``autocov[0]`` must equal ``variance``.
            If ``None``, arrivals are i.i.d. (``autocov = [variance]``)
    """
    mean_rate: float
    variance: float
    autocov: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        _require(self.mean_rate > 0, f'mean_rate must be > 0, got={self.mean_rate}')
        _require(self.variance >= 0, f'variance must be >= 0, got={self.variance}')
        autocov = self.autocov
        if autocov is None:
            autocov = [self.variance]
        autocov = np.asarray(autocov, dtype=np.float64).copy()
        _require(len(autocov.shape) == 1 and len(autocov) >= 1, 'autocov must be a non-empty 1D sequence')
        _require(math.isclose(autocov[0], self.variance, rel_tol=1e-12, abs_tol=1e-300),
                 f'autocov[0] must equal variance, got={autocov[0]} vs {self.variance}')
        _require(bool(np.all(np.abs(autocov) <= autocov[0] * (1 + AUTOCOV_TOLERANCE))),
                 'autocov must satisfy |autocov[l]| <= autocov[0]')
        _require(math.isfinite(self.cv), 'coefficient of variation must be finite')
        autocov.setflags(write=False)
        object.__setattr__(self, 'autocov', autocov)

    @staticmethod
    def iid(mean_rate: float, std: float) -> 'WorkloadStats':
        return WorkloadStats(mean_rate=mean_rate, variance=std ** 2)

    @property
    def cv(self) -> float:
        """Coefficient of variation"""
        return math.sqrt(self.variance) / self.mean_rate

    @property
    def normalized_autocov(self) -> np.ndarray:
        """
        Autocovariance divided by ``mean_rate ** 2``. The lag-0 value is ``cv ** 2``.

        The allocation fraction scales the autocovariance and the squared mean alike, so this sequence is
        the same for every queue of the class.
        """
        return self.autocov / self.mean_rate ** 2


@dataclass(frozen=True)
class QueueSpec:
    """
    One green or brown queue of a (data center, class) pair.

    Args:
        alloc_rate: request rate routed to the queue, requests/second
        service_rate: service rate, requests/second
        deadline: SLA deadline of the class, seconds
        network_delay: network delay to the data center, seconds

    Note:
        ``alloc_rate > service_rate`` is accepted here since the Monte Carlo oracle simulates overloaded
        queues. The analytic loss model requires ``alloc_rate <= service_rate``
        (see :meth:`in_loss_model_region`).
    """
    alloc_rate: float
    service_rate: float
    deadline: float
    network_delay: float = 0.0

    def __post_init__(self):
        _require(self.alloc_rate >= 0, f'alloc_rate must be >= 0, got={self.alloc_rate}')
        _require(self.service_rate >= 0, f'service_rate must be >= 0, got={self.service_rate}')
        _require(self.network_delay >= 0, f'network_delay must be >= 0, got={self.network_delay}')
        _require(self.deadline >= self.network_delay,
                 f'deadline must be >= network_delay, got deadline={self.deadline}, '
                 f'network_delay={self.network_delay}')

    @property
    def effective_deadline(self) -> float:
        return self.deadline - self.network_delay

    def in_loss_model_region(self) -> bool:
        """
        ``0 < alloc_rate <= service_rate`` and ``service_rate >= 1``
        """
        return 0 < self.alloc_rate <= self.service_rate and self.service_rate >= 1


@dataclass(frozen=True)
class SearchConfig:
    """
    Control of the scan over the index ``n`` of the loss exponent.

    Args:
        n_max: largest index scanned
        patience: the scan stops once the exponent strictly increased this many consecutive times
        degeneracy_threshold: if ``(mu - lambda) / lambda`` is below this value, the exponent infimum is 0
    """
    n_max: int = 1000
    patience: int = 50
    degeneracy_threshold: float = 1e-9

    def __post_init__(self):
        _require(self.n_max >= 1, f'n_max must be >= 1, got={self.n_max}')
        _require(self.patience >= 1, f'patience must be >= 1, got={self.patience}')
        _require(self.degeneracy_threshold >= 0, 'degeneracy_threshold must be >= 0')


@dataclass(frozen=True)
class LossResult:
    """
    Loss probability of one queue.

    Args:
        loss_prob: probability in [0, 1]
        log_loss: natural log of ``loss_prob``
        argmin_n: index attaining the exponent minimum or ``ARGMIN_AT_INFINITY``
        alpha: prefactor of the loss
        m_min: exponent minimum over the scanned indices
        lower_bound_only: the scan reached ``n_max`` while the exponent was still decreasing, so ``m_min``
            only bounds the infimum from above and ``loss_prob`` is a lower bound
        clamped: the computed value exceeded 1 and was clamped
        tie: the exponent minimum is attained at several indices; the smallest is reported
    """
    loss_prob: float
    log_loss: float
    argmin_n: Union[int, float]
    alpha: float
    m_min: float
    lower_bound_only: bool = False
    clamped: bool = False
    tie: bool = False


@dataclass(frozen=True)
class LossShape:
    """
    Scale-free constants that fully determine the loss probability of a queue as a function of the
    rate ratio ``x = mu / lambda``: the coefficient of variation, the effective deadline and the
    ``rho_n`` sequence for n = 1..n_max.

    All the green and brown queues of a (data center, class) pair share the same shape.
    """
    cv: float
    effective_deadline: float
    rho: np.ndarray = field(compare=False)
    search: SearchConfig = SearchConfig()

    @property
    def n_max(self) -> int:
        return len(self.rho)
