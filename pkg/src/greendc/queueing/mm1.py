import math


def mm1_deadline_tail(alloc_rate: float, service_rate: float, effective_deadline: float) -> float:
    """
    Probability that the waiting time of an M/M/1 queue exceeds the effective deadline:
    ``(lambda / mu) * exp(-(mu - lambda) * D')``, clamped to 1.

    Args:
        alloc_rate: request rate, requests/second
        service_rate: service rate, requests/second
        effective_deadline: deadline minus network delay, seconds

    Returns:
        a probability
    """
    assert service_rate > 0, f'service_rate must be > 0, got={service_rate}'
    if alloc_rate <= 0:
        return 0.0
    value = alloc_rate / service_rate * math.exp(-(service_rate - alloc_rate) * effective_deadline)
    return min(1.0, value)
