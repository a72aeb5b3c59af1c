"""
Loss probability of a G/D/1 queue fed by a Gaussian arrival process, with a finite buffer of
``mu * (D - d)`` requests standing for the SLA deadline.

The loss is ``P_L = alpha * exp(-min_n M_n / 2)``. With ``x = mu / lambda`` and the normalized
variable ``t = (x - 1) / cv`` both factors depend only on the rate ratio and on class-level constants:

- ``alpha(t) = cv / sqrt(2 pi) * (1 - h(t))`` where ``h`` is the Mills tail
- ``M_n(t) = ((D' + n) * cv * t + D')^2 / rho_n`` where ``D' = D - d`` and
  ``rho_n = n * c_0 + 2 * sum_{l=1}^{n-1} (n - l) * c_l`` with ``c_l`` the autocovariance divided by
  the squared mean rate.

The per-index term ``g_n(t) = alpha(t) * exp(-M_n(t) / 2)`` and its derivatives are exposed for the
optimizer (Newton steps) and for the convexity audit.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import special

from greendc.queueing.types import ARGMIN_AT_INFINITY, LossResult, LossShape, QueueSpec, SearchConfig, \
    WorkloadStats


logger = logging.getLogger(__name__)

SQRT_2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)

# above this value, `1 - h(t)` is evaluated from its asymptotic expansion
MILLS_ASYMPTOTIC_SWITCH = 30.0

# 1 - h(t) ~ sum_k a_k t^(-2k), k = 1..5. Truncation error below 1e-13 relative for t > 30
_ASYMPTOTIC_COEFFICIENTS = (1.0, -3.0, 15.0, -105.0, 945.0)

_LARGEST_BELOW_ONE = float(np.nextafter(1.0, 0.0))

# relative tolerance used to detect ties of the exponent minimum
TIE_TOLERANCE = 1e-12


def _complement_series(t: float, order: int = 0) -> float:
    """
    Asymptotic expansion of ``1 - h(t)`` or of its first two derivatives
    """
    total = 0.0
    for k, a in enumerate(_ASYMPTOTIC_COEFFICIENTS, start=1):
        p = -2 * k
        if order == 0:
            total += a * t ** p
        elif order == 1:
            total += a * p * t ** (p - 1)
        else:
            total += a * p * (p - 1) * t ** (p - 2)
    return total


def _scaled_tail(t: float) -> float:
    """
    ``e^{t^2/2} * integral_t^inf e^{-u^2/2} du`` evaluated without overflow
    """
    return SQRT_HALF_PI * float(special.erfcx(t / SQRT_2))


def mills_tail(t: float) -> float:
    """
    Compute ``h(t) = t * e^{t^2/2} * integral_t^inf e^{-u^2/2} du``.

    Above ``MILLS_ASYMPTOTIC_SWITCH`` the value comes from the asymptotic series of ``1 - h(t)`` rather
    than from the midpoint of :func:`mills_tail_bounds`. The result still lies between these bounds, and
    its relative error is below 1e-13.

    Args:
        t: non-negative value

    Returns:
        a value in [0, 1), nondecreasing in ``t``
    """
    assert t >= 0, f'mills_tail is defined for t >= 0, got={t}'
    if t > MILLS_ASYMPTOTIC_SWITCH:
        return min(1.0 - _complement_series(t), _LARGEST_BELOW_ONE)
    return min(t * _scaled_tail(t), _LARGEST_BELOW_ONE)


def mills_complement(t: float) -> float:
    """
    Compute ``1 - h(t)`` without cancellation for large ``t``
    """
    assert t >= 0, f'mills_complement is defined for t >= 0, got={t}'
    if t > MILLS_ASYMPTOTIC_SWITCH:
        return _complement_series(t)
    return 1.0 - t * _scaled_tail(t)


def mills_tail_bounds(t: float) -> Tuple[float, float]:
    """
    Lower and upper bounds of the Mills tail: ``2t / (t + sqrt(t^2 + 4)) <= h(t) <= 2t / (t + sqrt(t^2 + 8/pi))``
    """
    lower = 2.0 * t / (t + math.sqrt(t * t + 4.0))
    upper = 2.0 * t / (t + math.sqrt(t * t + 8.0 / math.pi))
    return lower, upper


def alpha_normalized(t: float, cv: float) -> float:
    """
    Compute the loss prefactor ``alpha(t) = cv / sqrt(2 pi) * (1 - h(t))``.

    Args:
        t: normalized excess service rate ``(mu / lambda - 1) / cv``, non-negative
        cv: coefficient of variation of the class

    Returns:
        a positive value, strictly decreasing in ``t``
    """
    assert t >= 0, f'alpha is defined for t >= 0, got={t}'
    if not cv > 0:
        raise ValueError(f'cv must be > 0, got={cv}')
    return cv / SQRT_2PI * mills_complement(t)


def alpha_bounds(t: float, cv: float) -> Tuple[float, float]:
    """
    Bracket of ``alpha(t)`` implied by the bounds of the Mills tail
    """
    lower_h, upper_h = mills_tail_bounds(t)
    c = cv / SQRT_2PI
    return c * (1.0 - upper_h), c * (1.0 - lower_h)


def alpha_derivatives(t: float, cv: float) -> Tuple[float, float, float]:
    """
    Returns:
        ``alpha(t)``, ``alpha'(t)`` and ``alpha''(t)``
    """
    assert t >= 0, f'alpha is defined for t >= 0, got={t}'
    c = cv / SQRT_2PI
    if t > MILLS_ASYMPTOTIC_SWITCH:
        return c * _complement_series(t), c * _complement_series(t, 1), c * _complement_series(t, 2)

    m = _scaled_tail(t)
    q = 1.0 - t * m
    dq = t - (1.0 + t * t) * m
    d2q = 2.0 + t * t - t * (t * t + 3.0) * m
    return c * q, c * dq, c * d2q


def alpha_raw(stats: WorkloadStats, q: QueueSpec) -> float:
    """
    Loss prefactor of a queue, expressed in terms of its request and service rates.

    The prefactor only depends on ``mu / lambda`` and on the coefficient of variation of the class. It is 0
    for deterministic arrivals.
    """
    assert q.alloc_rate > 0, 'alloc_rate == 0 is an empty queue and must be handled by the caller'
    if stats.cv == 0:
        return 0.0
    t = max(q.service_rate / q.alloc_rate - 1.0, 0.0) / stats.cv
    return alpha_normalized(t, stats.cv)


def rho_sequence(normalized_autocov: np.ndarray, n_max: int) -> np.ndarray:
    """
    Compute ``rho_n`` for n = 1..n_max.

    Lags beyond the provided autocovariance contribute 0.

    Args:
        normalized_autocov: autocovariance divided by the squared mean rate, lag 0..L
        n_max: the number of values to compute

    Returns:
        an array of ``n_max`` values, ``rho[n - 1]`` being ``rho_n``
    """
    assert n_max >= 1
    c = np.zeros(n_max)
    nb = min(n_max, len(normalized_autocov))
    c[:nb] = normalized_autocov[:nb]

    # rho_n - rho_{n-1} = c_0 + 2 * sum_{l=1}^{n-1} c_l
    partial_sums = np.concatenate([[0.0], np.cumsum(c[1:])])
    return np.cumsum(c[0] + 2.0 * partial_sums)


def loss_shape(stats: WorkloadStats, effective_deadline: float, search: Optional[SearchConfig] = None) -> LossShape:
    """
    Collect the constants of the loss model shared by every queue of a class in a data center.
    """
    if search is None:
        search = SearchConfig()
    assert effective_deadline >= 0, f'effective deadline must be >= 0, got={effective_deadline}'
    rho = rho_sequence(stats.normalized_autocov, search.n_max)
    rho.setflags(write=False)
    return LossShape(cv=stats.cv, effective_deadline=effective_deadline, rho=rho, search=search)


def _exponent_value(excess: float, n: int, effective_deadline: float, rho_n: float) -> float:
    numerator = ((effective_deadline + n) * excess + effective_deadline) ** 2
    if numerator == 0:
        return 0.0
    if rho_n <= 0:
        return math.inf
    return numerator / rho_n


def exponent_m(n: int, stats: WorkloadStats, q: QueueSpec) -> float:
    """
    Compute the exponent ``M_n`` of a queue.

    Args:
        n: positive index
        stats: class statistics
        q: the queue

    Returns:
        a non-negative value, invariant to a common scaling of the request and service rates
    """
    assert n >= 1, f'n must be a positive integer, got={n}'
    assert q.alloc_rate > 0, 'alloc_rate == 0 is an empty queue and must be handled by the caller'
    c = stats.normalized_autocov
    lags = np.arange(1, min(n, len(c)))
    rho_n = n * c[0] + 2.0 * float(np.sum((n - lags) * c[lags]))
    excess = q.service_rate / q.alloc_rate - 1.0
    return _exponent_value(excess, n, q.effective_deadline, rho_n)


def exponent_sequence(excess: float, shape: LossShape) -> np.ndarray:
    """
    ``M_n`` for n = 1..n_max given the relative excess service rate ``mu / lambda - 1``
    """
    n = np.arange(1, shape.n_max + 1)
    d = shape.effective_deadline
    numerator = ((d + n) * excess + d) ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        m = np.where(shape.rho > 0, numerator / shape.rho, np.where(numerator == 0, 0.0, np.inf))
    return m


def exponent_derivatives(t: float, n: int, shape: LossShape) -> Tuple[float, float, float]:
    """
    Returns:
        ``M_n(t)``, ``M_n'(t)`` and ``M_n''(t)`` with ``t`` the normalized excess service rate
    """
    assert 1 <= n <= shape.n_max, f'n must be in [1, {shape.n_max}], got={n}'
    rho = shape.rho[n - 1]
    assert rho > 0, 'the exponent is not differentiable for a degenerate rho_n'
    a = (shape.effective_deadline + n) * shape.cv
    b = a * t + shape.effective_deadline
    return b * b / rho, 2.0 * a * b / rho, 2.0 * a * a / rho


def _scan_minimum(m: np.ndarray, patience: int) -> Tuple[int, float, bool, bool]:
    """
    Ascending scan of the exponent with early stop once it strictly increased ``patience`` consecutive times.

    Returns:
        a tuple (argmin_n, minimum, lower_bound_only, tie). Ties are resolved toward the smaller n
    """
    n_max = len(m)
    stop = n_max
    if n_max > patience:
        increases = (m[1:] > m[:-1]).astype(np.int64)
        runs = np.convolve(increases, np.ones(patience, dtype=np.int64), mode='valid')
        hits = np.flatnonzero(runs == patience)
        if len(hits) > 0:
            stop = int(hits[0]) + patience + 1

    scanned = m[:stop]
    index = int(np.argmin(scanned))
    minimum = float(scanned[index])

    tie = False
    if math.isfinite(minimum):
        tie = int(np.sum(scanned <= minimum + TIE_TOLERANCE * max(1.0, abs(minimum)))) > 1

    lower_bound_only = bool(stop == n_max and n_max > 1 and index == n_max - 1 and m[-1] < m[-2])
    return index + 1, minimum, lower_bound_only, tie


def loss_from_ratio(x: float, shape: LossShape) -> LossResult:
    """
    Loss probability of a queue with rate ratio ``x = mu / lambda``.

    Args:
        x: the ratio of service rate over request rate, >= 1
        shape: the class constants

    Returns:
        a :class:`LossResult`
    """
    if shape.cv == 0:
        # deterministic arrivals never exceed a service rate at least as large
        return LossResult(loss_prob=0.0, log_loss=-math.inf, argmin_n=ARGMIN_AT_INFINITY, alpha=0.0, m_min=math.inf)

    search = shape.search
    excess = max(x - 1.0, 0.0)
    alpha = alpha_normalized(excess / shape.cv, shape.cv)

    lower_bound_only = False
    tie = False
    if excess < search.degeneracy_threshold:
        # the numerator is constant while rho_n grows: the infimum is 0 and is not attained
        m_min = 0.0
        argmin_n = ARGMIN_AT_INFINITY
    else:
        m = exponent_sequence(excess, shape)
        argmin_n, m_min, lower_bound_only, tie = _scan_minimum(m, search.patience)

    if alpha <= 0 or not math.isfinite(m_min):
        return LossResult(loss_prob=0.0, log_loss=-math.inf, argmin_n=argmin_n, alpha=alpha, m_min=m_min,
                          lower_bound_only=lower_bound_only, tie=tie)

    log_loss = math.log(alpha) - 0.5 * m_min
    clamped = log_loss > 0
    if clamped:
        logger.warning(f'loss probability clamped to 1 (alpha={alpha}, m_min={m_min}, cv={shape.cv})')
        log_loss = 0.0

    return LossResult(
        loss_prob=math.exp(log_loss),
        log_loss=log_loss,
        argmin_n=argmin_n,
        alpha=alpha,
        m_min=m_min,
        lower_bound_only=lower_bound_only,
        clamped=clamped,
        tie=tie)


def loss_probability(stats: WorkloadStats, q: QueueSpec, search: Optional[SearchConfig] = None) -> LossResult:
    """
    Loss probability of a queue: probability a request waits longer than the effective deadline.

    Args:
        stats: the statistics of the class
        q: the queue. ``alloc_rate`` must be positive and not larger than ``service_rate``
        search: control of the scan over the index ``n``

    Returns:
        a :class:`LossResult`
    """
    assert q.alloc_rate > 0, 'alloc_rate == 0 is an empty queue and must be handled by the caller'
    assert q.service_rate >= q.alloc_rate * (1 - 1e-12), \
        f'service_rate must be >= alloc_rate, got mu={q.service_rate}, lambda={q.alloc_rate}'
    shape = loss_shape(stats, q.effective_deadline, search)
    return loss_from_ratio(q.service_rate / q.alloc_rate, shape)


def loss_terms(x: float, shape: LossShape) -> np.ndarray:
    """
    The per-index terms ``g_n = alpha * exp(-M_n / 2)`` for n = 1..n_max. The loss is their maximum over the
    scanned indices.
    """
    excess = max(x - 1.0, 0.0)
    alpha = alpha_normalized(excess / shape.cv, shape.cv)
    return alpha * np.exp(-0.5 * exponent_sequence(excess, shape))


def loss_curvature(x: float, shape: LossShape) -> Tuple[float, float, float, LossResult]:
    """
    Loss probability and its first two derivatives with respect to the rate ratio ``x``.

    The derivatives are those of the active term ``g_n`` (the index attaining the exponent minimum),
    a valid subgradient where several indices tie.

    Returns:
        a tuple (P, dP/dx, d2P/dx2, loss result)
    """
    result = loss_from_ratio(x, shape)
    if result.loss_prob == 0 or result.clamped:
        return result.loss_prob, 0.0, 0.0, result

    if result.argmin_n == ARGMIN_AT_INFINITY:
        t = max(x - 1.0, 0.0) / shape.cv
        _, d_alpha, d2_alpha = alpha_derivatives(t, shape.cv)
        return result.loss_prob, d_alpha / shape.cv, d2_alpha / shape.cv ** 2, result

    _, d_g, d2_g = term_curvature(x, int(result.argmin_n), shape)
    return result.loss_prob, d_g, d2_g, result


def term_curvature(x: float, n: int, shape: LossShape) -> Tuple[float, float, float]:
    """
    The term ``g_n`` and its first two derivatives with respect to the rate ratio ``x``.

    Returns:
        a tuple (g_n, dg_n/dx, d2g_n/dx2)
    """
    cv = shape.cv
    t = max(x - 1.0, 0.0) / cv
    alpha, d_alpha, d2_alpha = alpha_derivatives(t, cv)
    m, dm, d2m = exponent_derivatives(t, n, shape)
    decay = math.exp(-0.5 * m)
    g = alpha * decay
    d_g = (d_alpha - 0.5 * alpha * dm) * decay
    d2_g = (d2_alpha - d_alpha * dm + alpha * (0.25 * dm * dm - 0.5 * d2m)) * decay
    return g, d_g / cv, d2_g / (cv * cv)


def g_second_derivative(t: float,
                        n: int,
                        shape: LossShape,
                        h_step: Optional[float] = None,
                        normalized: bool = False) -> float:
    """
    Central finite-difference estimate of ``g_n''(t)``.

    The stencil is evaluated on ``log g_n`` so that the exponent differences are computed exactly
    and ``g_n`` may underflow without loss of accuracy.

    Args:
        t: evaluation point, ``t >= h_step``
        n: the index of the term
        shape: the class constants
        h_step: the stencil step. If ``None``, scaled from ``t`` and ``M_n'(t)``
        normalized: if True, return ``g_n''(t) / g_n(t)``

    Returns:
        the stencil value
    """
    m, dm, _ = exponent_derivatives(t, n, shape)
    if h_step is None:
        h_step = min(1e-4 * max(1.0, t), 1e-3 / max(1.0, abs(dm)))
    assert t >= h_step, f'the stencil must stay in t >= 0, got t={t}, h_step={h_step}'

    cv = shape.cv
    d = shape.effective_deadline
    rho = shape.rho[n - 1]
    a = (d + n) * cv
    b = a * t + d
    log_alpha = math.log(alpha_normalized(t, cv))

    def log_ratio(h):
        # log g_n(t + h) - log g_n(t)
        exponent_change = a * h * (2.0 * b + a * h) / rho
        return math.log(alpha_normalized(t + h, cv)) - log_alpha - 0.5 * exponent_change

    ratio = (math.expm1(log_ratio(h_step)) + math.expm1(log_ratio(-h_step))) / (h_step * h_step)
    if normalized:
        return ratio
    return ratio * math.exp(log_alpha - 0.5 * m)


def g_second_derivative_closed_form(t: float, n: int, shape: LossShape, normalized: bool = False) -> float:
    """
    Closed form of ``g_n''(t)`` written with the derivatives of ``alpha`` substituted:

        g'' / (alpha e^{-M/2}) = [t^3 - t^2 M' + (3 + M'^2/4 - M''/2) t - M' + (c / alpha)(M' - t)] / t

    with ``c = cv / sqrt(2 pi)``.
    """
    assert t > 0, f'the closed form is defined for t > 0, got={t}'
    cv = shape.cv
    alpha = alpha_normalized(t, cv)
    m, dm, d2m = exponent_derivatives(t, n, shape)
    c_over_alpha = 1.0 / mills_complement(t)
    bracket = t ** 3 - t * t * dm + (3.0 + 0.25 * dm * dm - 0.5 * d2m) * t - dm + c_over_alpha * (dm - t)
    ratio = bracket / t
    if normalized:
        return ratio
    return ratio * alpha * math.exp(-0.5 * m)
