"""
Discrete-time Monte Carlo simulation of a finite-buffer queue with Gaussian arrivals and deterministic service.

Each tick is one second: the arrivals of the tick join the backlog, the server processes up to ``mu``
requests, and whatever exceeds the buffer of ``mu * (D - d)`` requests is dropped.

A tick can be split in sub-steps. The arrivals of the second are then spread over the sub-steps along a
Gaussian bridge, so a burst within the second overflows the buffer even if the end of second content
does not. The per-second counts, and so the statistics of the arrival process, are unchanged.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, signal, stats as scipy_stats

from greendc.basic_typing import Vector
from greendc.queueing.loss import loss_probability
from greendc.queueing.types import QueueSpec, WorkloadStats
from greendc.simulation.executor import map_jobs


logger = logging.getLogger(__name__)

# largest residual of the moving-average fit, relative to the lag-0 autocovariance
MA_FIT_TOLERANCE = 1e-6

CONFIDENCE = 0.95

# ticks whose sub-step arrivals are drawn at once
CHUNK_SIZE = 1000


@dataclass(frozen=True)
class McConfig:
    """
    Args:
        horizon: simulated time per replication, seconds
        replications: number of independent replications
        seed: seed of the arrival processes
        burn_in: initial period excluded from the estimate, seconds
        substeps: number of steps per second at which the buffer is checked
    """
    horizon: float = 100000.0
    replications: int = 20
    seed: int = 0
    burn_in: float = 1000.0
    substeps: int = 8

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(f'substeps must be >= 1, got={self.substeps}')
        if not self.burn_in >= 0:
            raise ValueError(f'burn_in must be >= 0, got={self.burn_in}')
        if not self.horizon > self.burn_in:
            raise ValueError(f'horizon must be > burn_in, got horizon={self.horizon}, burn_in={self.burn_in}')
        if self.replications < 1:
            raise ValueError(f'replications must be >= 1, got={self.replications}')


@dataclass
class QueueState:
    """
    State of the queue in every replication. Counters are cumulative since the start of the simulation.

    Args:
        backlog: requests waiting, per replication
        buffer_cap: size of the buffer, requests
        dropped: requests dropped, per replication
        served: requests served, per replication
        offered: requests arrived, per replication
    """
    backlog: np.ndarray
    buffer_cap: float
    dropped: np.ndarray = field(default=None)
    served: np.ndarray = field(default=None)
    offered: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.buffer_cap < 0:
            raise ValueError(f'buffer_cap must be >= 0, got={self.buffer_cap}')
        self.backlog = np.asarray(self.backlog, dtype=np.float64)
        for name in ('dropped', 'served', 'offered'):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(self.backlog))

    @staticmethod
    def empty(nb_replications: int, buffer_cap: float) -> 'QueueState':
        return QueueState(backlog=np.zeros(nb_replications), buffer_cap=buffer_cap)

    def step(self, arrivals: np.ndarray, service_rate: float) -> None:
        """
        Advance every replication by one tick.

        Args:
            arrivals: arrivals of the tick, shape [replications] or [replications, substeps]. Each
                sub-step serves ``service_rate / substeps`` requests before the buffer is checked
            service_rate: requests served per tick
        """
        arrivals = np.asarray(arrivals, dtype=np.float64)
        if arrivals.ndim == 1:
            arrivals = arrivals[:, None]
        assert arrivals.shape[0] == len(self.backlog), 'one row of arrivals per replication'
        service = service_rate / arrivals.shape[1]

        content = self.backlog
        dropped = np.zeros_like(content)
        for sub in range(arrivals.shape[1]):
            content = np.maximum(content + arrivals[:, sub] - service, 0.0)
            overflow = np.maximum(content - self.buffer_cap, 0.0)
            dropped += overflow
            content = content - overflow

        offered = arrivals.sum(axis=1)
        self.offered += offered
        self.served += self.backlog + offered - dropped - content
        self.dropped += dropped
        self.backlog = content


@dataclass
class McResult:
    """
    Args:
        loss_prob: dropped over offered requests after the burn-in, pooled over the replications
        half_width: half-width of the 95% confidence interval of the loss
        replication_losses: loss of each replication
        state: final state of the queue, counters include the burn-in
        clamped_fraction: fraction of the arrival draws that were negative and clamped to 0
        mean_bias: relative difference between the simulated mean arrival rate and the queue request rate,
            introduced by the clamping
        ma_fallback: True if the autocovariance could not be matched and i.i.d. arrivals were simulated
    """
    loss_prob: float
    half_width: float
    replication_losses: np.ndarray
    state: QueueState
    clamped_fraction: float
    mean_bias: float
    ma_fallback: bool

    def conservation_error(self) -> float:
        """Largest relative gap of ``offered = served + dropped + backlog`` over the replications"""
        s = self.state
        gap = np.abs(s.offered - s.served - s.dropped - s.backlog)
        return float(np.max(gap / np.maximum(s.offered, 1.0)))


def fit_moving_average(autocov: Sequence[float]) -> Tuple[Vector, bool]:
    """
    Coefficients ``theta`` of a moving-average process ``x_t = sum_k theta_k e_{t-k}`` (unit white noise)
    whose autocovariance matches ``autocov`` at lags 0..L.

    Returns:
        a tuple (theta, matched). If no real solution is found, ``theta`` describes i.i.d. draws with the
        lag-0 variance and ``matched`` is False
    """
    autocov = np.asarray(autocov, dtype=np.float64)
    variance = float(autocov[0])
    iid = np.asarray([math.sqrt(max(variance, 0.0))])
    if len(autocov) == 1 or variance == 0 or np.all(autocov[1:] == 0):
        return iid, True

    order = len(autocov)

    def residuals(theta):
        return np.asarray([np.dot(theta[:order - lag], theta[lag:]) for lag in range(order)]) - autocov

    initial = autocov / math.sqrt(variance)
    fit = optimize.least_squares(residuals, initial, method='lm', xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(residuals(fit.x))) > MA_FIT_TOLERANCE * variance:
        logger.warning(f'no moving-average process matches autocov={autocov.tolist()}, simulating i.i.d. arrivals')
        return iid, False
    return fit.x, True


def _arrivals(theta: Vector, mean: float, nb_ticks: int, random_state: np.random.RandomState) -> np.ndarray:
    order = len(theta)
    noise = random_state.randn(nb_ticks + order - 1)
    return mean + signal.lfilter(theta, [1.0], noise)[order - 1:]


def spread_arrivals(arrivals: np.ndarray, noise: np.ndarray, std: float) -> np.ndarray:
    """
    Split per-second arrivals over sub-steps along a Gaussian bridge.

    With i.i.d. arrivals of standard deviation ``std`` per second, the sub-step arrivals are i.i.d. with
    variance ``std ** 2 / substeps`` and sum exactly to the arrivals of their second.

    Args:
        arrivals: arrivals per second, any shape
        noise: standard normal draws, shape ``arrivals.shape + (substeps,)``
        std: standard deviation of the arrivals of one second

    Returns:
        an array of shape ``noise.shape``
    """
    substeps = noise.shape[-1]
    bridge = noise - np.mean(noise, axis=-1, keepdims=True)
    return arrivals[..., None] / substeps + std / math.sqrt(substeps) * bridge


def mc_loss(stats: WorkloadStats, q: QueueSpec, cfg: McConfig = McConfig()) -> McResult:
    """
    Estimate the loss probability of a queue by simulation.

    The arrivals of the queue have the mean ``q.alloc_rate`` and the autocovariance of the class scaled by
    ``(q.alloc_rate / stats.mean_rate) ** 2``. Negative draws are clamped to 0
    before the arrivals of each second are spread over ``cfg.substeps`` sub-steps.

    Args:
        stats: statistics of the class
        q: the queue
        cfg: the simulation configuration

    Returns:
        a :class:`McResult`, deterministic for a given seed
    """
    assert q.alloc_rate > 0, 'the queue must receive requests'
    theta, matched = fit_moving_average(stats.normalized_autocov)
    theta = theta * q.alloc_rate

    nb_ticks = int(round(cfg.horizon))
    burn_in = int(round(cfg.burn_in))
    arrivals = np.empty([cfg.replications, nb_ticks])
    for r in range(cfg.replications):
        arrivals[r] = _arrivals(theta, q.alloc_rate, nb_ticks, np.random.RandomState([cfg.seed, r]))
    clamped_fraction = float(np.mean(arrivals < 0))
    np.maximum(arrivals, 0.0, out=arrivals)
    mean_bias = float(np.mean(arrivals)) / q.alloc_rate - 1.0

    std = float(np.linalg.norm(theta))
    bridges = [np.random.RandomState([cfg.seed, r, 1]) for r in range(cfg.replications)]

    state = QueueState.empty(cfg.replications, q.service_rate * q.effective_deadline)
    offered_at_burn_in = np.zeros(cfg.replications)
    dropped_at_burn_in = np.zeros(cfg.replications)
    for chunk_start in range(0, nb_ticks, CHUNK_SIZE):
        chunk = arrivals[:, chunk_start:chunk_start + CHUNK_SIZE]
        if cfg.substeps > 1:
            noise = np.stack([b.randn(chunk.shape[1], cfg.substeps) for b in bridges])
            chunk = spread_arrivals(chunk, noise, std)
        for i in range(chunk.shape[1]):
            if chunk_start + i == burn_in:
                offered_at_burn_in = state.offered.copy()
                dropped_at_burn_in = state.dropped.copy()
            state.step(chunk[:, i], q.service_rate)

    offered = state.offered - offered_at_burn_in
    dropped = state.dropped - dropped_at_burn_in
    losses = np.divide(dropped, offered, out=np.zeros_like(dropped), where=offered > 0)
    loss_prob = float(np.sum(dropped) / np.sum(offered)) if np.sum(offered) > 0 else 0.0
    half_width = 0.0
    if cfg.replications > 1:
        z = scipy_stats.norm.ppf(0.5 + 0.5 * CONFIDENCE)
        half_width = float(z * np.std(losses, ddof=1) / math.sqrt(cfg.replications))

    return McResult(
        loss_prob=loss_prob,
        half_width=half_width,
        replication_losses=losses,
        state=state,
        clamped_fraction=clamped_fraction,
        mean_bias=mean_bias,
        ma_fallback=not matched)


@dataclass(frozen=True)
class BatteryCell:
    cv: float
    ratio: float
    effective_deadline: float
    mean_rate: float
    cfg: McConfig


def run_battery_cell(cell: BatteryCell) -> Dict:
    """
    Analytic and simulated loss of one i.i.d. queue
    """
    stats = WorkloadStats.iid(cell.mean_rate, cell.cv * cell.mean_rate)
    q = QueueSpec(alloc_rate=cell.mean_rate, service_rate=cell.ratio * cell.mean_rate,
                  deadline=cell.effective_deadline)
    analytic = loss_probability(stats, q).loss_prob
    simulated = mc_loss(stats, q, cell.cfg)
    return {
        'cv': cell.cv,
        'ratio': cell.ratio,
        'effective_deadline': cell.effective_deadline,
        'analytic': analytic,
        'monte_carlo': simulated.loss_prob,
        'half_width': simulated.half_width,
        'clamped_fraction': simulated.clamped_fraction,
        'mean_bias': simulated.mean_bias,
    }


@dataclass(frozen=True)
class LossBattery:
    """
    Args:
        cvs: coefficients of variation
        ratios: service rate over request rate
        effective_deadlines: deadline minus network delay, seconds
        mean_rate: request rate of the queues, requests/second
        cfg: the simulation configuration of every cell
        comparison_range: analytic losses in this range are compared
        max_log10_gap: largest accepted ``|log10(analytic) - log10(simulated)|``
        min_agreement: fraction of the compared cells that must agree
    """
    cvs: Tuple[float, ...] = (0.1, 0.3)
    ratios: Tuple[float, ...] = (1.05, 1.1, 1.2, 1.5)
    effective_deadlines: Tuple[float, ...] = (1.0, 5.0, 30.0)
    mean_rate: float = 100.0
    cfg: McConfig = McConfig()
    comparison_range: Tuple[float, float] = (1e-4, 1e-1)
    max_log10_gap: float = 0.5
    min_agreement: float = 0.8

    def cells(self) -> List[BatteryCell]:
        return [BatteryCell(cv=cv, ratio=ratio, effective_deadline=d, mean_rate=self.mean_rate, cfg=self.cfg)
                for cv in self.cvs for ratio in self.ratios for d in self.effective_deadlines]


@dataclass
class BatteryReport:
    """
    Args:
        cells: one row per cell with the analytic and simulated losses and their comparison
        nb_compared: number of cells whose analytic loss is in the comparison range
        nb_agree: number of compared cells within the accepted gap
        passed: True if enough compared cells agree
    """
    cells: pd.DataFrame
    nb_compared: int
    nb_agree: int
    passed: bool

    @property
    def agreement(self) -> float:
        return self.nb_agree / self.nb_compared if self.nb_compared else math.nan

    def outliers(self) -> pd.DataFrame:
        return self.cells[self.cells['compared'] & ~self.cells['agree']]


def loss_battery(battery: LossBattery = LossBattery(), nb_workers: int = 0) -> BatteryReport:
    """
    Compare the analytic loss with the simulated loss on a grid of queues.

    Args:
        battery: the grid and the acceptance thresholds
        nb_workers: number of worker processes. 0 runs the cells in this process

    Returns:
        a :class:`BatteryReport`
    """
    cells = battery.cells()
    rows, errors = map_jobs(run_battery_cell, cells, nb_workers=nb_workers, seed=battery.cfg.seed)
    failed = [str(e) for e in errors if e is not None]
    if failed:
        raise RuntimeError(f'loss battery cells failed: {failed}')

    frame = pd.DataFrame(rows)
    low, high = battery.comparison_range
    with np.errstate(divide='ignore'):
        gap = np.abs(np.log10(frame['analytic'].to_numpy()) - np.log10(frame['monte_carlo'].to_numpy()))
    frame['log10_gap'] = gap
    frame['compared'] = (frame['analytic'] >= low) & (frame['analytic'] <= high)
    frame['agree'] = frame['log10_gap'] <= battery.max_log10_gap

    nb_compared = int(frame['compared'].sum())
    nb_agree = int((frame['compared'] & frame['agree']).sum())
    passed = nb_compared > 0 and nb_agree >= battery.min_agreement * nb_compared
    logger.info(f'loss battery: {nb_agree}/{nb_compared} compared cells agree, passed={passed}')
    return BatteryReport(cells=frame, nb_compared=nb_compared, nb_agree=nb_agree, passed=passed)
