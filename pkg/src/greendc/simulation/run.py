import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from greendc.allocation import Allocation, BROWN, GREEN
from greendc.basic_typing import Matrix, Vector
from greendc.energy.profit import ProfitBreakdown, slot_profit
from greendc.energy.types import DataCenterSpec, ServiceClass, SlotEnvironment
from greendc.optim.problem import SolveOptions, build_problem
from greendc.optim.solve import solve
from greendc.simulation.baselines import BASELINES, BASELINE_EQUAL_SPLIT, BASELINE_MM1, baseline_equal_split, \
    baseline_mm1, normalized_profit_gain, profit_base, profit_max
from greendc.simulation.executor import map_jobs
from greendc.simulation.traces import TraceSet


logger = logging.getLogger(__name__)

STATUS_ERROR = 'error'


@dataclass(frozen=True)
class RunOptions:
    """
    Args:
        solve: options of every slot solve
        baselines: the comparators run on every slot (``mm1``, ``equal_split``)
        normalized_gain: if True, compute the normalized profit gain of the proposed allocation and of the
            baselines
        gain_grid_size: number of service rate ratios swept for the maximum profit of the normalized gain
        gain_max_ratio: largest service rate ratio swept
        nb_workers: number of worker processes solving the slots. 0 solves them in this process
    """
    solve: SolveOptions = SolveOptions()
    baselines: Tuple[str, ...] = BASELINES
    normalized_gain: bool = True
    gain_grid_size: int = 100
    gain_max_ratio: float = 4.0
    nb_workers: int = 0

    def __post_init__(self):
        for name in self.baselines:
            if name not in BASELINES:
                raise ValueError(f'unknown baseline={name}, expected one of {BASELINES}')
        if self.gain_grid_size < 2:
            raise ValueError(f'gain_grid_size must be >= 2, got={self.gain_grid_size}')
        if not self.gain_max_ratio > 1:
            raise ValueError(f'gain_max_ratio must be > 1, got={self.gain_max_ratio}')
        if self.nb_workers < 0:
            raise ValueError(f'nb_workers must be >= 0, got={self.nb_workers}')


@dataclass
class BaselineOutcome:
    """
    Args:
        status: solver status of the baseline
        profit: profit of the baseline allocation evaluated with the Gaussian arrivals model
        model_objective: profit reported by the baseline under its own model
        normalized_gain: normalized profit gain of the baseline allocation
        allocation: the baseline allocation
    """
    status: str
    profit: float
    model_objective: float
    normalized_gain: float = math.nan
    allocation: Optional[Allocation] = None


@dataclass
class SlotReport:
    """
    Outcome of one slot.

    Args:
        slot: index of the slot in the trace set
        allocation: the allocation of the proposed solve
        breakdown: the profit breakdown of ``allocation``. Per queue loss probabilities are
            ``breakdown.green_loss`` and ``breakdown.brown_loss``
        profit: slot profit, currency
        slacks: constraint slacks at ``allocation``
        status: solver status, or ``error`` if the slot could not be processed
        wall_time: seconds spent on the slot
        profit_base: profit with the service rates equal to the request rates
        profit_max: empirical maximum profit of the request rates of ``allocation``
        normalized_gain: normalized profit gain of the proposed allocation
        baselines: outcome of each comparator
        diagnostics: diagnostics of the proposed solve
        error: the failure message if ``status`` is ``error``
    """
    slot: int
    allocation: Optional[Allocation]
    breakdown: Optional[ProfitBreakdown]
    profit: float
    slacks: Dict[str, float]
    status: str
    wall_time: float
    profit_base: float = math.nan
    profit_max: float = math.nan
    normalized_gain: float = math.nan
    baselines: Dict[str, BaselineOutcome] = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)
    error: Optional[str] = None

    def queue_losses(self) -> Tuple[Matrix, Matrix]:
        """Loss probability of the green and brown queues, each shaped [nb_dcs, nb_classes]"""
        assert self.breakdown is not None, 'the slot failed'
        return self.breakdown.green_loss, self.breakdown.brown_loss


@dataclass
class RunSummary:
    """
    Args:
        reports: per slot reports, in the order of the trace set
        total_profit: sum of the slot profits
        slot_profits: profit per slot
        normalized_gains: normalized profit gain per slot
        baseline_profits: per baseline, profit per slot evaluated with the Gaussian arrivals model
        baseline_gains: per baseline, normalized profit gain per slot
        dominance_deltas: per baseline, proposed profit minus baseline profit per slot
    """
    reports: List[SlotReport]
    total_profit: float
    slot_profits: Vector
    normalized_gains: Vector
    baseline_profits: Dict[str, Vector] = field(default_factory=dict)
    baseline_gains: Dict[str, Vector] = field(default_factory=dict)
    dominance_deltas: Dict[str, Vector] = field(default_factory=dict)

    @staticmethod
    def from_reports(reports: Sequence[SlotReport], baselines: Sequence[str]) -> 'RunSummary':
        slot_profits = np.asarray([r.profit for r in reports], dtype=np.float64)
        baseline_profits = {}
        baseline_gains = {}
        dominance_deltas = {}
        for name in baselines:
            profits = np.asarray([r.baselines[name].profit if name in r.baselines else math.nan for r in reports])
            baseline_profits[name] = profits
            baseline_gains[name] = np.asarray([r.baselines[name].normalized_gain if name in r.baselines
                                               else math.nan for r in reports])
            dominance_deltas[name] = slot_profits - profits
        return RunSummary(
            reports=list(reports),
            total_profit=float(np.sum(slot_profits)),
            slot_profits=slot_profits,
            normalized_gains=np.asarray([r.normalized_gain for r in reports], dtype=np.float64),
            baseline_profits=baseline_profits,
            baseline_gains=baseline_gains,
            dominance_deltas=dominance_deltas)

    @property
    def statuses(self) -> List[str]:
        return [r.status for r in self.reports]

    def baseline_totals(self) -> Dict[str, float]:
        return {name: float(np.nansum(profits)) for name, profits in self.baseline_profits.items()}


@dataclass(frozen=True)
class SlotJob:
    slot: int
    env: SlotEnvironment
    dcs: Tuple[DataCenterSpec, ...]
    classes: Tuple[ServiceClass, ...]
    options: RunOptions


def _gain(alloc: Allocation, profit: float, job: SlotJob) -> Tuple[float, float, float]:
    if not job.options.normalized_gain:
        return math.nan, math.nan, math.nan
    search = job.options.solve.search
    base = profit_base(alloc, job.env, job.dcs, job.classes, search=search)
    maximum = profit_max(alloc, job.env, job.dcs, job.classes, grid_size=job.options.gain_grid_size,
                         max_ratio=job.options.gain_max_ratio, search=search)
    return base, maximum, normalized_profit_gain(profit, base, maximum)


def _run_baseline(name: str, job: SlotJob) -> BaselineOutcome:
    if name == BASELINE_MM1:
        result = baseline_mm1(job.env, job.dcs, job.classes, job.options.solve)
    elif name == BASELINE_EQUAL_SPLIT:
        result = baseline_equal_split(job.env, job.dcs, job.classes, job.options.solve)
    else:
        raise ValueError(f'unknown baseline={name}')

    profit = slot_profit(result.allocation, job.env, job.dcs, job.classes, search=job.options.solve.search).total
    outcome = BaselineOutcome(status=result.status, profit=profit, model_objective=result.objective,
                              allocation=result.allocation)
    if result.feasible:
        _, _, outcome.normalized_gain = _gain(result.allocation, profit, job)
    return outcome


def solve_slot(job: SlotJob) -> SlotReport:
    """
    Solve one slot and its baselines. Failures are recorded in the report.
    """
    started = time.perf_counter()
    try:
        result = solve(build_problem(job.env, job.dcs, job.classes, job.options.solve))
        report = SlotReport(
            slot=job.slot,
            allocation=result.allocation,
            breakdown=result.breakdown,
            profit=result.objective,
            slacks=result.slacks,
            status=result.status,
            wall_time=0.0,
            diagnostics=result.diagnostics)
        if result.feasible:
            report.profit_base, report.profit_max, report.normalized_gain = _gain(result.allocation,
                                                                                  result.objective, job)
        for name in job.options.baselines:
            report.baselines[name] = _run_baseline(name, job)
    except Exception as e:
        logger.warning(f'slot={job.slot} failed, E={e}')
        report = SlotReport(slot=job.slot, allocation=None, breakdown=None, profit=0.0, slacks={},
                            status=STATUS_ERROR, wall_time=0.0, error=str(e))
    report.wall_time = time.perf_counter() - started
    return report


def run(traces: TraceSet,
        dcs: Sequence[DataCenterSpec],
        classes: Sequence[ServiceClass],
        options: RunOptions = RunOptions()) -> RunSummary:
    """
    Solve every slot of a trace set.

    The slots are independent: no queue state is carried from one slot to the next.

    Args:
        traces: the trace set
        dcs: the data centers, in the order of the trace columns
        classes: the classes, in the order of the trace columns
        options: the run options

    Returns:
        a :class:`RunSummary`
    """
    assert traces.nb_dcs == len(dcs), f'the traces have {traces.nb_dcs} data centers, expected {len(dcs)}'
    assert traces.nb_classes == len(classes), f'the traces have {traces.nb_classes} classes, expected {len(classes)}'
    jobs = [SlotJob(slot=s, env=traces.slot_environment(s), dcs=tuple(dcs), classes=tuple(classes), options=options)
            for s in range(traces.nb_slots)]

    logger.info(f'run started: nb_slots={traces.nb_slots}, baselines={options.baselines}, '
                f'nb_workers={options.nb_workers}')
    reports, errors = map_jobs(solve_slot, jobs, nb_workers=options.nb_workers, seed=options.solve.seed)
    for s, error in enumerate(errors):
        if error is not None:
            reports[s] = SlotReport(slot=s, allocation=None, breakdown=None, profit=0.0, slacks={},
                                    status=STATUS_ERROR, wall_time=0.0, error=error)

    summary = RunSummary.from_reports(reports, options.baselines)
    failed = [r.slot for r in reports if r.status == STATUS_ERROR]
    if failed:
        logger.warning(f'slots failed={failed}')
    logger.info(f'run done: total profit={summary.total_profit:.10g}, baseline totals={summary.baseline_totals()}')
    return summary


def allocation_shares(summary: RunSummary, supply: int = GREEN) -> np.ndarray:
    """
    Share of each data center in the green (or brown) request rate of every class, per slot.

    Returns:
        an array shaped [nb_slots, nb_dcs, nb_classes]. Classes with no request on this supply have a
        share of 0. Failed slots are NaN
    """
    assert supply in (GREEN, BROWN), f'unknown supply={supply}'
    nb_slots = len(summary.reports)
    reference = next((r.allocation for r in summary.reports if r.allocation is not None), None)
    assert reference is not None, 'every slot failed'
    shares = np.full([nb_slots, reference.nb_dcs, reference.nb_classes], math.nan)
    for s, report in enumerate(summary.reports):
        if report.allocation is None:
            continue
        alloc = report.allocation.alloc(supply)
        totals = alloc.sum(axis=0, keepdims=True)
        shares[s] = np.divide(alloc, totals, out=np.zeros_like(alloc), where=totals > 0)
    return shares
