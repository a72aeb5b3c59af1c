import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from greendc.basic_typing import Matrix, RateSamples
from greendc.energy.power import SECONDS_PER_HOUR
from greendc.energy.types import SlotEnvironment
from greendc.queueing.types import WorkloadStats


logger = logging.getLogger(__name__)

# smallest mean request rate of a class. Below, the class is served by the degenerate demand path
MIN_CLASS_RATE = 1e-9


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class TraceSet:
    """
    Exogenous inputs of a sequence of slots of equal length.

    Args:
        slot_length: duration of a slot, seconds
        green_energy: green energy available per slot and data center, kWh, shaped [nb_slots, nb_dcs]
        brown_price: grid price per slot and data center, currency/kWh, shaped [nb_slots, nb_dcs]
        class_stats: per slot, the arrival statistics of each class
        dc_names: names of the data centers (trace column suffixes)
        class_names: names of the classes (trace column suffixes)
    """
    slot_length: float
    green_energy: Matrix
    brown_price: Matrix
    class_stats: Sequence[Sequence[WorkloadStats]] = field(compare=False)
    dc_names: Tuple[str, ...] = ()
    class_names: Tuple[str, ...] = ()

    def __post_init__(self):
        green_energy = np.asarray(self.green_energy, dtype=np.float64).copy()
        brown_price = np.asarray(self.brown_price, dtype=np.float64).copy()
        _require(self.slot_length > 0, f'slot_length must be > 0, got={self.slot_length}')
        _require(len(green_energy.shape) == 2, 'green_energy must be shaped [nb_slots, nb_dcs]')
        _require(green_energy.shape == brown_price.shape,
                 f'green_energy shape={green_energy.shape} and brown_price shape={brown_price.shape} differ')
        _require(len(self.class_stats) == green_energy.shape[0],
                 f'class_stats has {len(self.class_stats)} slots, expected {green_energy.shape[0]}')
        _require(bool(np.all(green_energy >= 0)), 'green_energy must be >= 0')
        _require(bool(np.all(brown_price >= 0)), 'brown_price must be >= 0')
        _require(green_energy.shape[0] >= 1, 'at least one slot is required')
        class_stats = tuple(tuple(s) for s in self.class_stats)
        nb_classes = len(class_stats[0])
        _require(nb_classes >= 1, 'at least one class is required')
        _require(all(len(s) == nb_classes for s in class_stats), 'every slot must have the same classes')
        for stats in class_stats:
            for s in stats:
                _require(isinstance(s, WorkloadStats), f'expected WorkloadStats, got={type(s)}')

        dc_names = tuple(self.dc_names) or tuple(f'dc{i}' for i in range(green_energy.shape[1]))
        class_names = tuple(self.class_names) or tuple(f'class{j}' for j in range(nb_classes))
        _require(len(dc_names) == green_energy.shape[1], 'one name per data center is required')
        _require(len(class_names) == nb_classes, 'one name per class is required')

        green_energy.setflags(write=False)
        brown_price.setflags(write=False)
        object.__setattr__(self, 'green_energy', green_energy)
        object.__setattr__(self, 'brown_price', brown_price)
        object.__setattr__(self, 'class_stats', class_stats)
        object.__setattr__(self, 'dc_names', dc_names)
        object.__setattr__(self, 'class_names', class_names)

    @property
    def nb_slots(self) -> int:
        return self.green_energy.shape[0]

    @property
    def nb_dcs(self) -> int:
        return self.green_energy.shape[1]

    @property
    def nb_classes(self) -> int:
        return len(self.class_names)

    def slot_environment(self, slot: int) -> SlotEnvironment:
        return SlotEnvironment(
            green_energy=self.green_energy[slot],
            brown_price=self.brown_price[slot],
            slot_length=self.slot_length,
            class_stats=self.class_stats[slot])

    def class_means(self) -> Matrix:
        """Mean request rate per slot and class, shaped [nb_slots, nb_classes]"""
        return np.asarray([[s.mean_rate for s in stats] for stats in self.class_stats])

    def select(self, slots: Sequence[int]) -> 'TraceSet':
        """
        Sub-sequence (or permutation) of the slots
        """
        slots = list(slots)
        return TraceSet(
            slot_length=self.slot_length,
            green_energy=self.green_energy[slots],
            brown_price=self.brown_price[slots],
            class_stats=[self.class_stats[s] for s in slots],
            dc_names=self.dc_names,
            class_names=self.class_names)


def estimate_stats(samples: RateSamples, lag_cap: int) -> WorkloadStats:
    """
    Gaussian arrival statistics of one class from its request rate sampled every second over a slot.

    The variance and the autocovariance use the biased estimator (denominator ``n``), which keeps the
    autocovariance sequence positive semi-definite.

    Args:
        samples: the request rates, requests/second
        lag_cap: largest lag of the autocovariance. Lags up to ``min(lag_cap, n - 1)`` are estimated

    Returns:
        the :class:`WorkloadStats`. A null mean is floored to ``MIN_CLASS_RATE`` with no variance
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError('cannot estimate the statistics of an empty series')
    assert len(samples.shape) == 1, 'expected a 1D series'
    assert len(samples) >= 2, f'at least 2 samples are required, got={len(samples)}'
    assert lag_cap >= 0, f'lag_cap must be >= 0, got={lag_cap}'

    n = len(samples)
    mean = float(np.mean(samples))
    if mean <= MIN_CLASS_RATE:
        return WorkloadStats(mean_rate=MIN_CLASS_RATE, variance=0.0)

    deviations = samples - mean
    nb_lags = min(lag_cap, n - 1) + 1
    autocov = np.asarray([deviations[:n - lag] @ deviations[lag:] / n for lag in range(nb_lags)])
    autocov[0] = max(autocov[0], 0.0)
    autocov[1:] = np.clip(autocov[1:], -autocov[0], autocov[0])
    return WorkloadStats(mean_rate=mean, variance=float(autocov[0]), autocov=autocov)


def coarse_stats(mean: float, std: float) -> WorkloadStats:
    """
    I.i.d. statistics of a class known only through its mean and standard deviation over the slot.
    """
    if mean <= MIN_CLASS_RATE:
        return WorkloadStats(mean_rate=MIN_CLASS_RATE, variance=0.0)
    return WorkloadStats.iid(mean, max(std, 0.0))


@dataclass(frozen=True)
class DcTraceSpec:
    """
    Hourly green power and price profile of a data center.

    The green power is ``mean + amplitude * cos(2 pi (h - phase) / 24) + trend * h`` kW at hour ``h``, clipped
    at 0, with Gaussian noise of standard deviation ``green_noise_kw``. The price follows the same
    shape. Over ``[trough_start, trough_end)`` hours, the price is multiplied by ``trough_factor``.
    """
    green_mean_kw: float = 0.0
    green_amplitude_kw: float = 0.0
    green_phase_hours: float = 12.0
    green_trend_kw_per_hour: float = 0.0
    green_noise_kw: float = 0.0
    price_mean: float = 0.1
    price_amplitude: float = 0.0
    price_phase_hours: float = 18.0
    price_noise: float = 0.0
    trough_start: Optional[float] = None
    trough_end: Optional[float] = None
    trough_factor: float = 1.0

    def __post_init__(self):
        _require(self.green_mean_kw >= 0, f'green_mean_kw must be >= 0, got={self.green_mean_kw}')
        _require(self.price_mean >= 0, f'price_mean must be >= 0, got={self.price_mean}')
        _require(self.green_noise_kw >= 0 and self.price_noise >= 0, 'noise levels must be >= 0')
        _require(self.trough_factor >= 0, f'trough_factor must be >= 0, got={self.trough_factor}')


@dataclass(frozen=True)
class ClassTraceSpec:
    """
    Diurnal workload of a class: mean rate ``mean_rate * (1 + amplitude * cos(2 pi (h - phase) / 24))`` at
    hour ``h``, per-second Gaussian samples with coefficient of variation ``cv``, clamped at 0.
    """
    mean_rate: float
    diurnal_amplitude: float = 0.0
    phase_hours: float = 15.0
    cv: float = 0.3

    def __post_init__(self):
        _require(self.mean_rate > 0, f'mean_rate must be > 0, got={self.mean_rate}')
        _require(0 <= self.diurnal_amplitude < 1, f'diurnal_amplitude must be in [0, 1), got={self.diurnal_amplitude}')
        _require(self.cv >= 0, f'cv must be >= 0, got={self.cv}')


@dataclass(frozen=True)
class TraceSpec:
    """
    Parameters of a synthetic trace set.

    Args:
        dcs: one profile per data center
        classes: one profile per class
        nb_slots: number of slots
        slot_length: slot duration, seconds
        samples_per_slot: per-second workload samples drawn per slot (at most ``slot_length``)
        lag_cap: largest autocovariance lag estimated from the samples
        start_hour: hour of the day of the first slot
    """
    dcs: Tuple[DcTraceSpec, ...]
    classes: Tuple[ClassTraceSpec, ...]
    nb_slots: int = 24
    slot_length: float = 3600.0
    samples_per_slot: int = 600
    lag_cap: int = 0
    start_hour: float = 0.0
    dc_names: Tuple[str, ...] = ()
    class_names: Tuple[str, ...] = ()

    def __post_init__(self):
        _require(len(self.dcs) >= 1, 'at least one data center profile is required')
        _require(len(self.classes) >= 1, 'at least one class profile is required')
        _require(self.nb_slots >= 1, f'nb_slots must be >= 1, got={self.nb_slots}')
        _require(self.slot_length > 0, f'slot_length must be > 0, got={self.slot_length}')
        _require(2 <= self.samples_per_slot <= self.slot_length,
                 f'samples_per_slot must be in [2, slot_length], got={self.samples_per_slot}')
        _require(self.lag_cap >= 0, f'lag_cap must be >= 0, got={self.lag_cap}')


def _diurnal(hours: np.ndarray, phase: float) -> np.ndarray:
    return np.cos(2 * math.pi * (hours - phase) / 24.0)


def hourly_profiles(spec: TraceSpec, hours: np.ndarray, random_state: np.random.RandomState) -> Tuple[Matrix, Matrix]:
    """
    Green power (kW) and price profiles at the given hours, shaped [len(hours), nb_dcs].
    """
    green = np.zeros([len(hours), len(spec.dcs)])
    price = np.zeros([len(hours), len(spec.dcs)])
    for i, dc in enumerate(spec.dcs):
        green[:, i] = dc.green_mean_kw + dc.green_amplitude_kw * _diurnal(hours, dc.green_phase_hours) + \
            dc.green_trend_kw_per_hour * hours
        price[:, i] = dc.price_mean + dc.price_amplitude * _diurnal(hours, dc.price_phase_hours)
        if dc.green_noise_kw > 0:
            green[:, i] += dc.green_noise_kw * random_state.randn(len(hours))
        if dc.price_noise > 0:
            price[:, i] += dc.price_noise * random_state.randn(len(hours))
        if dc.trough_start is not None and dc.trough_end is not None:
            hour_of_day = np.mod(hours, 24.0)
            in_trough = (hour_of_day >= dc.trough_start) & (hour_of_day < dc.trough_end)
            price[in_trough, i] *= dc.trough_factor
    return np.maximum(green, 0.0), np.maximum(price, 0.0)


def synth_traces(spec: TraceSpec, seed: int) -> TraceSet:
    """
    Generate a synthetic trace set: diurnal workload, green power and price profiles.

    Green power and prices are evaluated at the start of each slot and held over the slot. The workload of
    each slot is drawn second by second and summarized by :func:`estimate_stats`.

    Args:
        spec: the generator parameters
        seed: seed of the random generator. The same seed gives the same trace set

    Returns:
        a :class:`TraceSet`
    """
    random_state = np.random.RandomState(seed)
    hours = spec.start_hour + np.arange(spec.nb_slots) * spec.slot_length / SECONDS_PER_HOUR
    green_kw, price = hourly_profiles(spec, hours, random_state)

    class_stats: List[List[WorkloadStats]] = []
    for s in range(spec.nb_slots):
        seconds = hours[s] + np.arange(spec.samples_per_slot) / SECONDS_PER_HOUR
        stats = []
        for c in spec.classes:
            means = c.mean_rate * (1.0 + c.diurnal_amplitude * _diurnal(seconds, c.phase_hours))
            samples = means + c.cv * means * random_state.randn(spec.samples_per_slot)
            stats.append(estimate_stats(np.maximum(samples, 0.0), spec.lag_cap))
        class_stats.append(stats)

    logger.info(f'synthetic traces: nb_slots={spec.nb_slots}, nb_dcs={len(spec.dcs)}, '
                f'nb_classes={len(spec.classes)}, seed={seed}')
    return TraceSet(
        slot_length=spec.slot_length,
        green_energy=green_kw * spec.slot_length / SECONDS_PER_HOUR,
        brown_price=price,
        class_stats=class_stats,
        dc_names=spec.dc_names,
        class_names=spec.class_names)
