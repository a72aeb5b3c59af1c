"""
Trace files: delimiter-separated text, first row a header, one row per timestamp.

Columns:

- ``timestamp``: seconds (numeric) or ISO 8601 date-times, strictly increasing
- ``green_kw:<dc>``: green power available at the data center, kW
- ``price:<dc>``: grid electricity price at the data center, currency/kWh
- ``rate:<class>``: request rate of the class, requests/second
- ``rate_std:<class>`` (optional): standard deviation of the request rate over the row

Each row holds its values until the next row (step interpolation); the last row of a file holds them for
the median row spacing. The columns can be spread over several files, the slots cover the time span common
to all the files.
"""
import logging
import math
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from greendc.cli.errors import TraceError
from greendc.energy.power import SECONDS_PER_HOUR
from greendc.queueing.types import WorkloadStats
from greendc.simulation.traces import TraceSet, coarse_stats, estimate_stats
from greendc.utils.files import atomic_write

if TYPE_CHECKING:
    from greendc.cli.config import RunConfig


logger = logging.getLogger(__name__)

TIMESTAMP = 'timestamp'
GREEN_PREFIX = 'green_kw:'
PRICE_PREFIX = 'price:'
RATE_PREFIX = 'rate:'
RATE_STD_PREFIX = 'rate_std:'

# rows of the header and the first data line, for the error messages
_FIRST_DATA_ROW = 2


def required_columns(dc_names: Sequence[str], class_names: Sequence[str]) -> List[str]:
    return [GREEN_PREFIX + n for n in dc_names] + [PRICE_PREFIX + n for n in dc_names] + \
        [RATE_PREFIX + n for n in class_names]


def _read(path: str, nrows=None) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, sep=None, engine='python', nrows=nrows, skipinitialspace=True)
    except FileNotFoundError:
        raise TraceError('file not found', path=path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, ValueError) as e:
        raise TraceError(f'cannot be parsed ({e})', path=path)
    frame.columns = [str(c).strip() for c in frame.columns]
    if TIMESTAMP not in frame.columns:
        raise TraceError('missing column', path=path, row=1, column=TIMESTAMP)
    duplicated = frame.columns[frame.columns.duplicated()]
    if len(duplicated) > 0:
        raise TraceError('duplicated column', path=path, row=1, column=str(duplicated[0]))
    return frame


def _column_owners(headers: Dict[str, List[str]]) -> Dict[str, str]:
    owners = {}
    for path, columns in headers.items():
        for c in columns:
            if c == TIMESTAMP:
                continue
            if c in owners:
                raise TraceError(f'column also defined in {owners[c]}', path=path, row=1, column=c)
            owners[c] = path
    return owners


def check_trace_columns(paths: Sequence[str], dc_names: Sequence[str], class_names: Sequence[str]) -> None:
    """
    Check the headers of the trace files name a column for every data center and class

    Raises:
        TraceError: a required column is missing or defined twice
    """
    headers = {path: list(_read(path, nrows=1).columns) for path in paths}
    owners = _column_owners(headers)
    for c in required_columns(dc_names, class_names):
        if c not in owners:
            raise TraceError('missing column', path=', '.join(paths), row=1, column=c)


def _timestamps(frame: pd.DataFrame, path: str) -> Tuple[np.ndarray, bool]:
    """
    Returns:
        a tuple (seconds, is_datetime)
    """
    column = frame[TIMESTAMP]
    is_datetime = not pd.api.types.is_numeric_dtype(column)
    if is_datetime:
        parsed = pd.to_datetime(column, utc=True, errors='coerce')
        seconds = ((parsed - pd.Timestamp('1970-01-01', tz='UTC')).dt.total_seconds()).to_numpy()
    else:
        seconds = column.to_numpy(dtype=np.float64)

    bad = np.flatnonzero(~np.isfinite(seconds))
    if len(bad) > 0:
        raise TraceError(f'invalid timestamp `{column.iloc[bad[0]]}`', path=path, row=int(bad[0]) + _FIRST_DATA_ROW,
                         column=TIMESTAMP)
    steps = np.diff(seconds)
    duplicated = np.flatnonzero(steps == 0)
    if len(duplicated) > 0:
        raise TraceError('duplicated timestamp', path=path, row=int(duplicated[0]) + 1 + _FIRST_DATA_ROW,
                         column=TIMESTAMP)
    decreasing = np.flatnonzero(steps < 0)
    if len(decreasing) > 0:
        raise TraceError('non-monotone timestamp', path=path, row=int(decreasing[0]) + 1 + _FIRST_DATA_ROW,
                         column=TIMESTAMP)
    return seconds, is_datetime


def _values(frame: pd.DataFrame, column: str, path: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad) > 0:
        raise TraceError(f'not a number `{frame[column].iloc[bad[0]]}`', path=path,
                         row=int(bad[0]) + _FIRST_DATA_ROW, column=column)
    negative = np.flatnonzero(values < 0)
    if len(negative) > 0:
        raise TraceError(f'negative value {values[negative[0]]}', path=path,
                         row=int(negative[0]) + _FIRST_DATA_ROW, column=column)
    return values


class _StepSeries:
    """Piecewise constant series: ``values[k]`` holds over ``[times[k], times[k + 1])``, the last over
    ``[times[-1], end)``"""
    def __init__(self, times: np.ndarray, values: np.ndarray, end: float):
        self.times = times
        self.values = values
        self.edges = np.append(times, end)
        self.cumulative = np.concatenate([[0.0], np.cumsum(values * np.diff(self.edges))])

    def integral(self, x: float) -> float:
        """Integral of the series from its first timestamp to ``x``"""
        index = int(np.clip(np.searchsorted(self.edges, x, side='right') - 1, 0, len(self.values) - 1))
        return float(self.cumulative[index] + self.values[index] * (x - self.edges[index]))

    def average(self, start: float, end: float) -> float:
        return (self.integral(end) - self.integral(start)) / (end - start)

    def samples(self, start: float, end: float) -> np.ndarray:
        return self.values[(self.times >= start) & (self.times < end)]


def _row_step(seconds: np.ndarray, slot_length: float) -> float:
    if len(seconds) < 2:
        return slot_length
    return float(np.median(np.diff(seconds)))


def load_trace_frames(paths: Sequence[str],
                      dc_names: Sequence[str],
                      class_names: Sequence[str],
                      slot_length: float,
                      fallback_cv: float = 0.3,
                      lag_cap: int = 0) -> TraceSet:
    """
    Read the trace files and summarize them per slot.

    Args:
        paths: the trace files
        dc_names: the data centers, in the order of the configuration
        class_names: the classes, in the order of the configuration
        slot_length: duration of a slot, seconds
        fallback_cv: coefficient of variation of a class with fewer than two samples in a slot and no
            ``rate_std`` column
        lag_cap: largest autocovariance lag estimated from per-second request rates

    Returns:
        a :class:`TraceSet`
    """
    assert len(paths) > 0, 'at least one trace file is required'
    assert slot_length > 0, f'slot_length must be > 0, got={slot_length}'
    frames = {path: _read(path) for path in paths}
    owners = _column_owners({path: list(f.columns) for path, f in frames.items()})
    for c in required_columns(dc_names, class_names):
        if c not in owners:
            raise TraceError('missing column', path=', '.join(paths), row=1, column=c)

    timestamps = {}
    steps = {}
    kinds = set()
    for path, frame in frames.items():
        if len(frame) == 0:
            raise TraceError('no data row', path=path)
        seconds, is_datetime = _timestamps(frame, path)
        kinds.add(is_datetime)
        timestamps[path] = seconds
        steps[path] = _row_step(seconds, slot_length)
    if len(kinds) > 1:
        raise TraceError('timestamps mix numeric seconds and date-times across files', path=', '.join(paths),
                         column=TIMESTAMP)

    origin = max(t[0] for t in timestamps.values())
    end = min(t[-1] + steps[p] for p, t in timestamps.items())
    if len(frames) > 1 and (origin != min(t[0] for t in timestamps.values()) or
                            end != max(t[-1] + steps[p] for p, t in timestamps.items())):
        logger.warning(f'trace files cover different spans, using the common span [{origin}, {end})')
    nb_slots = int(math.floor((end - origin) / slot_length + 1e-9))
    if nb_slots < 1:
        raise TraceError(f'the traces cover {end - origin} seconds, less than one slot of {slot_length} seconds',
                         path=', '.join(paths))

    def series(column: str) -> _StepSeries:
        path = owners[column]
        return _StepSeries(timestamps[path], _values(frames[path], column, path), timestamps[path][-1] + steps[path])

    starts = origin + slot_length * np.arange(nb_slots)
    green = np.zeros([nb_slots, len(dc_names)])
    price = np.zeros([nb_slots, len(dc_names)])
    for i, name in enumerate(dc_names):
        green_series = series(GREEN_PREFIX + name)
        price_series = series(PRICE_PREFIX + name)
        for s, start in enumerate(starts):
            green[s, i] = green_series.average(start, start + slot_length) * slot_length / SECONDS_PER_HOUR
            price[s, i] = price_series.average(start, start + slot_length)

    class_stats: List[List[WorkloadStats]] = [[] for _ in range(nb_slots)]
    for name in class_names:
        rate_column = RATE_PREFIX + name
        rates = series(rate_column)
        std_series = series(RATE_STD_PREFIX + name) if RATE_STD_PREFIX + name in owners else None
        cadence = steps[owners[rate_column]]
        class_lag_cap = lag_cap
        if lag_cap > 0 and not math.isclose(cadence, 1.0):
            logger.warning(f'class={name}: the rows are {cadence} seconds apart, the autocovariance lags are '
                           f'only estimated from per-second rates and are dropped')
            class_lag_cap = 0
        for s, start in enumerate(starts):
            samples = rates.samples(start, start + slot_length)
            if len(samples) >= 2:
                class_stats[s].append(estimate_stats(samples, class_lag_cap))
                continue
            mean = rates.average(start, start + slot_length)
            std = std_series.average(start, start + slot_length) if std_series is not None else fallback_cv * mean
            class_stats[s].append(coarse_stats(mean, std))

    logger.info(f'traces loaded: files={list(paths)}, nb_slots={nb_slots}, slot_length={slot_length}')
    return TraceSet(
        slot_length=slot_length,
        green_energy=green,
        brown_price=price,
        class_stats=class_stats,
        dc_names=tuple(dc_names),
        class_names=tuple(class_names))


def load_traces(paths: Sequence[str], config: 'RunConfig') -> TraceSet:
    """
    Trace set of the data centers and classes of a configuration
    """
    return load_trace_frames(
        paths,
        dc_names=[dc.name for dc in config.dcs],
        class_names=[c.name for c in config.classes],
        slot_length=config.slot_length,
        fallback_cv=config.fallback_cv,
        lag_cap=config.lag_cap)


def traces_frame(traces: TraceSet) -> pd.DataFrame:
    """
    One row per slot: the green power, the price, the mean request rate and its standard deviation.
    The autocovariance beyond lag 0 is not represented.
    """
    columns = {TIMESTAMP: traces.slot_length * np.arange(traces.nb_slots)}
    for i, name in enumerate(traces.dc_names):
        columns[GREEN_PREFIX + name] = traces.green_energy[:, i] * SECONDS_PER_HOUR / traces.slot_length
    for i, name in enumerate(traces.dc_names):
        columns[PRICE_PREFIX + name] = traces.brown_price[:, i]
    for j, name in enumerate(traces.class_names):
        columns[RATE_PREFIX + name] = [stats[j].mean_rate for stats in traces.class_stats]
    for j, name in enumerate(traces.class_names):
        columns[RATE_STD_PREFIX + name] = [math.sqrt(stats[j].variance) for stats in traces.class_stats]
    return pd.DataFrame(columns)


def write_traces(path: str, traces: TraceSet) -> None:
    """
    Write a trace set in the format read by :func:`load_traces`, 15 significant digits, atomically
    """
    atomic_write(path, traces_frame(traces).to_csv(index=False, float_format='%.15g'))
    logger.info(f'traces written={path}, nb_slots={traces.nb_slots}')
