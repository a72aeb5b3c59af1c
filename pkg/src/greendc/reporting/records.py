"""
Report records of the command line: one record per slot with a fixed field order, rendered as an aligned
table, delimiter-separated values or structured records (one JSON object per line). Numbers are serialized
with 15 significant digits.
"""
import io
import json
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from greendc.allocation import BROWN, GREEN, SUPPLY_NAMES
from greendc.energy.power import server_usage
from greendc.energy.types import DataCenterSpec, ServiceClass
from greendc.simulation.run import RunSummary, SlotReport, STATUS_ERROR
from greendc.utils.files import atomic_write


FORMAT_TABLE = 'table'
FORMAT_DELIMITED = 'delimiter-separated'
FORMAT_STRUCTURED = 'structured-records'
FORMATS = (FORMAT_TABLE, FORMAT_DELIMITED, FORMAT_STRUCTURED)

FLOAT_FORMAT = '%.15g'

# how infinite values are written in structured records
INFINITE_VALUES = {'inf': math.inf, '-inf': -math.inf}

REPORT_EXTENSIONS = {
    FORMAT_TABLE: '.txt',
    FORMAT_DELIMITED: '.csv',
    FORMAT_STRUCTURED: '.jsonl',
}


def round_significant(value: Any) -> Any:
    """Round floats to 15 significant digits, other values are unchanged"""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return value
        return float(FLOAT_FORMAT % value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def slot_record(report: SlotReport,
                dcs: Sequence[DataCenterSpec],
                classes: Sequence[ServiceClass],
                baselines: Sequence[str]) -> Dict[str, Any]:
    """
    Flat record of one slot. The fields and their order only depend on the data centers, the classes and
    the baselines, failed slots included.
    """
    record = {
        'slot': report.slot,
        'status': report.status,
        'profit': report.profit,
        'green_profit': math.nan,
        'brown_profit': math.nan,
        'profit_base': report.profit_base,
        'profit_max': report.profit_max,
        'normalized_gain': report.normalized_gain,
    }
    if report.breakdown is not None:
        record['green_profit'] = report.breakdown.green_profit
        record['brown_profit'] = report.breakdown.brown_profit

    for supply in (GREEN, BROWN):
        name = SUPPLY_NAMES[supply]
        for i, dc in enumerate(dcs):
            for j, cls in enumerate(classes):
                suffix = f'{dc.name}:{cls.name}'
                alloc = rate = loss = math.nan
                if report.allocation is not None:
                    alloc = report.allocation.alloc(supply)[i, j]
                    rate = report.allocation.rate(supply)[i, j]
                    loss = report.queue_losses()[supply][i, j]
                record[f'{name}_alloc:{suffix}'] = alloc
                record[f'{name}_rate:{suffix}'] = rate
                record[f'{name}_loss:{suffix}'] = loss

    for i, dc in enumerate(dcs):
        servers = utilization = math.nan
        if report.allocation is not None:
            servers, utilization = server_usage(report.allocation.green_alloc[i], report.allocation.green_rate[i],
                                                classes, report.breakdown.green_loss[i])
        record[f'green_servers:{dc.name}'] = servers
        record[f'green_utilization:{dc.name}'] = utilization

    for name in baselines:
        outcome = report.baselines.get(name)
        record[f'profit:{name}'] = outcome.profit if outcome is not None else math.nan
        record[f'gain:{name}'] = outcome.normalized_gain if outcome is not None else math.nan
        record[f'status:{name}'] = outcome.status if outcome is not None else ''

    record['failing_pairs'] = ';'.join(report.diagnostics.get('failing_pairs', []))
    record['error'] = report.error or ''
    return {name: round_significant(value) for name, value in record.items()}


def slot_records(summary: RunSummary,
                 dcs: Sequence[DataCenterSpec],
                 classes: Sequence[ServiceClass],
                 baselines: Sequence[str]) -> List[Dict[str, Any]]:
    return [slot_record(r, dcs, classes, baselines) for r in summary.reports]


def summary_record(summary: RunSummary) -> Dict[str, Any]:
    """
    Totals of a run: the profit of the proposed allocations and of each baseline, the number of failed slots
    and the slots where a baseline did better than the proposed allocation
    """
    record = {
        'nb_slots': len(summary.reports),
        'nb_failed': sum(1 for s in summary.statuses if s == STATUS_ERROR),
        'total_profit': summary.total_profit,
        'mean_normalized_gain': float(np.nanmean(summary.normalized_gains))
        if np.any(np.isfinite(summary.normalized_gains)) else math.nan,
    }
    for name, total in summary.baseline_totals().items():
        record[f'total_profit:{name}'] = total
        gains = summary.baseline_gains[name]
        record[f'mean_normalized_gain:{name}'] = float(np.nanmean(gains)) if np.any(np.isfinite(gains)) else math.nan
        deltas = summary.dominance_deltas[name]
        record[f'dominated_slots:{name}'] = int(np.sum(deltas >= 0))
    return {name: round_significant(value) for name, value in record.items()}


def _json_value(value: Any) -> Any:
    value = round_significant(value)
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no NaN or infinity
        return None if math.isnan(value) else ('inf' if value > 0 else '-inf')
    return value


def render(records: Sequence[Mapping[str, Any]], fmt: str = FORMAT_TABLE) -> str:
    """
    Render records sharing the same fields.

    Args:
        records: the records, all with the same fields in the same order
        fmt: one of ``table``, ``delimiter-separated``, ``structured-records``

    Returns:
        the text of the report
    """
    assert fmt in FORMATS, f'unknown format={fmt}, expected one of {FORMATS}'
    if fmt == FORMAT_STRUCTURED:
        lines = [json.dumps({name: _json_value(value) for name, value in record.items()}) for record in records]
        return ''.join(line + '\n' for line in lines)

    frame = pd.DataFrame.from_records(list(records))
    if fmt == FORMAT_DELIMITED:
        return frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep='nan')
    return frame.to_string(index=False, float_format=lambda v: FLOAT_FORMAT % v) + '\n'


def parse(text: str, fmt: str) -> pd.DataFrame:
    """
    Parse a report rendered with ``delimiter-separated`` or ``structured-records``
    """
    if fmt == FORMAT_STRUCTURED:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        frame = pd.DataFrame.from_records(rows)
        for name in frame.columns:
            column = frame[name]
            if column.dtype == object and column.isin(list(INFINITE_VALUES)).any():
                values = column.map(lambda v: INFINITE_VALUES.get(v, v) if isinstance(v, str) else v)
                # a text column may hold the same strings
                if values.map(lambda v: v is None or isinstance(v, (int, float))).all():
                    frame[name] = pd.to_numeric(values)
        return frame
    assert fmt == FORMAT_DELIMITED, f'format={fmt} cannot be parsed'
    return pd.read_csv(io.StringIO(text), keep_default_na=False, na_values=['nan', 'NaN'])


def write_report(path: str, records: Sequence[Mapping[str, Any]], fmt: str = FORMAT_TABLE) -> str:
    """
    Render the records and write them atomically to ``path``

    Returns:
        the rendered text
    """
    text = render(records, fmt)
    atomic_write(path, text)
    return text


def report_filename(name: str, fmt: str, extension: Optional[str] = None) -> str:
    return name + (extension if extension is not None else REPORT_EXTENSIONS[fmt])
