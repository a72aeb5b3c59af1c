import json
import math
import os
import warnings
from unittest import TestCase

import numpy as np

import utils
from greendc.reporting import slot_records, summary_record, render, parse, write_report, round_significant, \
    FORMAT_TABLE, FORMAT_DELIMITED, FORMAT_STRUCTURED
from greendc.simulation import run, RunOptions, BASELINE_EQUAL_SPLIT


def small_run(nb_slots=2, baselines=(BASELINE_EQUAL_SPLIT,)):
    traces = utils.make_traces([[1.0 + s, 0.5] for s in range(nb_slots)],
                               [[0.05, 0.08] for _ in range(nb_slots)],
                               [[100.0 + 10.0 * s] for s in range(nb_slots)])
    dcs = [utils.make_dc('east', green_unit_cost=0.02), utils.make_dc('west', green_unit_cost=0.02)]
    classes = [utils.make_class('web')]
    options = RunOptions(baselines=baselines, gain_grid_size=10)
    return run(traces, dcs, classes, options), dcs, classes, options


class TestRecords(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.summary, cls.dcs, cls.classes, cls.options = small_run()
        cls.records = slot_records(cls.summary, cls.dcs, cls.classes, cls.options.baselines)

    def test_round_significant(self):
        assert round_significant(1.0 / 3.0) == 0.333333333333333
        assert round_significant(np.int64(3)) == 3
        assert math.isnan(round_significant(math.nan))
        assert round_significant('text') == 'text'

    def test_fixed_fields(self):
        assert len(self.records) == 2
        assert list(self.records[0]) == list(self.records[1])
        fields = list(self.records[0])
        assert fields[:3] == ['slot', 'status', 'profit']
        assert 'green_alloc:east:web' in fields
        assert 'brown_loss:west:web' in fields
        assert 'green_servers:east' in fields
        assert f'profit:{BASELINE_EQUAL_SPLIT}' in fields
        assert self.records[0]['slot'] == 0

    def test_delimited_round_trip(self):
        text = render(self.records, FORMAT_DELIMITED)
        frame = parse(text, FORMAT_DELIMITED)
        assert list(frame.columns) == list(self.records[0])
        for record, (_, row) in zip(self.records, frame.iterrows()):
            for name, value in record.items():
                if isinstance(value, float):
                    assert (math.isnan(value) and math.isnan(row[name])) or \
                        abs(row[name] - value) <= 1e-14 * max(abs(value), 1e-300), name
                elif isinstance(value, int):
                    assert row[name] == value
                else:
                    assert str(row[name]) == value or (value == '' and row[name] == ''), name

    def test_structured_round_trip(self):
        text = render(self.records, FORMAT_STRUCTURED)
        lines = text.splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert list(first) == list(self.records[0])
        frame = parse(text, FORMAT_STRUCTURED)
        assert abs(frame['profit'][1] - self.records[1]['profit']) <= 1e-14 * abs(self.records[1]['profit'])

    def test_structured_infinite_values(self):
        records = [{'gap': math.inf, 'loss': 1.0, 'name': 'a'}, {'gap': 2.0, 'loss': -math.inf, 'name': 'inf'}]
        text = render(records, FORMAT_STRUCTURED)
        with warnings.catch_warnings():
            warnings.simplefilter('error', FutureWarning)
            frame = parse(text, FORMAT_STRUCTURED)
        assert frame['gap'].dtype == np.float64
        assert frame['gap'][0] == math.inf
        assert frame['loss'][1] == -math.inf
        assert list(frame['name']) == ['a', 'inf']

    def test_table(self):
        text = render(self.records, FORMAT_TABLE)
        assert text.splitlines()[0].split()[:3] == ['slot', 'status', 'profit']
        assert len(text.splitlines()) == 3

    def test_deterministic(self):
        summary, dcs, classes, options = small_run()
        records = slot_records(summary, dcs, classes, options.baselines)
        assert render(records, FORMAT_DELIMITED) == render(self.records, FORMAT_DELIMITED)
        assert render([summary_record(summary)], FORMAT_STRUCTURED) == \
            render([summary_record(self.summary)], FORMAT_STRUCTURED)

    def test_summary(self):
        record = summary_record(self.summary)
        assert record['nb_slots'] == 2
        assert record['nb_failed'] == 0
        assert record[f'dominated_slots:{BASELINE_EQUAL_SPLIT}'] <= 2
        assert abs(record['total_profit'] - self.summary.total_profit) <= 1e-14 * abs(self.summary.total_profit)

    def test_failed_slot_record(self):
        traces = utils.make_traces([[0.0]], [[0.1]], [[100.0]])
        dcs = [utils.make_dc('far', network_delay=2.0)]
        classes = [utils.make_class(deadline=1.0)]
        summary = run(traces, dcs, classes, RunOptions(baselines=(), normalized_gain=False))
        records = slot_records(summary, dcs, classes, ())
        assert records[0]['status'] == 'error'
        assert math.isnan(records[0]['green_alloc:far:web'])
        assert 'network_delay' in records[0]['error']
        ok_records = slot_records(self.summary, self.dcs[:1], self.classes, ())
        assert len(records[0]) == len(ok_records[0])

    def test_write_report(self):
        path = os.path.join(utils.root_output, 'reports', 'slots.csv')
        text = write_report(path, self.records, FORMAT_DELIMITED)
        with open(path, newline='') as f:
            assert f.read() == text
