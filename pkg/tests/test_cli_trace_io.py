import math
import os
import tempfile
from unittest import TestCase

import numpy as np

import utils
from greendc.cli import TraceError, load_config, load_traces, load_trace_frames, check_trace_columns, write_traces, \
    required_columns
from greendc.queueing import WorkloadStats
from greendc.simulation import TraceSet, estimate_stats


def write_file(text, name='traces.csv'):
    folder = tempfile.mkdtemp(dir=utils.root_output)
    path = os.path.join(folder, name)
    with open(path, 'w') as f:
        f.write(text)
    return path


def hourly_text(nb_hours=24, green_kw=4.0):
    lines = ['timestamp,green_kw:dc0,price:dc0,rate:web']
    for h in range(nb_hours):
        lines.append(f'{3600 * h},{green_kw},{0.05 + 0.001 * h},{100 + h}')
    return '\n'.join(lines) + '\n'


class TestLoadTraces(TestCase):
    def test_hourly_step_expansion(self):
        path = write_file(hourly_text())
        traces = load_trace_frames([path], ['dc0'], ['web'], slot_length=900.0)
        assert traces.nb_slots == 96
        assert traces.dc_names == ('dc0',)
        # 4 kW over a quarter of an hour
        assert np.allclose(traces.green_energy, 1.0, rtol=1e-12)
        for s in range(96):
            hour = s // 4
            assert abs(traces.brown_price[s, 0] - (0.05 + 0.001 * hour)) < 1e-12
            stats = traces.class_stats[s][0]
            assert abs(stats.mean_rate - (100 + hour)) < 1e-9
            assert abs(stats.cv - 0.3) < 1e-9

    def test_iso_timestamps(self):
        lines = ['timestamp,green_kw:dc0,price:dc0,rate:web']
        for h in range(3):
            lines.append(f'2024-06-01T{h:02d}:00:00Z,2.0,0.1,50')
        path = write_file('\n'.join(lines) + '\n')
        traces = load_trace_frames([path], ['dc0'], ['web'], slot_length=1800.0)
        assert traces.nb_slots == 6
        assert np.allclose(traces.green_energy, 1.0)

    def test_tab_delimiter(self):
        text = 'timestamp\tgreen_kw:dc0\tprice:dc0\trate:web\n0\t4\t0.1\t10\n3600\t4\t0.2\t10\n'
        traces = load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=3600.0)
        assert traces.nb_slots == 2
        assert np.allclose(traces.brown_price[:, 0], [0.1, 0.2])

    def test_rate_std_column(self):
        text = 'timestamp,green_kw:dc0,price:dc0,rate:web,rate_std:web\n0,0,0.1,100,5\n3600,0,0.1,100,20\n'
        traces = load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=3600.0)
        assert traces.nb_slots == 2
        assert abs(math.sqrt(traces.class_stats[0][0].variance) - 5.0) < 1e-9
        assert abs(math.sqrt(traces.class_stats[1][0].variance) - 20.0) < 1e-9

    def test_duplicated_timestamp(self):
        text = 'timestamp,green_kw:dc0,price:dc0,rate:web\n0,1,0.1,10\n3600,1,0.1,10\n3600,1,0.1,10\n'
        with self.assertRaises(TraceError) as context:
            load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.row == 4
        assert context.exception.column == 'timestamp'
        assert 'duplicated timestamp' in str(context.exception)

    def test_non_monotone_timestamp(self):
        text = 'timestamp,green_kw:dc0,price:dc0,rate:web\n0,1,0.1,10\n7200,1,0.1,10\n3600,1,0.1,10\n'
        with self.assertRaises(TraceError) as context:
            load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.row == 4
        assert 'non-monotone' in str(context.exception)

    def test_negative_value(self):
        text = 'timestamp,green_kw:dc0,price:dc0,rate:web\n0,1,0.1,10\n3600,1,0.1,10\n7200,1,-0.1,10\n'
        with self.assertRaises(TraceError) as context:
            load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.row == 4
        assert context.exception.column == 'price:dc0'
        assert 'row 4' in str(context.exception)

    def test_not_a_number(self):
        text = 'timestamp,green_kw:dc0,price:dc0,rate:web\n0,1,0.1,10\n3600,abc,0.1,10\n'
        with self.assertRaises(TraceError) as context:
            load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.row == 3
        assert context.exception.column == 'green_kw:dc0'

    def test_missing_column(self):
        text = 'timestamp,green_kw:dc0,price:dc0\n0,1,0.1\n'
        with self.assertRaises(TraceError) as context:
            load_trace_frames([write_file(text)], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.column == 'rate:web'
        assert context.exception.exit_code == 2

    def test_missing_file(self):
        with self.assertRaises(TraceError):
            load_trace_frames([os.path.join(utils.root_output, 'missing.csv')], ['dc0'], ['web'], slot_length=900.0)

    def test_per_second_rates(self):
        rates = [10.0, 12.0, 9.0, 11.0, 13.0, 8.0, 10.0, 12.0]
        lines = ['timestamp,green_kw:dc0,price:dc0,rate:web']
        for t, r in enumerate(rates):
            lines.append(f'{t},0,0.1,{r}')
        traces = load_trace_frames([write_file('\n'.join(lines) + '\n')], ['dc0'], ['web'], slot_length=4.0,
                                   lag_cap=1)
        assert traces.nb_slots == 2
        for s in range(2):
            expected = estimate_stats(rates[4 * s:4 * s + 4], lag_cap=1)
            stats = traces.class_stats[s][0]
            assert abs(stats.mean_rate - expected.mean_rate) < 1e-12
            assert len(stats.autocov) == 2
            assert np.allclose(stats.autocov, expected.autocov, rtol=1e-12, atol=1e-12)

    def test_lags_dropped_without_per_second_cadence(self):
        lines = ['timestamp,green_kw:dc0,price:dc0,rate:web']
        for t, r in enumerate([10.0, 12.0, 9.0, 11.0]):
            lines.append(f'{2 * t},0,0.1,{r}')
        traces = load_trace_frames([write_file('\n'.join(lines) + '\n')], ['dc0'], ['web'], slot_length=8.0,
                                   lag_cap=2)
        assert traces.nb_slots == 1
        assert len(traces.class_stats[0][0].autocov) == 1

    def test_several_files(self):
        power = write_file('timestamp,green_kw:dc0,price:dc0\n0,4,0.1\n3600,4,0.2\n', name='power.csv')
        workload = write_file('timestamp,rate:web\n0,100\n3600,200\n', name='workload.csv')
        traces = load_trace_frames([power, workload], ['dc0'], ['web'], slot_length=3600.0)
        assert traces.nb_slots == 2
        assert abs(traces.class_stats[1][0].mean_rate - 200.0) < 1e-12

    def test_column_in_two_files(self):
        first = write_file('timestamp,green_kw:dc0,price:dc0,rate:web\n0,4,0.1,10\n')
        second = write_file('timestamp,rate:web\n0,100\n')
        with self.assertRaises(TraceError) as context:
            load_trace_frames([first, second], ['dc0'], ['web'], slot_length=900.0)
        assert context.exception.column == 'rate:web'


class TestCheckColumns(TestCase):
    def test_required_columns(self):
        assert required_columns(['a', 'b'], ['web']) == ['green_kw:a', 'green_kw:b', 'price:a', 'price:b',
                                                         'rate:web']

    def test_check(self):
        path = write_file(hourly_text(2))
        check_trace_columns([path], ['dc0'], ['web'])
        with self.assertRaises(TraceError):
            check_trace_columns([path], ['dc0', 'dc1'], ['web'])


class TestWriteTraces(TestCase):
    def test_write_then_load(self):
        stats = [[WorkloadStats.iid(100.0 + 10.0 * s, 7.0 + s), WorkloadStats.iid(20.0, 2.0)] for s in range(3)]
        traces = TraceSet(
            slot_length=900.0,
            green_energy=[[1.0, 0.5], [2.0, 0.0], [0.25, 3.0]],
            brown_price=[[0.05, 0.08], [0.06, 0.07], [0.1, 0.02]],
            class_stats=stats,
            dc_names=('east', 'west'),
            class_names=('web', 'batch'))
        path = os.path.join(tempfile.mkdtemp(dir=utils.root_output), 'traces.csv')
        write_traces(path, traces)
        loaded = load_trace_frames([path], ['east', 'west'], ['web', 'batch'], slot_length=900.0)
        assert loaded.nb_slots == 3
        assert np.allclose(loaded.green_energy, traces.green_energy, rtol=1e-12)
        assert np.allclose(loaded.brown_price, traces.brown_price, rtol=1e-12)
        for s in range(3):
            for j in range(2):
                assert abs(loaded.class_stats[s][j].mean_rate - stats[s][j].mean_rate) < 1e-9
                assert abs(loaded.class_stats[s][j].variance - stats[s][j].variance) < 1e-9


class TestLoadTracesOfConfig(TestCase):
    def test_config_names_and_options(self):
        folder = tempfile.mkdtemp(dir=utils.root_output)
        with open(os.path.join(folder, 'traces.csv'), 'w') as f:
            f.write('timestamp,green_kw:dc0,price:dc0,rate:class0\n0,2,0.1,100\n3600,2,0.2,200\n')
        options = utils.config_options(traces={'paths': ['traces.csv'], 'slot_length': 1800.0},
                                       simulator={'fallback_cv': 0.5})
        config = load_config(utils.write_config(options, folder=folder))
        traces = load_traces(config.trace_paths, config)
        assert traces.nb_slots == 4
        assert traces.dc_names == ('dc0',)
        assert traces.class_names == ('class0',)
        assert np.allclose(traces.green_energy[:, 0], 1.0)
        assert np.allclose(traces.brown_price[:, 0], [0.1, 0.1, 0.2, 0.2])
        assert abs(traces.class_stats[3][0].mean_rate - 200.0) < 1e-9
        assert abs(traces.class_stats[3][0].cv - 0.5) < 1e-9
