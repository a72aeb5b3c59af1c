"""
Multi-slot behavior of the allocation: dominance over the baselines on a synthetic day, the allocation
following the green power and the prices, and reproducible runs.
"""
import os
import tempfile
import time
from unittest import TestCase

import numpy as np

import utils
from greendc.allocation import BROWN, GREEN
from greendc.cli import main
from greendc.optim import build_problem, solve, STATUS_NON_CERTIFIED
from greendc.simulation import run, RunOptions, allocation_shares, synth_traces, TraceSpec, DcTraceSpec, \
    ClassTraceSpec, BASELINE_MM1, BASELINE_EQUAL_SPLIT, STATUS_ERROR


NO_BASELINES = RunOptions(baselines=(), normalized_gain=False)


def synthetic_day():
    spec = TraceSpec(
        dcs=(DcTraceSpec(green_mean_kw=4.0, green_amplitude_kw=4.0, green_phase_hours=12.0, price_mean=0.08,
                         price_amplitude=0.03),
             DcTraceSpec(green_mean_kw=2.0, green_amplitude_kw=2.0, green_phase_hours=3.0, green_noise_kw=0.5,
                         price_mean=0.1, price_amplitude=0.04, price_phase_hours=14.0),
             DcTraceSpec(green_mean_kw=1.0, price_mean=0.12, price_amplitude=0.02, price_noise=0.005)),
        classes=(ClassTraceSpec(mean_rate=150.0, diurnal_amplitude=0.4, cv=0.3),
                 ClassTraceSpec(mean_rate=80.0, diurnal_amplitude=0.2, phase_hours=20.0, cv=0.5)),
        nb_slots=24,
        samples_per_slot=600)
    return synth_traces(spec, seed=0)


class TestSyntheticDay(TestCase):
    def test_baselines_dominated(self):
        traces = synthetic_day()
        _, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2)
        time_start = time.perf_counter()
        summary = run(traces, dcs, classes, RunOptions(nb_workers=4))
        time_end = time.perf_counter()
        print(f'24 slots: {time_end - time_start:.1f}s, total profit={summary.total_profit:.6f}, '
              f'baselines={summary.baseline_totals()}')
        assert STATUS_ERROR not in summary.statuses
        for name in (BASELINE_MM1, BASELINE_EQUAL_SPLIT):
            deltas = summary.dominance_deltas[name]
            assert np.all(deltas >= -1e-4 * np.abs(summary.slot_profits)), f'baseline={name}, deltas={deltas}'


class TestAllocationTrends(TestCase):
    def test_green_crossover(self):
        # the green power of dc0 decreases, the one of dc1 increases: they cross at hour 6
        spec = TraceSpec(
            dcs=(DcTraceSpec(green_mean_kw=8.0, green_trend_kw_per_hour=-0.6, price_mean=0.1),
                 DcTraceSpec(green_mean_kw=0.8, green_trend_kw_per_hour=0.6, price_mean=0.1)),
            classes=(ClassTraceSpec(mean_rate=200.0),),
            nb_slots=24,
            samples_per_slot=60)
        traces = synth_traces(spec, seed=0)
        dcs = [utils.make_dc('dc0', green_unit_cost=0.02), utils.make_dc('dc1', green_unit_cost=0.02)]
        summary = run(traces, dcs, [utils.make_class()], NO_BASELINES)
        assert STATUS_ERROR not in summary.statuses

        green = np.asarray([r.allocation.green_alloc[:, 0] for r in summary.reports])
        dc1_green = green[:, 1]
        print('green request rates of dc1:', dc1_green)
        assert np.mean(dc1_green[8:]) > np.mean(dc1_green[:5])
        shares = allocation_shares(summary, GREEN)
        assert np.nanmean(shares[16:, 1, 0]) > 0.5

    def test_price_trough(self):
        spec = TraceSpec(
            dcs=(DcTraceSpec(price_mean=0.1),
                 DcTraceSpec(price_mean=0.12, trough_start=10, trough_end=14, trough_factor=0.3)),
            classes=(ClassTraceSpec(mean_rate=200.0),),
            nb_slots=24,
            samples_per_slot=60)
        traces = synth_traces(spec, seed=0)
        dcs = [utils.make_dc('dc0'), utils.make_dc('dc1')]
        summary = run(traces, dcs, [utils.make_class()], NO_BASELINES)
        assert STATUS_ERROR not in summary.statuses

        shares = allocation_shares(summary, BROWN)[:, 1, 0]
        print('brown shares of dc1:', shares)
        assert 10 <= int(np.argmax(shares)) < 14
        window = np.arange(24)
        in_trough = (window >= 10) & (window < 14)
        assert np.min(shares[in_trough]) > np.max(shares[~in_trough])
        assert np.min(shares[in_trough]) >= 0.9


class TestReproducibleRuns(TestCase):
    def test_simulate_twice(self):
        folder = tempfile.mkdtemp(dir=utils.root_output)
        options = utils.config_options(nb_dcs=2, nb_classes=2)
        options['traces'] = {'slot_length': 3600.0, 'generator': {
            'nb_slots': 6, 'slot_length': 3600.0, 'samples_per_slot': 120,
            'dcs': [{'green_mean_kw': 3.0, 'green_noise_kw': 1.0, 'price_mean': 0.08, 'price_noise': 0.01},
                    {'green_mean_kw': 1.0, 'price_mean': 0.1}],
            'classes': [{'mean_rate': 100.0, 'diurnal_amplitude': 0.3}, {'mean_rate': 50.0}]}}
        options['simulator'] = {'gain_grid_size': 20, 'nb_workers': 2}
        path = utils.write_config(options, folder=folder)

        texts = []
        for name in ('first', 'second'):
            out = os.path.join(folder, name)
            assert main(['simulate', '--config', path, '--out', out, '--seed', '11',
                         '--format', 'delimiter-separated']) == 0
            with open(os.path.join(out, 'summary.csv')) as f:
                summary = f.read()
            with open(os.path.join(out, 'slots.csv')) as f:
                slots = f.read()
            texts.append((summary, slots))
        assert texts[0] == texts[1]


class TestProfitabilityGate(TestCase):
    def test_unprofitable_class(self):
        env, dcs, classes = utils.one_dc_one_class(income=1e-8)
        result = solve(build_problem(env, dcs, classes))
        assert result.status == STATUS_NON_CERTIFIED
        assert result.diagnostics['failing_pairs'] == ['dc0:web']
