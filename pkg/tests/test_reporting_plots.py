import os
from unittest import TestCase

import utils
from greendc.reporting import plot_profit_series, plot_allocation_shares
from greendc.simulation import run, RunOptions


class TestPlots(TestCase):
    def test_run_plots(self):
        traces = utils.make_traces([[1.0, 0.0], [0.0, 1.0]], [[0.05, 0.08], [0.08, 0.05]], [[100.0], [120.0]])
        dcs = [utils.make_dc('east', green_unit_cost=0.02), utils.make_dc('west', green_unit_cost=0.02)]
        classes = [utils.make_class('web')]
        summary = run(traces, dcs, classes, RunOptions(baselines=(), normalized_gain=False))

        root = os.path.join(utils.root_output, 'plots')
        os.makedirs(root, exist_ok=True)
        profit_path = plot_profit_series(root, summary)
        share_paths = plot_allocation_shares(root, summary, dcs, classes)
        assert os.path.exists(profit_path)
        assert len(share_paths) == 2
        for path in share_paths:
            assert os.path.exists(path)
            assert path.endswith('.png')
