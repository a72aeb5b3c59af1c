"""
The solver against an exhaustive grid search on small random instances.
"""
import time
from unittest import TestCase

import numpy as np

import utils
from greendc.optim import build_problem, solve, STATUS_OPTIMAL, STATUS_FEASIBLE_NOT_CONVERGED
from greendc.validation import BruteForceGrid, brute_force_solve


FEASIBLE_STATUSES = (STATUS_OPTIMAL, STATUS_FEASIBLE_NOT_CONVERGED)

# grid step: 1% of the class demand
GRID = BruteForceGrid(nb_alloc_steps=100)

# relative shortfall of the solver allowed against the best grid point
RELATIVE_GAP = 5e-3


def random_instance(random_state, nb_dcs):
    dcs = [utils.make_dc(f'dc{i}', max_servers=2000, network_delay=random_state.uniform(0.0, 0.05),
                         green_unit_cost=random_state.uniform(0.0, 0.03)) for i in range(nb_dcs)]
    classes = [utils.make_class(deadline=random_state.uniform(0.5, 2.0),
                                income=random_state.uniform(0.01, 0.02),
                                penalty=random_state.uniform(0.002, 0.008),
                                per_server_capacity=random_state.uniform(5.0, 20.0),
                                drop_threshold=random_state.uniform(1.0, 2.0))]
    env = utils.make_env(green_energy=random_state.uniform(0.0, 5.0, size=nb_dcs),
                         brown_price=random_state.uniform(0.05, 0.3, size=nb_dcs),
                         means=[random_state.uniform(50.0, 500.0)],
                         cv=random_state.uniform(0.1, 0.5))
    return env, dcs, classes


class TestSolverAgainstGrid(TestCase):
    def check_instances(self, nb_dcs, nb_instances, seed):
        random_state = np.random.RandomState(seed)
        worst = -np.inf
        for i in range(nb_instances):
            env, dcs, classes = random_instance(random_state, nb_dcs)
            time_start = time.perf_counter()
            grid = brute_force_solve(env, dcs, classes, GRID)
            time_grid = time.perf_counter()
            result = solve(build_problem(env, dcs, classes))
            time_end = time.perf_counter()
            print(f'instance={i}, nb_dcs={nb_dcs}, grid={grid.profit:.6f} ({time_grid - time_start:.1f}s), '
                  f'solver={result.objective:.6f} ({time_end - time_grid:.1f}s), status={result.status}')
            assert grid.feasible, f'instance={i}'
            assert result.status in FEASIBLE_STATUSES, f'instance={i}, status={result.status}'
            gap = (grid.profit - result.objective) / abs(grid.profit)
            worst = max(worst, gap)
            assert result.objective >= grid.profit - RELATIVE_GAP * abs(grid.profit), f'instance={i}, gap={gap}'
        print(f'worst relative gap={worst:.3e}')

    def test_single_dc(self):
        self.check_instances(nb_dcs=1, nb_instances=20, seed=0)

    def test_two_dcs(self):
        self.check_instances(nb_dcs=2, nb_instances=10, seed=1)
