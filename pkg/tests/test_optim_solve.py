import dataclasses
from unittest import TestCase

import numpy as np

import utils
from greendc.allocation import Allocation
from greendc.energy import slot_profit
from greendc.optim import SolveOptions, build_problem, solve, STATUS_INFEASIBLE, STATUS_NON_CERTIFIED, \
    STATUS_OPTIMAL, STATUS_FEASIBLE_NOT_CONVERGED


FEASIBLE_STATUSES = (STATUS_OPTIMAL, STATUS_FEASIBLE_NOT_CONVERGED)


def scaled_instance(factor):
    env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2, green_energy=[2.0, 3.0])
    dcs = [dataclasses.replace(dc, green_unit_cost=dc.green_unit_cost * factor) for dc in dcs]
    classes = [dataclasses.replace(c, income=c.income * factor, penalty=c.penalty * factor) for c in classes]
    env = dataclasses.replace(env, brown_price=env.brown_price * factor)
    return env, dcs, classes


class TestSolve(TestCase):
    def test_abundant_green(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=100.0, brown_price=0.1)
        result = solve(build_problem(env, dcs, classes))
        assert result.status in FEASIBLE_STATUSES, result.status
        assert result.allocation.green_alloc[0, 0] >= 0.98 * 100.0
        assert abs(result.allocation.class_totals()[0] - 100.0) < 1e-4
        assert result.objective > 0
        assert result.diagnostics['failing_pairs'] == []
        assert result.diagnostics['disabled_green_dcs'] == []

    def test_price_dominance(self):
        dcs = [utils.make_dc('cheap'), utils.make_dc('expensive')]
        classes = [utils.make_class()]
        env = utils.make_env([0.0, 0.0], [0.05, 0.5], [1000.0])
        result = solve(build_problem(env, dcs, classes))
        assert result.status in FEASIBLE_STATUSES, result.status
        brown = result.allocation.brown_alloc[:, 0]
        assert brown[0] >= 0.99 * brown.sum()
        assert result.diagnostics['disabled_green_dcs'] == ['cheap', 'expensive']
        assert np.all(result.allocation.green_alloc == 0)

    def test_slacks_nonnegative(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2)
        problem = build_problem(env, dcs, classes)
        result = solve(problem)
        assert result.status in FEASIBLE_STATUSES, result.status
        options = problem.options
        for name, slack in result.slacks.items():
            if name.startswith('demand'):
                assert abs(slack) <= options.feasibility_tolerance * 200.0, name
            else:
                assert slack >= -options.feasibility_tolerance * 2000.0, name
        assert set(result.kkt_residuals.keys()) == {
            'stationarity', 'complementarity', 'primal_equality', 'primal_inequality', 'kinks'}
        breakdown = slot_profit(result.allocation, env, dcs, classes)
        assert abs(breakdown.total - result.objective) <= 1e-9 * abs(result.objective)

    def test_infeasible_threshold(self):
        env, dcs, classes = utils.one_dc_one_class(drop_threshold=0.0)
        result = solve(build_problem(env, dcs, classes))
        assert result.status == STATUS_INFEASIBLE
        assert not result.feasible
        assert 'drop_threshold=0' in result.diagnostics['infeasible_reason']
        assert np.all(result.allocation.to_vector() == 0)
        assert result.objective == 0.0

    def test_non_certified(self):
        env, dcs, classes = utils.one_dc_one_class(income=1e-8)
        result = solve(build_problem(env, dcs, classes))
        assert result.status == STATUS_NON_CERTIFIED
        assert result.diagnostics['failing_pairs'] == ['dc0:web']

    def test_degenerate_demand(self):
        env, dcs, classes = utils.one_dc_one_class(mean=1e-9)
        result = solve(build_problem(env, dcs, classes))
        assert result.status in FEASIBLE_STATUSES, result.status
        assert result.diagnostics['degenerate_demand'] == ['web']
        assert result.allocation.class_totals()[0] == 0.0

    def test_deterministic(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2)
        r1 = solve(build_problem(env, dcs, classes, SolveOptions(seed=3)))
        r2 = solve(build_problem(env, dcs, classes, SolveOptions(seed=3)))
        assert np.array_equal(r1.allocation.to_vector(), r2.allocation.to_vector())
        assert r1.objective == r2.objective
        assert r1.diagnostics['starts'] == r2.diagnostics['starts']

    def test_multistart_not_worse(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2)
        single = solve(build_problem(env, dcs, classes, SolveOptions(multistart=1)))
        multiple = solve(build_problem(env, dcs, classes, SolveOptions(multistart=3)))
        assert len(multiple.diagnostics['starts']) == 3
        assert multiple.objective >= single.objective - 1e-6 * abs(single.objective)

    def test_price_invariance(self):
        results = []
        for factor in (1.0, 10.0):
            env, dcs, classes = scaled_instance(factor)
            results.append(solve(build_problem(env, dcs, classes)))
        assert results[0].status in FEASIBLE_STATUSES
        assert results[1].status in FEASIBLE_STATUSES
        assert abs(results[1].objective - 10.0 * results[0].objective) <= 1e-3 * abs(results[1].objective)

    def test_relaxed_demand(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2)
        result = solve(build_problem(env, dcs, classes, SolveOptions(relax_demand_equality=True)))
        assert result.status in FEASIBLE_STATUSES, result.status
        totals = result.allocation.class_totals()
        assert np.all(totals <= env.class_means * (1 + 1e-6))
        # serving the requests is profitable
        assert np.all(totals >= 0.99 * env.class_means)

    def test_frozen_allocation(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=1, green_energy=[0.0, 50.0])
        frozen = Allocation(green_alloc=[[0.0], [60.0]], green_rate=[[0.0], [0.0]],
                            brown_alloc=[[20.0], [20.0]], brown_rate=[[0.0], [0.0]])
        result = solve(build_problem(env, dcs, classes, frozen_alloc=frozen))
        assert result.status in FEASIBLE_STATUSES, result.status
        assert np.array_equal(result.allocation.green_alloc, frozen.green_alloc)
        assert np.array_equal(result.allocation.brown_alloc, frozen.brown_alloc)
        assert result.allocation.green_rate[1, 0] > 60.0
        assert result.allocation.green_rate[0, 0] == 0.0

    def test_mm1(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2)
        result = solve(build_problem(env, dcs, classes, SolveOptions(loss_model='mm1')))
        assert result.status in FEASIBLE_STATUSES, result.status
        assert result.diagnostics['loss_model'] == 'mm1'
        assert np.allclose(result.allocation.class_totals(), env.class_means, rtol=1e-5)
