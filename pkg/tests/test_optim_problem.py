from unittest import TestCase

import numpy as np

import utils
from greendc.allocation import Allocation, GREEN, BROWN
from greendc.energy import slot_profit
from greendc.optim import SolveOptions, green_server_cap, build_problem, objective_gradient, constraint_report, \
    initial_point, max_violation, gd1_queue_terms
from greendc.queueing import WorkloadStats, loss_shape


def interior_allocation(nb_dcs, nb_classes, seed=0):
    rng = np.random.RandomState(seed)
    green_alloc = rng.uniform(5, 50, size=[nb_dcs, nb_classes])
    brown_alloc = rng.uniform(5, 50, size=[nb_dcs, nb_classes])
    return Allocation(
        green_alloc=green_alloc,
        green_rate=green_alloc * rng.uniform(1.1, 1.6, size=[nb_dcs, nb_classes]),
        brown_alloc=brown_alloc,
        brown_rate=brown_alloc * rng.uniform(1.1, 1.6, size=[nb_dcs, nb_classes]))


class TestGreenServerCap(TestCase):
    def test_cap(self):
        dc = utils.make_dc()
        slot_length = 900.0
        # 2.4 kW over the slot
        assert green_server_cap(dc, 2.4 * slot_length / 3600.0, slot_length) == 10
        assert green_server_cap(dc, 0.0, slot_length) == 0
        assert green_server_cap(dc, 0.23 * slot_length / 3600.0, slot_length) == 0


class TestSolveOptions(TestCase):
    def test_validation(self):
        with self.assertRaises(ValueError):
            SolveOptions(tolerance=0)
        with self.assertRaises(ValueError):
            SolveOptions(epsilon_alloc=-1)
        with self.assertRaises(ValueError):
            SolveOptions(loss_model='mg1')


class TestBuildProblem(TestCase):
    def test_counting_single(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=10.0)
        problem = build_problem(env, dcs, classes)
        assert problem.nb_variables == 4
        assert problem.equality_full.shape == (1, 4)
        assert len(problem.sla_queues) == 2
        assert problem.infeasible_reason is None
        names = problem.inequality_names_full
        assert 'green_server_cap[dc0]' in names
        assert 'total_server_cap[dc0]' in names
        assert 'alloc_below_rate[green:dc0:web]' in names
        assert 'rate_at_least_one[brown:dc0:web]' in names

    def test_counting_multiple(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2)
        problem = build_problem(env, dcs, classes)
        assert problem.nb_variables == 24
        assert problem.equality_full.shape[0] == 2

    def test_green_disabled(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=0.0)
        problem = build_problem(env, dcs, classes)
        assert not problem.enabled[0]
        assert problem.enabled[1]
        assert len(problem.free) == 2
        assert 'green_server_cap[dc0]' not in problem.inequality_names_full

    def test_relaxed_demand(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=10.0)
        problem = build_problem(env, dcs, classes, SolveOptions(relax_demand_equality=True))
        assert problem.equality_full.shape[0] == 0
        assert 'demand[web]' in problem.inequality_names_full

    def test_no_total_cap(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=10.0)
        problem = build_problem(env, dcs, classes, SolveOptions(total_capacity_constraint=False))
        assert 'total_server_cap[dc0]' not in problem.inequality_names_full

    def test_infeasible_threshold(self):
        env, dcs, classes = utils.one_dc_one_class(drop_threshold=0.0)
        problem = build_problem(env, dcs, classes)
        assert 'drop_threshold=0' in problem.infeasible_reason

    def test_infeasible_capacity(self):
        dcs = [utils.make_dc('dc0', max_servers=5)]
        classes = [utils.make_class(per_server_capacity=10.0)]
        env = utils.make_env([0.0], [0.1], [100.0])
        problem = build_problem(env, dcs, classes)
        assert problem.infeasible_reason is not None

    def test_degenerate_demand(self):
        env, dcs, classes = utils.one_dc_one_class(mean=1e-9)
        problem = build_problem(env, dcs, classes)
        assert problem.degenerate_classes == [0]
        assert abs(problem.demand[0] - 1e-6) < 1e-18
        assert len(problem.sla_queues) == 0

    def test_objective_matches_profit(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2, green_energy=[50.0, 50.0, 50.0])
        problem = build_problem(env, dcs, classes)
        alloc = interior_allocation(3, 2)
        expected = slot_profit(alloc, env, dcs, classes).total
        value = problem.objective_full(alloc.to_vector())
        assert abs(value + expected) <= 1e-9 * abs(expected)

    def test_frozen_alloc(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=1, green_energy=[0.0, 50.0])
        frozen = Allocation(green_alloc=[[0.0], [60.0]], green_rate=[[0.0], [0.0]],
                            brown_alloc=[[20.0], [20.0]], brown_rate=[[0.0], [0.0]])
        problem = build_problem(env, dcs, classes, frozen_alloc=frozen)
        # 3 queues with requests, only their service rates are free
        assert len(problem.free) == 3
        assert np.all(problem.free % 2 == 1)
        assert problem.equality_matrix.shape[0] == 0
        assert problem.infeasible_reason is None


class TestObjectiveGradient(TestCase):
    def test_base_load_component(self):
        env, dcs, classes = utils.one_dc_one_class(brown_price=0.1, cv=0.0)
        problem = build_problem(env, dcs, classes)
        alloc = Allocation(green_alloc=[[0.0]], green_rate=[[0.0]], brown_alloc=[[100.0]], brown_rate=[[120.0]])
        result = objective_gradient(alloc, problem)
        dc, cls = dcs[0], classes[0]
        expected = (dc.idle_power + (dc.pue - 1) * dc.peak_power) * 0.1 * env.slot_length / 3600.0 / \
            cls.per_server_capacity
        brown = problem.queue_index(BROWN, 0, 0)
        assert abs(result.gradient[2 * brown + 1] - expected) <= 1e-15
        assert not result.tie

    def test_finite_differences(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2, green_energy=[50.0, 50.0, 50.0])
        problem = build_problem(env, dcs, classes)
        alloc = interior_allocation(3, 2, seed=1)
        x = alloc.to_vector()
        result = objective_gradient(alloc, problem)
        kink_variables = {2 * q + k for q in result.kink_queues for k in (0, 1)}
        for index in range(len(x)):
            if index in kink_variables:
                continue
            h = 1e-6 * max(1.0, abs(x[index]))
            plus, minus = x.copy(), x.copy()
            plus[index] += h
            minus[index] -= h
            fd = (problem.objective_full(plus) - problem.objective_full(minus)) / (2 * h)
            assert abs(fd - result.gradient[index]) <= 1e-4 * max(1.0, abs(fd)), f'variable={index}'

    def test_euler_identity(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2, green_energy=[50.0, 50.0, 50.0])
        problem = build_problem(env, dcs, classes)
        for seed in range(5):
            alloc = interior_allocation(3, 2, seed=seed)
            x = alloc.to_vector()
            value = problem.objective_full(x)
            gradient = objective_gradient(alloc, problem).gradient
            assert abs(gradient @ x - value) <= 1e-9 * max(1.0, abs(value))

    def test_queue_terms_convex_combination(self):
        stats = WorkloadStats(mean_rate=100.0, variance=900.0, autocov=[900.0, 300.0])
        shape = loss_shape(stats, 1.0)
        rng = np.random.RandomState(3)
        for _ in range(100):
            lam1, lam2 = rng.uniform(1, 100, size=2)
            p1 = np.asarray([lam1, lam1 * rng.uniform(1.05, 4.0)])
            p2 = np.asarray([lam2, lam2 * rng.uniform(1.05, 4.0)])
            for w in (0.25, 0.5, 0.75):
                mid = w * p1 + (1 - w) * p2
                f_mid = gd1_queue_terms(mid[0], mid[1], shape)[0]
                f_avg = w * gd1_queue_terms(p1[0], p1[1], shape)[0] + (1 - w) * gd1_queue_terms(p2[0], p2[1], shape)[0]
                assert f_mid <= f_avg + 1e-8


class TestConstraintReport(TestCase):
    def test_slacks(self):
        env, dcs, classes = utils.one_dc_one_class(green_energy=10.0)
        problem = build_problem(env, dcs, classes)
        alloc = Allocation(green_alloc=[[60.0]], green_rate=[[80.0]], brown_alloc=[[40.0]], brown_rate=[[50.0]])
        report = constraint_report(problem, alloc)
        assert abs(report['alloc_below_rate[green:dc0:web]'] - 20.0) < 1e-12
        assert abs(report['rate_at_least_one[brown:dc0:web]'] - 49.0) < 1e-12
        assert abs(report['demand[web]']) < 1e-12
        assert report['drop_threshold[green:dc0:web]'] > 0
        name, violation = max_violation(problem, report)
        assert name is None and violation == 0.0

        alloc.green_alloc[0, 0] = 90.0
        report = constraint_report(problem, alloc)
        name, violation = max_violation(problem, report)
        assert name is not None
        assert violation > 0

    def test_initial_point_feasible(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=3, nb_classes=2)
        problem = build_problem(env, dcs, classes)
        for start in range(3):
            x = initial_point(problem, start, seed=0)
            lam = x[0::2].reshape([2, 3, 2])
            assert np.allclose(lam.sum(axis=(0, 1)), env.class_means)
            assert np.all(x[1::2][problem.enabled] >= 1.0)
            assert np.all(x[1::2] >= x[0::2])
