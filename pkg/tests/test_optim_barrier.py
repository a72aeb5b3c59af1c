from unittest import TestCase

import numpy as np

from greendc.optim import BarrierOptions, barrier_minimize, phase_one, is_strictly_feasible, newton_direction


class QuadraticProgram:
    """
    minimize |x - target|^2 subject to G x <= h and A x = b
    """
    def __init__(self, target, g, h, a=None, b=None):
        self.target = np.asarray(target, dtype=np.float64)
        self.g = np.asarray(g, dtype=np.float64)
        self.h = np.asarray(h, dtype=np.float64)
        n = len(self.target)
        self.equality_matrix = np.zeros([0, n]) if a is None else np.asarray(a, dtype=np.float64)
        self.equality_rhs = np.zeros(0) if b is None else np.asarray(b, dtype=np.float64)

    def objective(self, x):
        return float(np.sum((x - self.target) ** 2))

    def objective_derivatives(self, x):
        return 2 * (x - self.target), 2 * np.eye(len(x))

    def constraints(self, x):
        return self.g @ x - self.h

    def constraint_derivatives(self, x, weights):
        return self.g, np.zeros([len(x), len(x)])


class DiskProgram:
    """
    minimize x + y subject to x^2 + y^2 <= 1
    """
    equality_matrix = np.zeros([0, 2])
    equality_rhs = np.zeros(0)

    def objective(self, x):
        return float(x[0] + x[1])

    def objective_derivatives(self, x):
        return np.ones(2), np.zeros([2, 2])

    def constraints(self, x):
        return np.asarray([x[0] ** 2 + x[1] ** 2 - 1.0])

    def constraint_derivatives(self, x, weights):
        return 2 * x[None, :], 2 * weights[0] * np.eye(2)


class TestBarrier(TestCase):
    def test_bound_active(self):
        program = QuadraticProgram(target=[2.0], g=[[1.0]], h=[1.0])
        result = barrier_minimize(program, np.asarray([0.0]), BarrierOptions(tolerance=1e-9))
        assert result.converged
        assert abs(result.x[0] - 1.0) < 1e-6
        # multiplier of the active bound: 2 * (2 - 1)
        assert abs(result.inequality_duals[0] - 2.0) < 1e-4

    def test_equality(self):
        program = QuadraticProgram(target=[0.0, 0.0], g=[[-1.0, 0.0]], h=[-0.6], a=[[1.0, 1.0]], b=[1.0])
        result = barrier_minimize(program, np.asarray([0.7, 0.3]), BarrierOptions(tolerance=1e-10))
        assert result.converged
        assert np.allclose(result.x, [0.6, 0.4], atol=1e-6)
        assert abs(result.x.sum() - 1.0) < 1e-12

    def test_nonlinear_constraint(self):
        result = barrier_minimize(DiskProgram(), np.asarray([0.0, 0.0]), BarrierOptions(tolerance=1e-10))
        assert result.converged
        expected = -np.sqrt(0.5) * np.ones(2)
        assert np.allclose(result.x, expected, atol=1e-5)

    def test_infeasible_start_rejected(self):
        program = QuadraticProgram(target=[2.0], g=[[1.0]], h=[1.0])
        with self.assertRaises(AssertionError):
            barrier_minimize(program, np.asarray([3.0]))

    def test_iteration_budget(self):
        program = QuadraticProgram(target=[2.0], g=[[1.0]], h=[1.0])
        result = barrier_minimize(program, np.asarray([0.0]), BarrierOptions(tolerance=1e-12, max_iterations=2))
        assert not result.converged
        assert result.iterations <= 2
        assert is_strictly_feasible(program, result.x)

    def test_phase_one(self):
        program = QuadraticProgram(target=[0.0, 0.0], g=[[-1.0, 0.0], [0.0, -1.0]], h=[-0.2, -0.2],
                                   a=[[1.0, 1.0]], b=[1.0])
        x, feasible, s = phase_one(program, np.asarray([0.0, 1.0]), BarrierOptions())
        assert feasible
        assert s < 0
        assert is_strictly_feasible(program, x)
        assert abs(x.sum() - 1.0) < 1e-9

    def test_phase_one_infeasible(self):
        # x >= 0.6 and y >= 0.6 with x + y = 1
        program = QuadraticProgram(target=[0.0, 0.0], g=[[-1.0, 0.0], [0.0, -1.0]], h=[-0.6, -0.6],
                                   a=[[1.0, 1.0]], b=[1.0])
        x, feasible, s = phase_one(program, np.asarray([0.5, 0.5]), BarrierOptions())
        assert not feasible
        assert s > 0
        assert not is_strictly_feasible(program, x)

    def test_newton_direction_singular(self):
        hessian = np.zeros([2, 2])
        dx, w = newton_direction(hessian, np.asarray([1.0, 1.0]), np.asarray([[1.0, 1.0]]), np.asarray([0.0]))
        assert np.all(np.isfinite(dx))
        assert np.all(np.isfinite(w))
