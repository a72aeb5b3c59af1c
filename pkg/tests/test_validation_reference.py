from unittest import TestCase

import numpy as np

import utils
from greendc.energy import slot_profit
from greendc.optim import build_problem, solve
from greendc.queueing import mills_tail, alpha_normalized, rho_sequence
from greendc.validation import reference_mills_tail, reference_alpha, reference_rho, reference_loss, \
    reference_slot_profit


class TestReference(TestCase):
    def test_mills_tail(self):
        ts = [0.0, 0.1, 1.0, 5.0, 20.0]
        assert np.allclose(reference_mills_tail(ts), [mills_tail(t) for t in ts], rtol=1e-12, atol=0)
        assert np.allclose(reference_alpha(ts, 0.3), [alpha_normalized(t, 0.3) for t in ts], rtol=1e-10)

    def test_rho(self):
        autocov = np.asarray([0.09, 0.05, 0.01])
        assert np.allclose(reference_rho(autocov, 10), rho_sequence(autocov, 10), rtol=1e-14)
        assert np.allclose(reference_rho([0.09], 3), [0.09, 0.18, 0.27], rtol=1e-15)

    def test_loss_edges(self):
        rho = reference_rho([0.09], 100)
        assert reference_loss([1.0, 2.0], 0.0, 1.0, rho).tolist() == [0.0, 0.0]
        at_one = reference_loss([1.0], 0.3, 1.0, rho)[0]
        assert abs(at_one - 0.3 / np.sqrt(2 * np.pi)) < 1e-15
        losses = reference_loss([1.01, 1.1, 1.5], 0.3, 1.0, rho)
        assert np.all(np.diff(losses) < 0)

    def test_slot_profit(self):
        env, dcs, classes = utils.evaluation_instance(nb_dcs=2, nb_classes=2)
        alloc = solve(build_problem(env, dcs, classes)).allocation
        reference = reference_slot_profit(alloc, env, dcs, classes)
        evaluated = slot_profit(alloc, env, dcs, classes).total
        assert abs(reference - evaluated) <= 1e-9 * abs(evaluated)
