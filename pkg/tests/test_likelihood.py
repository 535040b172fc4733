"""
Tests for the log-likelihood, its gradient and the surrogate function
"""
import unittest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.models.grid import survival
from src.models.observation import Dataset
from src.models.params import ModelParams
from src.services.likelihood import (
    Design, a1, a2, guarded_ratio, log1mexp, loglik, loglik_components, loglik_gradient,
    minorizer, minorizer_parts, u_terms
)
from src.utils.errors import DomainError, PositivityError
from tests.support import random_state, simulated_design, toy_dataset, toy_loglik


class TestScalarHelpers(unittest.TestCase):

    def test_log1mexp_matches_reference_forms(self):
        small = np.array([1e-9, 0.05, 0.5, 0.69])
        large = np.array([0.7, 3.0, 20.0, 40.0])
        np.testing.assert_allclose(log1mexp(small), np.log(-np.expm1(-small)), rtol=1e-12)
        np.testing.assert_allclose(log1mexp(large), np.log1p(-np.exp(-large)), rtol=1e-12)
        self.assertAlmostEqual(log1mexp(np.log(2.0)), np.log(0.5), places=14)

    def test_log1mexp_tiny_and_large(self):
        self.assertAlmostEqual(log1mexp(1e-12), np.log(1e-12), places=6)
        self.assertEqual(log1mexp(800.0), 0.0)

    def test_a1_a2(self):
        u = 0.8
        e = np.exp(-u)
        self.assertAlmostEqual(a1(u), e / (1 - e))
        self.assertAlmostEqual(a2(u), e / (2 * (1 - e) ** 2))

    def test_a1_a2_worked_values(self):
        self.assertAlmostEqual(a1(np.log(2.0)), 1.0, places=12)
        self.assertAlmostEqual(a2(np.log(2.0)), 1.0, places=12)
        self.assertAlmostEqual(a1(0.7), 0.98643, places=5)
        self.assertAlmostEqual(a2(0.7), 0.97974, places=5)
        self.assertLess(a1(50.0), 1e-20)

    def test_surrogate_inequality_on_random_pairs(self):
        rng = np.random.default_rng(99)
        tau = rng.uniform(1e-4, 20.0, size=10000)
        tau0 = rng.uniform(1e-4, 20.0, size=10000)
        lhs = log1mexp(tau) - log1mexp(tau0)
        gap = tau - tau0
        rhs = gap * a1(tau0) - gap ** 2 * a2(tau0) + np.log(tau0 / tau) + 1 - tau0 / tau
        slack = lhs - rhs + 1e-9 * (1 + np.abs(lhs) + np.abs(rhs))
        self.assertGreaterEqual(np.min(slack), 0.0)

    def test_a1_domain(self):
        with self.assertRaises(DomainError):
            a1(0.0)
        with self.assertRaises(DomainError):
            a2(np.array([1.0, -1.0]))

    def test_guarded_ratio(self):
        np.testing.assert_array_equal(guarded_ratio([0.0, 2.0], [0.0, 4.0]), [0.0, 0.5])
        with self.assertRaises(DomainError):
            guarded_ratio([1.0], [0.0])
        np.testing.assert_array_equal(guarded_ratio([1.0, 1.0], [0.0, 2.0], [False, True]), [0.0, 0.5])


class TestToyLoglik(unittest.TestCase):

    def setUp(self):
        self.design = Design.build(toy_dataset())

    def test_closed_form(self):
        for lam1, lam2 in [(0.3, 0.9), (np.log(1.5), np.log(2.0)), (2.0, 0.1)]:
            params = ModelParams(np.log([lam1, lam2]), [])
            self.assertAlmostEqual(loglik(self.design, params), toy_loglik(lam1, lam2), places=12)

    def test_components(self):
        params = ModelParams(np.log([0.4, 0.6]), [])
        parts = loglik_components(self.design, params)
        self.assertAlmostEqual(parts.left, np.log(1 - np.exp(-0.4)))
        self.assertAlmostEqual(parts.interval_survival, -0.4)
        self.assertAlmostEqual(parts.interval_gap, np.log(1 - np.exp(-0.6)))
        self.assertAlmostEqual(parts.right, -1.0)


class TestWorkedExample(unittest.TestCase):
    """One interval (1, 2], X = 1, lambda = (0.1, 0.2), beta = 0.5"""

    def setUp(self):
        self.data = Dataset(left=[1.0], right=[2.0], delta=[(0, 1, 0)], covariates=[[1.0]])
        self.design = Design.build(self.data)
        self.params = ModelParams(np.log([0.1, 0.2]), [0.5])

    def test_u_terms(self):
        u = u_terms(self.data.observation(0), self.design.grid, self.params)
        self.assertAlmostEqual(u.u_left, 0.6, places=12)
        self.assertAlmostEqual(u.u_between, 0.7, places=12)
        self.assertAlmostEqual(u.u_right - u.u_left - u.u_between, 0.0, places=12)

    def test_loglik(self):
        value = loglik(self.design, self.params)
        self.assertAlmostEqual(value, -0.6 + np.log(1 - np.exp(-0.7)), places=12)
        self.assertAlmostEqual(value, -1.28634, places=5)

    def test_single_censoring_types(self):
        right = Dataset(left=[2.0], right=[np.inf], delta=[(0, 0, 1)], covariates=np.zeros((1, 0)))
        design = Design.build(right)
        self.assertAlmostEqual(loglik(design, ModelParams([np.log(0.5)], [])), -0.5)
        left = Dataset(left=[0.0], right=[1.0], delta=[(1, 0, 0)], covariates=np.zeros((1, 0)))
        design = Design.build(left)
        self.assertAlmostEqual(loglik(design, ModelParams([np.log(np.log(2.0))], [])), np.log(0.5))


class LikelihoodTestCase(unittest.TestCase):
    """Simulated designs and reproducible random valid states"""

    def setUp(self):
        self.designs = [
            simulated_design('const_hazard', n=60, seed=3),
            simulated_design('const_three_cov', n=80, seed=4),
            simulated_design('timedep', n=60, seed=5),
            simulated_design('sqrt_two_cov', n=70, seed=6),
            simulated_design('const_hazard', n=40, seed=7)
        ]
        self.rng = np.random.default_rng(2024)


class TestUTerms(LikelihoodTestCase):

    def test_single_observation_matches_design(self):
        design = self.designs[1]
        params = random_state(design, self.rng)
        u = design.u_terms(params)
        for i in range(0, design.n, 7):
            one = u_terms(design.data.observation(i), design.grid, params, design.process)
            self.assertAlmostEqual(one.u_left, u.u_left[i], places=10)
            self.assertAlmostEqual(one.u_right, u.u_right[i], places=10)
            self.assertAlmostEqual(one.u_between, u.u_between[i], places=10)

    def test_positivity_violation(self):
        design = self.designs[0]
        params = ModelParams(np.full(design.m, -50.0), [-1.0])
        with self.assertRaises(PositivityError):
            loglik(design, params)

    def test_interval_parts_are_log_survival_gap(self):
        design = self.designs[0]
        intervals = np.flatnonzero(design.on_interval)
        for _ in range(5):
            params = random_state(design, self.rng)
            parts = loglik_components(design, params)
            self.assertAlmostEqual(parts.total, loglik(design, params), places=10)
            gaps = []
            for i in intervals:
                obs = design.data.observation(i)
                at = survival(design.grid, params, design.process, [obs.l_eff, obs.r_eff], obs.covariates)
                gaps.append(np.log(at[0] - at[1]))
            self.assertLess(abs(parts.interval_survival + parts.interval_gap - np.sum(gaps)), 1e-10)


class TestGradient(LikelihoodTestCase):

    def test_gradient_matches_central_differences(self):
        h = 1e-6
        for design in self.designs:
            for _ in range(4):
                params = random_state(design, self.rng)
                grad_eta, grad_beta = loglik_gradient(design, params)
                theta = params.vector()
                numeric = np.zeros_like(theta)
                for j in range(theta.size):
                    step = np.zeros_like(theta)
                    step[j] = h
                    up = loglik(design, ModelParams.from_vector(theta + step, design.m))
                    down = loglik(design, ModelParams.from_vector(theta - step, design.m))
                    numeric[j] = (up - down) / (2 * h)
                np.testing.assert_allclose(np.concatenate([grad_eta, grad_beta]), numeric,
                                           rtol=1e-4, atol=1e-6)


class TestMinorizer(LikelihoodTestCase):

    def test_tangent_at_anchor(self):
        for design in self.designs:
            for _ in range(10):
                anchor = random_state(design, self.rng)
                value = loglik(design, anchor)
                self.assertLessEqual(abs(minorizer(design, anchor, anchor) - value), 1e-9 * (1 + abs(value)))

    def test_lies_below_loglik(self):
        for design in self.designs:
            for _ in range(40):
                anchor = random_state(design, self.rng)
                params = random_state(design, self.rng)
                value = loglik(design, params)
                self.assertLessEqual(minorizer(design, params, anchor), value + 1e-9 * (1 + abs(value)))

    def test_separable_parts(self):
        design = self.designs[1]
        anchor = random_state(design, self.rng)
        parts = minorizer_parts(design, anchor, anchor)
        self.assertEqual(parts.per_jump.shape, (design.m,))
        self.assertAlmostEqual(parts.total, minorizer(design, anchor, anchor))

    def test_negative_share_outside_domain(self):
        design = self.designs[0]
        anchor = random_state(design, self.rng)
        with self.assertRaises(DomainError):
            minorizer(design, anchor.with_beta([-0.01]), anchor)


if __name__ == '__main__':
    unittest.main()
