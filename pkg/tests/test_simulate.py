"""
Tests for the data generator and the replication study harness
"""
import unittest
import os
import sys

import numpy as np
from scipy import stats

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.models.params import SolverConfig
from src.services.simulate import (
    NARROW_WINDOW, Scenario, draw_event_time, event_times, generate, replication_seed, resolve_kind,
    run_study
)
from src.utils.validation import ValidationError


class TestScenario(unittest.TestCase):

    def test_aliases_and_defaults(self):
        self.assertEqual(resolve_kind('2'), 'timedep')
        scenario = Scenario(kind='3')
        self.assertEqual(scenario.kind, 'sqrt_two_cov')
        self.assertEqual(scenario.beta, (0.5, 1.0))
        self.assertIs(scenario.window, NARROW_WINDOW)
        self.assertEqual(Scenario(kind='const_three_cov').p, 3)

    def test_unknown_kind(self):
        with self.assertRaises(ValidationError):
            Scenario(kind='weibull')

    def test_beta_validation(self):
        with self.assertRaises(ValidationError):
            Scenario(kind='const_hazard', beta=(0.5, 1.0)).validate()
        with self.assertRaises(ValidationError):
            Scenario(kind='timedep', beta=(-0.1,)).validate()
        with self.assertRaises(ValidationError):
            Scenario(kind='const_hazard', beta=(-0.3,)).validate()
        Scenario(kind='const_hazard', beta=(-0.1,)).validate()


class TestEventTimes(unittest.TestCase):

    def test_constant_hazard_closed_form(self):
        scenario = Scenario(kind='const_hazard', beta=(0.5,))
        t = draw_event_time(scenario, np.array([1.0]), np.exp(-1.4))
        self.assertAlmostEqual(t, 1.4 / 0.7)

    def test_bisection_inverts_cumulative_hazard(self):
        for kind in ('timedep', 'sqrt_two_cov'):
            scenario = Scenario(kind=kind)
            x = np.ones(scenario.p)
            for u in (0.9, 0.5, 0.05, 1e-6):
                t = draw_event_time(scenario, x, u)
                self.assertAlmostEqual(scenario.cumulative_hazard(x, t), -np.log(u), places=8)

    def test_constant_hazard_times_are_exponential(self):
        rng = np.random.default_rng(31)
        n = 10000
        uniforms = 1.0 - rng.random(n)
        times = event_times(Scenario(kind='const_hazard', beta=(0.5,)), np.ones((n, 1)), uniforms)
        result = stats.kstest(times, 'expon', args=(0.0, 1.0 / 0.7))
        self.assertGreater(result.pvalue, 0.01)

    def test_root_found_times_have_unit_exponential_hazard(self):
        rng = np.random.default_rng(32)
        scenario = Scenario(kind='sqrt_two_cov')
        x = np.array([[1.0, 0.0]] * 2000)
        times = event_times(scenario, x, 1.0 - rng.random(2000))
        hazards = [scenario.cumulative_hazard(x[0], t) for t in times]
        self.assertGreater(stats.kstest(hazards, 'expon').pvalue, 0.01)

    def test_u_of_one_gives_zero(self):
        self.assertEqual(draw_event_time(Scenario(kind='timedep'), np.array([1.0]), 1.0), 0.0)

    def test_u_outside_range(self):
        with self.assertRaises(ValidationError):
            draw_event_time(Scenario(), np.array([1.0]), 0.0)


class TestGenerate(unittest.TestCase):

    def test_deterministic(self):
        a = generate(Scenario(kind='timedep', n=50, seed=8))
        b = generate(Scenario(kind='timedep', n=50, seed=8))
        np.testing.assert_array_equal(a.left, b.left)
        np.testing.assert_array_equal(a.delta, b.delta)
        np.testing.assert_array_equal(a.covariates, b.covariates)

    def test_canonical_layout(self):
        data = generate(Scenario(kind='const_three_cov', n=300, seed=2))
        self.assertEqual(data.p, 3)
        np.testing.assert_array_equal(data.delta.sum(axis=1), np.ones(300))
        left_rows = data.delta_l == 1
        right_rows = data.delta_r == 1
        interval_rows = data.delta_i == 1
        self.assertTrue(np.all(data.left[left_rows] == 0.0))
        self.assertTrue(np.all(np.isinf(data.right[right_rows])))
        self.assertTrue(np.all(data.left[interval_rows] < data.right[interval_rows]))
        self.assertTrue(np.all(data.right[interval_rows] <= 4.0))
        self.assertTrue(set(np.unique(data.covariates)) <= {0.0, 1.0})

    def test_covariate_frequencies(self):
        n = 10000
        for kind, probs in (('const_hazard', (0.5,)), ('const_three_cov', (0.5, 0.4, 0.3))):
            data = generate(Scenario(kind=kind, n=n, seed=17))
            for share, q in zip(data.covariates.mean(axis=0), probs):
                with self.subTest(kind=kind, q=q):
                    self.assertLess(abs(share - q), 4 * np.sqrt(q * (1 - q) / n))

    def test_replication_seeds_differ(self):
        seeds = {replication_seed(5, r) for r in range(20)}
        self.assertEqual(len(seeds), 20)


class TestStudy(unittest.TestCase):

    def test_small_study(self):
        summary = run_study(Scenario(kind='const_hazard', n=150, seed=3), replications=4,
                            solver_config=SolverConfig(), threads=2)
        self.assertEqual(summary.replications, 4)
        self.assertEqual(len(summary.mean_estimate), 1)
        self.assertTrue(0.0 <= summary.coverage[0] <= 1.0)
        self.assertLess(summary.max_descent, 1e-6)
        self.assertEqual(summary.to_dict()['true_beta'], [0.5])

    def test_needs_two_replications(self):
        with self.assertRaises(ValidationError):
            run_study(Scenario(), replications=1)


if __name__ == '__main__':
    unittest.main()
