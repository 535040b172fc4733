"""
Tests for bootstrap intervals, replicate handling and survival bands
"""
import unittest
import os
import sys
from unittest.mock import patch

import numpy as np
from scipy import stats

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.models.params import BootConfig, ModelParams
from src.services import bootstrap
from src.services.bootstrap import (
    ReplicateFit, basic_interval, bca_acceleration, bca_interval, bias_correction, boot_analyze,
    confidence_intervals, normal_interval, percentile_interval, replicate_rng, resample, resample_indices,
    resolve_column, survival_bands
)
from src.utils.errors import BootstrapError
from src.utils.validation import ValidationError
from tests.support import simulated


class TestIntervals(unittest.TestCase):

    def setUp(self):
        self.replicates = np.arange(1.0, 101.0)[:, None]
        self.estimate = np.array([50.5])

    def test_percentile_uses_linear_quantiles(self):
        ci = percentile_interval(self.replicates, 0.9)
        np.testing.assert_allclose(ci, [[np.quantile(self.replicates, 0.05), np.quantile(self.replicates, 0.95)]])
        np.testing.assert_allclose(ci, [[5.95, 95.05]])

    def test_basic_reflects_percentile(self):
        perc = percentile_interval(self.replicates, 0.9)
        basic = basic_interval(self.estimate, self.replicates, 0.9)
        np.testing.assert_allclose(basic, [[101.0 - perc[0, 1], 101.0 - perc[0, 0]]])

    def test_normal_is_bias_corrected(self):
        reps = np.array([[1.0], [2.0], [3.0], [6.0]])
        est = np.array([2.0])
        ci = normal_interval(est, reps, 0.95)
        z = stats.norm.ppf(0.975)
        center = 2 * 2.0 - 3.0
        half = z * np.std(reps, ddof=1)
        np.testing.assert_allclose(ci, [[center - half, center + half]])

    def test_bias_correction_clipped(self):
        z0 = bias_correction(np.array([1000.0]), self.replicates)
        self.assertAlmostEqual(z0[0], stats.norm.ppf(1 - 0.5 / 100))
        self.assertAlmostEqual(bias_correction(self.estimate, self.replicates)[0], 0.0)

    def test_acceleration(self):
        self.assertEqual(bca_acceleration(np.array([1.0, 2.0, 3.0]))[0], 0.0)
        jv = np.array([0.0, 0.0, 3.0])
        u = jv.mean() - jv
        expected = np.sum(u ** 3) / (6 * np.sum(u ** 2) ** 1.5)
        self.assertAlmostEqual(bca_acceleration(jv)[0], expected)
        self.assertEqual(bca_acceleration(np.ones(5))[0], 0.0)

    def test_bca_reduces_to_percentile(self):
        jackknife = np.array([1.0, 2.0, 3.0])
        bca = bca_interval(self.estimate, self.replicates, jackknife, 0.9)
        np.testing.assert_allclose(bca, percentile_interval(self.replicates, 0.9))

    def test_confidence_intervals_requires_jackknife_for_bca(self):
        with self.assertRaises(BootstrapError):
            confidence_intervals(self.estimate, self.replicates, 0.95, ('bca',))
        out = confidence_intervals(self.estimate, self.replicates, 0.95, ('normal', 'perc'))
        self.assertEqual(sorted(out), ['norm', 'perc'])


class TestReplicates(unittest.TestCase):

    def test_replicate_streams_are_reproducible(self):
        a = replicate_rng(3, 7).random(5)
        b = replicate_rng(3, 7).random(5)
        c = replicate_rng(3, 8).random(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_resample_counts_are_binomial(self):
        rng = np.random.default_rng(12)
        n, draws = 5, 10000
        counts = np.array([np.bincount(resample_indices(n, rng), minlength=n) for _ in range(draws)])
        self.assertTrue(np.all(counts.sum(axis=1) == n))
        sd = np.sqrt(n * (1 / n) * (1 - 1 / n) / draws)
        np.testing.assert_array_less(np.abs(counts.mean(axis=0) - 1.0), 4 * sd)
        absent = (1 - 1 / n) ** n
        np.testing.assert_array_less(np.abs((counts == 0).mean(axis=0) - absent),
                                     4 * np.sqrt(absent * (1 - absent) / draws))

    def test_resample_is_reproducible(self):
        data, _ = simulated('const_hazard', n=30, seed=2)
        a = resample(data, replicate_rng(4, 1))
        b = resample(data, replicate_rng(4, 1))
        np.testing.assert_array_equal(a.left, b.left)
        self.assertEqual(a.n, data.n)


class BootstrapTestCase(unittest.TestCase):

    def setUp(self):
        self.data, self.scenario = simulated('const_hazard', n=80, seed=9)


class TestBootAnalyze(BootstrapTestCase):

    def test_result_shape(self):
        config = BootConfig(boot_num=12, ci_types=('norm', 'basic', 'perc'), seed=4)
        result = boot_analyze(self.data, config, threads=1)
        self.assertEqual(result.replicate_betas.shape[1], 1)
        self.assertEqual(result.n_success + result.n_failed, 12)
        self.assertGreater(result.boot_se[0], 0.0)
        for kind in ('norm', 'basic', 'perc'):
            self.assertEqual(result.ci[kind].shape, (1, 2))
            self.assertLessEqual(result.ci[kind][0, 0], result.ci[kind][0, 1])

    def test_independent_of_thread_count(self):
        config = BootConfig(boot_num=8, ci_types=('perc',), seed=11)
        serial = boot_analyze(self.data, config, threads=1)
        pooled = boot_analyze(self.data, config, threads=4)
        np.testing.assert_array_equal(serial.replicate_betas, pooled.replicate_betas)

    def test_survival_targets(self):
        config = BootConfig(boot_num=10, ci_types=('perc', 'norm'), time_points=(0.5, 1.0),
                            covariate_value=(1.0,), seed=2)
        result = boot_analyze(self.data, config, threads=1)
        self.assertEqual(result.surv_estimate.shape, (2,))
        self.assertGreaterEqual(result.surv_estimate[0], result.surv_estimate[1])
        for bounds in result.surv_ci.values():
            self.assertTrue(np.all((bounds >= 0.0) & (bounds <= 1.0)))
        self.assertIn('survival', result.to_dict())

    def test_time_points_outside_range(self):
        config = BootConfig(boot_num=5, ci_types=('perc',), time_points=(1e6,), seed=2)
        with self.assertRaises(ValidationError):
            boot_analyze(self.data, config, threads=1)

    def test_too_many_failures(self):
        failed = ReplicateFit(times=np.zeros(0), params=ModelParams(np.zeros(0), [0.0]),
                              converged=False, error='forced')
        with patch.object(bootstrap, 'run_replicates', return_value=[failed] * 10):
            with self.assertRaises(BootstrapError) as ctx:
                boot_analyze(self.data, BootConfig(boot_num=10, ci_types=('perc',)), threads=1)
        self.assertEqual(ctx.exception.details['n_failed'], 10)


class TestSurvivalBands(BootstrapTestCase):

    def test_group_curves(self):
        frame = survival_bands(self.data, group_col=0, boot_num=10, seed=3, threads=1)
        self.assertEqual(list(frame.columns), ['time', 'group', 'estimate', 'lower', 'upper'])
        self.assertEqual(sorted(frame['group'].unique()), [0.0, 1.0])
        for _, curve in frame.groupby('group'):
            estimate = curve.sort_values('time')['estimate'].to_numpy()
            self.assertAlmostEqual(estimate[0], 1.0)
            self.assertTrue(np.all(np.diff(estimate) <= 1e-12))
        self.assertTrue(((frame['lower'] >= 0) & (frame['upper'] <= 1)).all())

    def test_failure_rate_is_configurable(self):
        failed = ReplicateFit(times=np.zeros(0), params=ModelParams(np.zeros(0), [0.0]),
                              converged=False, error='forced')
        real = bootstrap.run_replicates

        def with_failures(*args, **kwargs):
            return [failed] * 3 + list(real(*args, **kwargs))[3:]

        with patch.object(bootstrap, 'run_replicates', side_effect=with_failures):
            with self.assertRaises(BootstrapError):
                survival_bands(self.data, boot_num=10, seed=3, threads=1)
            frame = survival_bands(self.data, boot_num=10, seed=3, threads=1, max_failure_rate=0.5)
        self.assertEqual(sorted(frame['group'].unique()), [0.0, 1.0])

    def test_bca_bands_when_every_jackknife_fit_fails(self):
        failed = ReplicateFit(times=np.zeros(0), params=ModelParams(np.zeros(0), [0.0]),
                              converged=False, error='forced')
        with patch.object(bootstrap, 'jackknife_fits', return_value=[failed] * self.data.n):
            frame = survival_bands(self.data, boot_num=10, ci_type='bca', seed=3, threads=1)
        self.assertTrue((frame['lower'] <= frame['upper']).all())

    def test_resolve_column(self):
        self.assertEqual(resolve_column(self.data, 'x1'), 0)
        self.assertEqual(resolve_column(self.data, '0'), 0)
        with self.assertRaises(ValidationError):
            resolve_column(self.data, 'age')
        with self.assertRaises(ValidationError):
            resolve_column(self.data, 3)


if __name__ == '__main__':
    unittest.main()
