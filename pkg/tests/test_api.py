"""
Tests for the HTTP estimation service
"""
import unittest
import json
import os
import sys
from unittest.mock import patch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.main import create_app
from src.services.simulate import Scenario, generate
from src.utils.errors import BootstrapError


def _rows(data):
    return [
        [o.left, 'Inf' if o.delta_r else o.right, o.delta_l, o.delta_i, o.delta_r, *o.covariates]
        for o in data
    ]


class APITestCase(unittest.TestCase):
    """Base test case for the estimation API"""

    def setUp(self):
        self.app = create_app()
        self.app.config['TESTING'] = True
        self.client = self.app.test_client()
        self.rows = _rows(generate(Scenario(kind='const_hazard', n=120, seed=4)))

    def post(self, url, payload):
        return self.client.post(url, data=json.dumps(payload), content_type='application/json')


class TestHealth(APITestCase):

    def test_health_check(self):
        response = self.client.get('/api/health')
        self.assertEqual(response.status_code, 200)
        result = json.loads(response.data)
        self.assertEqual(result['status'], 'healthy')
        self.assertIn('convergence_rate', result['metrics'])


class TestFitEndpoint(APITestCase):

    def test_fit(self):
        response = self.post('/api/fit', {'rows': self.rows, 'hn': 1.5})
        self.assertEqual(response.status_code, 200)
        result = json.loads(response.data)
        self.assertTrue(result['success'])
        self.assertEqual(result['n'], 120)
        self.assertEqual(len(result['beta']), 1)
        self.assertGreater(result['beta'][0]['se'], 0.0)

    def test_invalid_rows(self):
        rows = self.rows[:3] + [[1, 2, 1, 1, 0, 0]]
        response = self.post('/api/fit', {'rows': rows})
        self.assertEqual(response.status_code, 400)
        result = json.loads(response.data)
        self.assertFalse(result['success'])
        self.assertIn('4', result['errors'])

    def test_missing_body(self):
        response = self.client.post('/api/fit', data='not json', content_type='text/plain')
        self.assertEqual(response.status_code, 400)

    def test_row_limit(self):
        self.app.config['ARM_MM_MAX_ROWS'] = 50
        response = self.post('/api/fit', {'rows': self.rows})
        self.assertEqual(response.status_code, 400)

    def test_unknown_process(self):
        response = self.post('/api/fit', {'rows': self.rows, 'process': 'cubic'})
        self.assertEqual(response.status_code, 400)

    def test_nonconvergence_is_unprocessable(self):
        response = self.post('/api/fit', {'rows': self.rows, 'max_iter': 1})
        self.assertEqual(response.status_code, 422)
        self.assertEqual(len(json.loads(response.data)['loglik_trace']), 2)


class TestBootEndpoint(APITestCase):

    def test_boot(self):
        response = self.post('/api/boot', {'rows': self.rows, 'boot_num': 5, 'ci': 'perc', 'seed': 1})
        self.assertEqual(response.status_code, 200)
        result = json.loads(response.data)
        self.assertEqual(result['boot_num'], 5)
        self.assertIn('perc', result['ci'])

    @patch('src.routes.estimation.boot_analyze')
    def test_estimation_error_maps_to_422(self, mock_boot):
        mock_boot.side_effect = BootstrapError("3 of 5 bootstrap replicates failed", {'n_failed': 3})
        response = self.post('/api/boot', {'rows': self.rows, 'boot_num': 5})
        self.assertEqual(response.status_code, 422)
        result = json.loads(response.data)
        self.assertEqual(result['details']['n_failed'], 3)


class TestSimulateEndpoint(APITestCase):

    def test_simulate(self):
        response = self.post('/api/simulate', {'scenario': 'sqrt_two_cov', 'n': 30, 'seed': 2})
        self.assertEqual(response.status_code, 200)
        result = json.loads(response.data)
        self.assertEqual(len(result['rows']), 30)
        self.assertEqual(result['columns'], ['left', 'right', 'L', 'I', 'R', 'x1', 'x2'])

    def test_simulated_rows_fit(self):
        rows = json.loads(self.post('/api/simulate', {'n': 100, 'seed': 6}).data)['rows']
        self.assertEqual(self.post('/api/fit', {'rows': rows}).status_code, 200)

    def test_bad_scenario(self):
        response = self.post('/api/simulate', {'scenario': 'weibull'})
        self.assertEqual(response.status_code, 400)


if __name__ == '__main__':
    unittest.main()
