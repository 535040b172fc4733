"""
Result records produced by fitting, inference, bootstrap and benchmarking
"""
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from src import __version__


def _floats(values):
    return [float(v) for v in np.asarray(values, dtype=float).reshape(-1)]


@dataclass(frozen=True, eq=False)
class FitResult:
    params: object
    loglik: float
    n_iter: int
    converged: bool
    grid: object
    loglik_trace: tuple = ()
    method: str = 'mm'
    diagnostics: dict = field(default_factory=dict)

    @property
    def beta(self):
        return self.params.beta

    @property
    def lam(self):
        return self.params.lam

    def to_dict(self):
        return {
            'method': self.method,
            'beta': _floats(self.params.beta),
            'lambda': _floats(self.params.lam),
            'times': _floats(self.grid.times),
            'loglik': float(self.loglik),
            'n_iter': int(self.n_iter),
            'converged': bool(self.converged),
            'm': int(self.grid.m),
            'p': int(self.params.p)
        }


@dataclass(frozen=True, eq=False)
class ProfileCovariance:
    cov: np.ndarray
    se: np.ndarray
    d_matrix: np.ndarray
    hn: float
    n_evaluations: int

    def to_dict(self):
        return {
            'covariance': np.asarray(self.cov, dtype=float).tolist(),
            'se': _floats(self.se),
            'd_matrix': np.asarray(self.d_matrix, dtype=float).tolist(),
            'hn': float(self.hn),
            'n_evaluations': int(self.n_evaluations)
        }


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """
    Replicate estimates and confidence intervals.

    `ci` maps a CI type to a (p, 2) array of lower/upper bounds; `surv_ci` likewise
    over the requested time points.
    """
    estimate: np.ndarray
    replicate_betas: np.ndarray
    boot_se: np.ndarray
    ci: dict
    conf: float
    n_failed: int
    boot_num: int
    time_points: np.ndarray = None
    covariate_value: np.ndarray = None
    surv_estimate: np.ndarray = None
    replicate_survivals: np.ndarray = None
    surv_se: np.ndarray = None
    surv_ci: dict = None

    @property
    def n_success(self):
        return self.replicate_betas.shape[0]

    def to_dict(self):
        out = {
            'estimate': _floats(self.estimate),
            'boot_se': _floats(self.boot_se),
            'ci': {k: np.asarray(v, dtype=float).tolist() for k, v in self.ci.items()},
            'conf': float(self.conf),
            'boot_num': int(self.boot_num),
            'n_failed': int(self.n_failed)
        }
        if self.time_points is not None:
            out['survival'] = {
                'times': _floats(self.time_points),
                'covariates': _floats(self.covariate_value),
                'estimate': _floats(self.surv_estimate),
                'se': _floats(self.surv_se),
                'ci': {k: np.asarray(v, dtype=float).tolist() for k, v in self.surv_ci.items()}
            }
        return out


@dataclass(frozen=True)
class BenchRecord:
    method: str
    n: int
    m: int
    p: int
    time_estimate_s: float
    time_se_s: float
    loglik: float

    def to_row(self):
        return {
            'method': self.method,
            'n': self.n,
            'm': self.m,
            'p': self.p,
            'ATE_s': self.time_estimate_s,
            'ATS_s': self.time_se_s,
            'loglik': self.loglik
        }


@dataclass(frozen=True)
class StudySummary:
    """Replication study summary per coefficient"""
    scenario: dict
    replications: int
    n_failed: int
    true_beta: tuple
    mean_estimate: tuple
    empirical_sd: tuple
    mean_se: tuple
    coverage: tuple
    max_descent: float = 0.0

    def to_dict(self):
        return {
            'scenario': self.scenario,
            'replications': self.replications,
            'n_failed': self.n_failed,
            'true_beta': list(self.true_beta),
            'mean_estimate': list(self.mean_estimate),
            'empirical_sd': list(self.empirical_sd),
            'mean_se': list(self.mean_se),
            'coverage': list(self.coverage),
            'max_descent': self.max_descent
        }


@dataclass(frozen=True)
class RunManifest:
    command: str
    input_path: str
    config: dict
    seed: int = None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())

    def to_dict(self):
        return {
            'command': self.command,
            'input_path': self.input_path,
            'config': self.config,
            'seed': self.seed,
            'version': self.version,
            'timestamp': self.timestamp
        }
