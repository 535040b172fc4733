"""
Parameter state and run configurations
"""
from dataclasses import dataclass, field, replace, asdict

import numpy as np

from src.utils.validation import (
    ValidationError, collect_errors, validate_positive_integer,
    validate_positive_number, validate_probability
)

CI_TYPES = ('norm', 'basic', 'perc', 'bca')
CI_ALIASES = {'normal': 'norm', 'percentile': 'perc'}


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Baseline log-jumps eta (lambda = exp(eta) > 0) and regression coefficients beta"""
    eta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float).reshape(-1)
        beta = np.array(self.beta, dtype=float).reshape(-1)
        eta.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, 'eta', eta)
        object.__setattr__(self, 'beta', beta)

    @classmethod
    def initial(cls, m, p, init_eta=None, init_beta=None):
        """eta_k = log(1/m) so Lambda(t_m) = 1, and beta = 0.01 per coefficient"""
        eta = np.full(m, -np.log(m)) if init_eta is None else np.asarray(init_eta, dtype=float)
        beta = np.full(p, 0.01) if init_beta is None else np.asarray(init_beta, dtype=float)
        if eta.shape != (m,):
            raise ValidationError(f"init_eta must have length {m}", {'init_eta': f"expected {m} values"})
        if beta.shape != (p,):
            raise ValidationError(f"init_beta must have length {p}", {'init_beta': f"expected {p} values"})
        return cls(eta, beta)

    @classmethod
    def from_vector(cls, theta, m):
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:m], theta[m:])

    @property
    def lam(self):
        return np.exp(self.eta)

    @property
    def m(self):
        return self.eta.shape[0]

    @property
    def p(self):
        return self.beta.shape[0]

    def vector(self):
        return np.concatenate([self.eta, self.beta])

    def with_eta(self, eta):
        return ModelParams(eta, self.beta)

    def with_beta(self, beta):
        return ModelParams(self.eta, beta)

    def to_dict(self):
        return {
            'eta': self.eta.tolist(),
            'lambda': self.lam.tolist(),
            'beta': self.beta.tolist()
        }


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 1000
    tol: float = 0.001
    ascent_tol: float = 1e-8
    init_beta: tuple = None
    init_eta: tuple = None
    step_halving_max: int = 30
    freeze_beta: bool = False
    boundary_lambda: float = 1e-10
    negligible_mass: float = 1e-3
    accelerate: bool = True
    extrapolation_backtracks: int = 6

    def validate(self):
        collect_errors([
            ('max_iter', lambda: validate_positive_integer(self.max_iter, 'max_iter')),
            ('tol', lambda: validate_positive_number(self.tol, 'tol')),
            ('ascent_tol', lambda: validate_positive_number(self.ascent_tol, 'ascent_tol', allow_zero=True)),
            ('step_halving_max', lambda: validate_positive_integer(self.step_halving_max, 'step_halving_max', minimum=0)),
            ('boundary_lambda', lambda: validate_positive_number(self.boundary_lambda, 'boundary_lambda', allow_zero=True)),
            ('negligible_mass', lambda: validate_positive_number(self.negligible_mass, 'negligible_mass', allow_zero=True)),
            ('extrapolation_backtracks', lambda: validate_positive_integer(self.extrapolation_backtracks, 'extrapolation_backtracks', minimum=0))
        ])
        return self

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = asdict(self)
        for key in ('init_beta', 'init_eta'):
            if out[key] is not None:
                out[key] = [float(v) for v in out[key]]
        return out


@dataclass(frozen=True)
class ProfileConfig:
    """h_n = hn_multiplier / sqrt(n); the inner loop inherits the solver settings"""
    hn_multiplier: float = 1.5
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self):
        collect_errors([
            ('hn_multiplier', lambda: validate_positive_number(self.hn_multiplier, 'hn_multiplier'))
        ])
        self.solver.validate()
        return self

    def step(self, n):
        return self.hn_multiplier / np.sqrt(n)

    def to_dict(self):
        return {'hn_multiplier': self.hn_multiplier, 'solver': self.solver.to_dict()}


def normalize_ci_types(ci_types):
    if isinstance(ci_types, str):
        ci_types = [c for c in ci_types.split(',') if c.strip()]
    out = []
    for name in ci_types:
        key = CI_ALIASES.get(name.strip().lower(), name.strip().lower())
        if key not in CI_TYPES:
            raise ValidationError(f"Unknown CI type '{name}'", {'ci_types': f"choose from {', '.join(CI_TYPES)}"})
        if key not in out:
            out.append(key)
    return tuple(out)


@dataclass(frozen=True)
class BootConfig:
    """
    Bootstrap settings. Survival targets are evaluated at `time_points` for the
    covariate vector `covariate_value` when both are given.
    """
    boot_num: int = 200
    conf: float = 0.95
    ci_types: tuple = CI_TYPES
    time_points: tuple = None
    covariate_value: tuple = None
    seed: int = 0
    max_failure_rate: float = 0.2

    def validate(self):
        checks = [
            ('boot_num', lambda: validate_positive_integer(self.boot_num, 'boot_num', minimum=2)),
            ('conf', lambda: validate_probability(self.conf, 'conf')),
            ('ci_types', lambda: normalize_ci_types(self.ci_types)),
            ('seed', lambda: validate_positive_integer(self.seed, 'seed', minimum=0)),
            ('max_failure_rate', lambda: validate_positive_number(self.max_failure_rate, 'max_failure_rate', allow_zero=True))
        ]
        if self.time_points is not None:
            checks.append(('time_points', lambda: [validate_positive_number(t, 'time_points', allow_zero=True)
                                                   for t in self.time_points]))
        collect_errors(checks)
        return self

    @property
    def wants_survival(self):
        return self.time_points is not None and len(self.time_points) > 0

    def to_dict(self):
        out = asdict(self)
        out['ci_types'] = list(normalize_ci_types(self.ci_types))
        for key in ('time_points', 'covariate_value'):
            if out[key] is not None:
                out[key] = [float(v) for v in out[key]]
        return out
