"""
Cumulative covariate processes Z_x(t), the integral of X(s) from 0 to t
"""
from abc import ABC, abstractmethod

import numpy as np

from src.utils.errors import DomainError


class CovariateProcess(ABC):
    """Maps covariate rows and times to cumulative covariates"""

    name = 'process'

    @abstractmethod
    def cumulative(self, x, t):
        """
        Z_x(t) for covariate rows `x` of shape (n, p) at times `t` of shape (n,).

        Returns an (n, p) array.
        """

    def at(self, x, t):
        """Z_x(t) for a single covariate vector at one time"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.cumulative(x, np.array([float(t)]))[0]

    def to_dict(self):
        return {'name': self.name}


class TimeIndependent(CovariateProcess):
    """Constant covariates: Z_x(t) = X t"""

    name = 'linear'

    def cumulative(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return x * t[:, None]


class UserSupplied(CovariateProcess):
    """Wraps a vectorized callable integral(x, t) -> (n, p)"""

    def __init__(self, integral, name='user'):
        self.integral = integral
        self.name = name

    def cumulative(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.integral(x, t), dtype=float)
        if out.shape != x.shape:
            raise DomainError(
                f"Covariate process '{self.name}' returned shape {out.shape}, expected {x.shape}",
                {'process': self.name}
            )
        return out


def exponential_process():
    """X(s) = X e^s, so Z_x(t) = X (e^t - 1)"""
    return UserSupplied(lambda x, t: x * np.expm1(t)[:, None], name='exp')


PROCESSES = {
    'linear': TimeIndependent,
    'exp': exponential_process
}


def get_process(name):
    try:
        return PROCESSES[name]()
    except KeyError:
        raise DomainError(f"Unknown covariate process '{name}'", {'choices': sorted(PROCESSES)})
