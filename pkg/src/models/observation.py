"""
Interval-censored observations and the immutable dataset container
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np
import pandas as pd

KIND_LEFT = 'left'
KIND_INTERVAL = 'interval'
KIND_RIGHT = 'right'

CANONICAL_COLUMNS = ['left', 'right', 'L', 'I', 'R']


@dataclass(frozen=True)
class Observation:
    """One subject: stored interval, censoring indicators and covariate row"""
    left: float
    right: float
    delta_l: int
    delta_i: int
    delta_r: int
    covariates: tuple

    @property
    def kind(self):
        if self.delta_l:
            return KIND_LEFT
        if self.delta_r:
            return KIND_RIGHT
        return KIND_INTERVAL

    @property
    def l_eff(self):
        """Left inspection point; for a left-censored subject it is the stored right value"""
        return self.right if self.delta_l else self.left

    @property
    def r_eff(self):
        """Right inspection point; for a right-censored subject it is the stored left value"""
        return self.left if self.delta_r else self.right

    def to_dict(self):
        return {
            'left': self.left,
            'right': None if math.isinf(self.right) else self.right,
            'delta_l': self.delta_l,
            'delta_i': self.delta_i,
            'delta_r': self.delta_r,
            'kind': self.kind,
            'covariates': list(self.covariates)
        }


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Column-wise store of canonical observations.

    Arrays are read-only after construction so datasets can be shared across
    bootstrap and simulation workers.
    """
    left: np.ndarray
    right: np.ndarray
    delta: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        object.__setattr__(self, 'left', _frozen(self.left, float))
        object.__setattr__(self, 'right', _frozen(self.right, float))
        object.__setattr__(self, 'delta', _frozen(self.delta, np.int8).reshape(-1, 3))
        object.__setattr__(self, 'covariates', _frozen(covariates, float))
        if not self.covariate_names:
            names = tuple(f'x{j + 1}' for j in range(covariates.shape[1]))
            object.__setattr__(self, 'covariate_names', names)

    @classmethod
    def from_observations(cls, observations, covariate_names=()):
        observations = list(observations)
        p = len(observations[0].covariates) if observations else 0
        return cls(
            left=[o.left for o in observations],
            right=[o.right for o in observations],
            delta=[(o.delta_l, o.delta_i, o.delta_r) for o in observations],
            covariates=np.array([o.covariates for o in observations], dtype=float).reshape(-1, p),
            covariate_names=tuple(covariate_names)
        )

    @property
    def n(self):
        return self.left.shape[0]

    @property
    def p(self):
        return self.covariates.shape[1]

    def __len__(self):
        return self.n

    def __iter__(self):
        for i in range(self.n):
            yield self.observation(i)

    def observation(self, i):
        dl, di, dr = (int(v) for v in self.delta[i])
        return Observation(
            left=float(self.left[i]),
            right=float(self.right[i]),
            delta_l=dl,
            delta_i=di,
            delta_r=dr,
            covariates=tuple(float(v) for v in self.covariates[i])
        )

    @property
    def delta_l(self):
        return self.delta[:, 0]

    @property
    def delta_i(self):
        return self.delta[:, 1]

    @property
    def delta_r(self):
        return self.delta[:, 2]

    @cached_property
    def l_eff(self):
        return np.where(self.delta_l == 1, self.right, self.left)

    @cached_property
    def r_eff(self):
        return np.where(self.delta_r == 1, self.left, self.right)

    def censoring_counts(self):
        return {
            KIND_LEFT: int(self.delta_l.sum()),
            KIND_INTERVAL: int(self.delta_i.sum()),
            KIND_RIGHT: int(self.delta_r.sum())
        }

    def subset(self, indices):
        """Rows at the given positions, repeats allowed"""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            left=self.left[idx],
            right=self.right[idx],
            delta=self.delta[idx],
            covariates=self.covariates[idx],
            covariate_names=self.covariate_names
        )

    def drop(self, i):
        return self.subset(np.delete(np.arange(self.n), i))

    def to_frame(self):
        """Canonical six-plus-column layout, infinity kept as float('inf')"""
        frame = pd.DataFrame({
            'left': self.left,
            'right': self.right,
            'L': self.delta_l.astype(int),
            'I': self.delta_i.astype(int),
            'R': self.delta_r.astype(int)
        })
        for j, name in enumerate(self.covariate_names):
            frame[name] = self.covariates[:, j]
        return frame

    def to_dict(self):
        return {
            'n': self.n,
            'p': self.p,
            'covariate_names': list(self.covariate_names),
            'censoring': self.censoring_counts()
        }
