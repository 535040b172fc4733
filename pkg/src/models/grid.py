"""
Inspection grid, step-function cumulative baseline hazard and survival
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from src.models.process import TimeIndependent
from src.utils.errors import PositivityError
from src.utils.validation import ValidationError


def _readonly(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class InspectionGrid:
    """
    Sorted unique finite inspection times t_1 < ... < t_m and, per observation,
    boolean masks over k:

    - `upto_left`  : t_k <= L
    - `between`    : L < t_k <= R
    - `upto_right` : t_k <= R

    with L and R the canonical inspection points of each observation.
    """
    times: np.ndarray
    upto_left: np.ndarray
    between: np.ndarray
    upto_right: np.ndarray

    @property
    def m(self):
        return self.times.shape[0]

    @cached_property
    def upto_left_f(self):
        return self.upto_left.astype(float)

    @cached_property
    def between_f(self):
        return self.between.astype(float)

    @cached_property
    def upto_right_f(self):
        return self.upto_right.astype(float)

    def index_sets(self, i):
        """Index sets for observation i, for inspection and tests"""
        return {
            'upto_left': np.flatnonzero(self.upto_left[i]),
            'between': np.flatnonzero(self.between[i]),
            'upto_right': np.flatnonzero(self.upto_right[i])
        }

    def to_dict(self):
        return {'m': self.m, 'times': self.times.tolist()}


def grid_times(data):
    """Deduplicated finite canonical endpoints, compared exactly"""
    points = np.concatenate([
        data.l_eff[data.delta_l == 1],
        data.l_eff[data.delta_i == 1],
        data.r_eff[data.delta_i == 1],
        data.r_eff[data.delta_r == 1]
    ])
    points = points[np.isfinite(points)]
    return np.unique(points)


def build_grid(data):
    """Build the inspection grid and per-observation masks for a dataset"""
    if data.n == 0:
        raise ValidationError("Cannot build a grid from an empty dataset", {'rows': 'no data rows'})
    times = grid_times(data)
    if times.size == 0:
        raise ValidationError("No finite inspection time in any observation", {'rows': 'no finite endpoint'})

    lower = data.l_eff[:, None]
    upper = data.r_eff[:, None]
    t = times[None, :]
    return InspectionGrid(
        times=_readonly(times),
        upto_left=_readonly(t <= lower),
        between=_readonly((t > lower) & (t <= upper)),
        upto_right=_readonly(t <= upper)
    )


def cumulative_hazard(grid, eta, t):
    """
    Lambda(t) = sum of exp(eta_k) over grid points t_k <= t.

    `grid` may be an InspectionGrid or a plain vector of times. Returns a float for
    scalar `t`, an array otherwise; beyond t_m the last step value is kept.
    """
    times = grid.times if isinstance(grid, InspectionGrid) else np.asarray(grid, dtype=float)
    steps = np.concatenate([[0.0], np.cumsum(np.exp(np.asarray(eta, dtype=float)))])
    idx = np.searchsorted(times, t, side='right')
    out = steps[idx]
    return float(out) if np.ndim(out) == 0 else out


def survival(grid, params, process=None, t=0.0, x=None):
    """
    S(t; x) = exp(-(Lambda(t) + beta' Z_x(t))) for one covariate vector `x`.

    Raises PositivityError when the cumulative hazard argument is negative.
    """
    process = process or TimeIndependent()
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    beta = np.asarray(params.beta, dtype=float)
    x = np.zeros(beta.shape[0]) if x is None else np.asarray(x, dtype=float)

    base = np.atleast_1d(cumulative_hazard(grid, params.eta, t_arr))
    if beta.size:
        z = process.cumulative(np.repeat(x[None, :], t_arr.size, axis=0), t_arr)
        hazard = base + z @ beta
    else:
        hazard = base

    if np.any(hazard < 0):
        raise PositivityError(
            "Negative cumulative hazard: the additive model is outside its valid region",
            {'times': t_arr[hazard < 0].tolist(), 'values': hazard[hazard < 0].tolist()}
        )
    out = np.exp(-hazard)
    return float(out[0]) if np.ndim(t) == 0 else out
