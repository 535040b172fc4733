"""
Observed-data log-likelihood of the additive risks model under case-II interval censoring

For subject i with cumulative terms

    uL  = Lambda(L) + beta' Z(L)
    uLR = Lambda(R) - Lambda(L) + beta' (Z(R) - Z(L))
    uR  = Lambda(R) + beta' Z(R)

the contribution is  dL log(1 - e^-uL) - dI uL + dI log(1 - e^-uLR) - dR uR.

Also hosts the surrogate function that minorizes the log-likelihood around an anchor
state; the solver only needs its derivatives, the full value is kept for verification.
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.models.grid import build_grid
from src.models.process import TimeIndependent
from src.utils.errors import DomainError, PositivityError

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


def _scalar_or_array(values, like):
    return float(values) if np.ndim(like) == 0 else values


def log1mexp(u):
    """log(1 - exp(-u)) for u > 0, accurate for tiny u and exactly 0 once exp(-u) underflows"""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(arr)
    small = arr <= LN2
    out[small] = np.log(-np.expm1(-arr[small]))
    out[~small] = np.log1p(-np.exp(-arr[~small]))
    return _scalar_or_array(out[0] if np.ndim(u) == 0 else out, u)


def _check_domain(arr, name):
    if np.any(~(arr > 0)):
        raise DomainError(f"{name}(u) needs u > 0", {'min_u': float(np.nanmin(arr)) if arr.size else None})


def a1(u):
    """A1(u) = e^-u / (1 - e^-u) = 1 / (e^u - 1)"""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    _check_domain(arr, 'a1')
    with np.errstate(over='ignore'):
        out = 1.0 / np.expm1(arr)
    return _scalar_or_array(out[0] if np.ndim(u) == 0 else out, u)


def a2(u):
    """A2(u) = e^-u / (2 (1 - e^-u)^2)"""
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    _check_domain(arr, 'a2')
    out = 0.5 * np.exp(-arr) / np.expm1(-arr) ** 2
    return _scalar_or_array(out[0] if np.ndim(u) == 0 else out, u)


def guarded_ratio(num, den, active=None):
    """
    num / den elementwise with 0/0 defined as 0.

    Entries outside `active` are 0. A nonzero numerator over a zero denominator
    raises DomainError.
    """
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    if active is None:
        active = np.ones(num.shape, dtype=bool)
    else:
        active = np.broadcast_to(np.asarray(active, dtype=bool), num.shape)
    zero_den = active & (den == 0)
    if np.any(zero_den & (num != 0)):
        raise DomainError("Nonzero numerator over a zero denominator",
                          {'rows': np.flatnonzero(zero_den & (num != 0))[:10].tolist()})
    out = np.zeros(num.shape)
    ok = active & ~zero_den
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True)
class UTerms:
    """Cumulative hazard-plus-covariate sums at L, R and over (L, R]"""
    u_left: object
    u_right: object
    u_between: object

    def to_dict(self):
        return {
            'uL': np.asarray(self.u_left).tolist(),
            'uR': np.asarray(self.u_right).tolist(),
            'uLR': np.asarray(self.u_between).tolist()
        }


@dataclass(frozen=True)
class LoglikComponents:
    left: float
    interval_survival: float
    interval_gap: float
    right: float

    @property
    def total(self):
        return self.left + self.interval_survival + self.interval_gap + self.right

    def to_dict(self):
        return {
            'l1': self.left,
            'l2': self.interval_survival,
            'l3': self.interval_gap,
            'l4': self.right,
            'total': self.total
        }


@dataclass(frozen=True)
class SurrogateParts:
    """Per-jump terms, the regression term and the constant of the surrogate"""
    per_jump: np.ndarray
    regression: float
    constant: float

    @property
    def total(self):
        return float(np.sum(self.per_jump)) + self.regression + self.constant


class Design:
    """
    A dataset bound to its inspection grid and covariate process.

    Holds the censoring indicators, the grid masks as float matrices and the cumulative
    covariates at each subject's inspection points, so that every likelihood quantity is
    a handful of matrix-vector products.
    """

    def __init__(self, data, grid, process):
        self.data = data
        self.grid = grid
        self.process = process
        self.dl = data.delta_l.astype(float)
        self.di = data.delta_i.astype(float)
        self.dr = data.delta_r.astype(float)
        self.on_left = data.delta_l == 1
        self.on_interval = data.delta_i == 1
        self.on_right = data.delta_r == 1
        self.upto_left = grid.upto_left_f
        self.between = grid.between_f
        self.upto_right = grid.upto_right_f
        self.z_left = process.cumulative(data.covariates, data.l_eff)
        self.z_right = process.cumulative(data.covariates, data.r_eff)
        self.z_between = self.z_right - self.z_left
        self.zero_left = ~np.any(self.z_left != 0, axis=1)
        self.zero_between = ~np.any(self.z_between != 0, axis=1)

    @classmethod
    def build(cls, data, process=None, grid=None):
        return cls(data, grid if grid is not None else build_grid(data), process or TimeIndependent())

    @property
    def n(self):
        return self.data.n

    @property
    def m(self):
        return self.grid.m

    @property
    def p(self):
        return self.data.p

    def u_terms(self, params, check=True):
        lam = params.lam
        beta = params.beta
        u = UTerms(
            u_left=self.upto_left @ lam + self.z_left @ beta,
            u_right=self.upto_right @ lam + self.z_right @ beta,
            u_between=self.between @ lam + self.z_between @ beta
        )
        if check:
            self.check_positive(u)
        return u

    def check_positive(self, u):
        bad = (
            (self.on_left & ~(u.u_left > 0))
            | (self.on_interval & (~(u.u_between > 0) | ~(u.u_left >= 0)))
            | (self.on_right & ~(u.u_right >= 0))
        )
        if np.any(bad):
            rows = np.flatnonzero(bad)
            raise PositivityError(
                f"Hazard positivity violated for {rows.size} observation(s)",
                {'rows': rows[:10].tolist()}
            )

    def regression_terms(self, beta):
        """
        beta'Z(L) and beta'(Z(R) - Z(L)), the shares of uL and uLR carried by covariates.

        They act as Jensen weights in the surrogate, so they must be nonnegative on
        left- and interval-censored rows.
        """
        s_left = self.z_left @ beta
        s_between = self.z_between @ beta
        if np.any(self.on_left & (s_left < 0)) or np.any(self.on_interval & (s_between < 0)):
            raise DomainError(
                "Negative covariate share beta'Z: outside the region where the surrogate is valid",
                {'min_left': float(np.min(s_left[self.on_left], initial=0.0)),
                 'min_between': float(np.min(s_between[self.on_interval], initial=0.0))}
            )
        return s_left, s_between

    def check_state(self, params, strict=True):
        """
        Positive u-terms and nonnegative covariate shares; with `strict` the shares must
        also be positive on rows with nonzero covariates, as the beta curvature divides by them.
        """
        u = self.u_terms(params)
        s_left, s_between = self.regression_terms(params.beta)
        if strict and (np.any(self.on_left & ~self.zero_left & (s_left == 0))
                or np.any(self.on_interval & ~self.zero_between & (s_between == 0))):
            raise DomainError("Zero covariate share beta'Z on a row with nonzero covariates")
        return u


def u_terms(obs, grid, params, process=None):
    """
    u-terms of a single observation, by direct comparison against the grid times.

    Positivity is enforced for the terms the observation's likelihood uses.
    """
    process = process or TimeIndependent()
    times = grid.times
    lam = params.lam
    x = np.asarray(obs.covariates, dtype=float)
    lower, upper = obs.l_eff, obs.r_eff
    z_lower = process.at(x, lower) if x.size else np.zeros(0)
    z_upper = process.at(x, upper) if x.size else np.zeros(0)
    beta = params.beta

    u = UTerms(
        u_left=float(lam[times <= lower].sum() + z_lower @ beta),
        u_right=float(lam[times <= upper].sum() + z_upper @ beta),
        u_between=float(lam[(times > lower) & (times <= upper)].sum() + (z_upper - z_lower) @ beta)
    )
    bad = {
        'left': obs.delta_l and not u.u_left > 0,
        'interval': obs.delta_i and not (u.u_between > 0 and u.u_left >= 0),
        'right': obs.delta_r and not u.u_right >= 0
    }
    if bad[obs.kind]:
        raise PositivityError(f"Hazard positivity violated for a {obs.kind}-censored observation",
                              {'u_terms': u.to_dict()})
    return u


def _active(values, mask, fill=1.0):
    return np.where(mask, values, fill)


def loglik_components(design, params):
    u = design.u_terms(params)
    return LoglikComponents(
        left=float(np.sum(log1mexp(u.u_left[design.on_left]))),
        interval_survival=float(-np.sum(u.u_left[design.on_interval])),
        interval_gap=float(np.sum(log1mexp(u.u_between[design.on_interval]))),
        right=float(-np.sum(u.u_right[design.on_right]))
    )


def loglik(design, params):
    """Observed-data log-likelihood; raises PositivityError outside the valid region"""
    return loglik_components(design, params).total


def score_weights(design, u):
    """Per-row weights multiplying the upto_left, between and upto_right masks in the gradient"""
    w_left = design.dl * a1(_active(u.u_left, design.on_left)) - design.di
    w_between = design.di * a1(_active(u.u_between, design.on_interval))
    w_right = -design.dr
    return w_left, w_between, w_right


def lambda_gradient(design, params, u=None):
    """Analytic gradient of the log-likelihood in (lambda, beta)"""
    u = u if u is not None else design.u_terms(params)
    w_left, w_between, w_right = score_weights(design, u)
    grad_lam = design.upto_left.T @ w_left + design.between.T @ w_between + design.upto_right.T @ w_right
    grad_beta = design.z_left.T @ w_left + design.z_between.T @ w_between + design.z_right.T @ w_right
    return grad_lam, grad_beta


def loglik_gradient(design, params, u=None):
    """Analytic gradient of the log-likelihood in (eta, beta)"""
    grad_lam, grad_beta = lambda_gradient(design, params, u)
    return params.lam * grad_lam, grad_beta


def minorizer_parts(design, params, anchor):
    """
    Surrogate pieces at `params` built around `anchor`.

    The surrogate is separable: one term per baseline jump, one term in beta and a
    constant. It equals the log-likelihood at the anchor and lies below it wherever
    lambda > 0 and the covariate shares beta'Z are nonnegative.
    """
    u0 = design.u_terms(anchor)
    on_l, on_i = design.on_left, design.on_interval
    dl, di, dr = design.dl, design.di, design.dr

    ul = _active(u0.u_left, on_l)
    ug = _active(u0.u_between, on_i)
    a1_l, a1_g = a1(ul), a1(ug)
    a2_l, a2_g = a2(ul), a2(ug)

    inv_l, inv_g = dl / ul, di / ug
    lin_l = dl * (a1_l + 2 * a2_l * ul - 1 / ul)
    lin_g = di * (a1_g + 2 * a2_g * ug - 1 / ug)
    quad_l = dl * a2_l * ul
    quad_g = di * a2_g * ug

    ml, mg, mr = design.upto_left, design.between, design.upto_right
    coef_inv = ml.T @ inv_l + mg.T @ inv_g
    coef_lin = ml.T @ lin_l + mg.T @ lin_g - ml.T @ di - mr.T @ dr
    coef_quad = ml.T @ quad_l + mg.T @ quad_g

    lam, lam0 = params.lam, anchor.lam
    per_jump = -lam0 ** 2 / lam * coef_inv + lam * coef_lin - lam ** 2 / lam0 * coef_quad

    s_l, s_g = design.regression_terms(params.beta)
    s_l0, s_g0 = design.regression_terms(anchor.beta)
    regression = (
        - np.sum(inv_l * guarded_ratio(s_l0 ** 2, s_l, on_l))
        - np.sum(inv_g * guarded_ratio(s_g0 ** 2, s_g, on_i))
        + np.sum(lin_l * s_l + lin_g * s_g)
        - np.sum(di * s_l)
        - np.sum(dr * (design.z_right @ params.beta))
        - np.sum(quad_l * guarded_ratio(s_l ** 2, s_l0, on_l))
        - np.sum(quad_g * guarded_ratio(s_g ** 2, s_g0, on_i))
    )

    # Each left/interval row carries the log-bound constant 1 on top of its own 1.
    constant = (
        np.sum(dl * (log1mexp(ul) - a1_l * ul - a2_l * ul ** 2 + 2.0))
        + np.sum(di * (log1mexp(ug) - a1_g * ug - a2_g * ug ** 2 + 2.0))
    )
    return SurrogateParts(per_jump=per_jump, regression=float(regression), constant=float(constant))


def minorizer(design, params, anchor):
    """Surrogate value at `params` for the anchor state"""
    return minorizer_parts(design, params, anchor).total
