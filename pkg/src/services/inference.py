"""
Profile likelihood standard errors for the regression coefficients

pl(beta) = max over eta of loglik(eta, beta), computed with the MM loop restricted to eta
and warm-started at the full fit. The covariance of beta-hat is -D^{-1}, where

    D_rs = {pl(b) - pl(b + h e_r) - pl(b + h e_s) + pl(b + h e_r + h e_s)} / h^2

and h = c / sqrt(n). The result depends on c; bootstrap standard errors are the
recommended cross-check.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from src.models.params import ModelParams, ProfileConfig, SolverConfig
from src.models.results import ProfileCovariance
from src.services.mm_solver import MMSolver
from src.utils.errors import EstimationError, InferenceError

logger = logging.getLogger(__name__)


def _profile_fit(design, beta, warm_start, config=None):
    cfg = (config or SolverConfig()).replace(freeze_beta=True)
    beta = np.asarray(beta, dtype=float)
    init = ModelParams(np.asarray(warm_start, dtype=float), beta)
    try:
        result = MMSolver(design, cfg).fit(init, label='profile')
    except EstimationError as e:
        raise InferenceError(f"Profile fit failed at beta={beta.tolist()}: {e.message}",
                             {'beta': beta.tolist(), **e.details})
    if not result.converged:
        raise InferenceError(
            f"Profile inner loop did not converge at beta={beta.tolist()}",
            {'beta': beta.tolist(), 'loglik_trace': [float(v) for v in result.loglik_trace]}
        )
    return result


def profile_eta(design, beta, warm_start, config=None):
    """eta maximizing loglik(., beta) with beta held fixed"""
    return _profile_fit(design, beta, warm_start, config).params.eta


def profile_loglik(design, beta, warm_start, config=None):
    """pl(beta) = loglik(eta-hat(beta), beta)"""
    return float(_profile_fit(design, beta, warm_start, config).loglik)


def stencil_offsets(p):
    """Distinct offsets (in units of h) needed for the forward second differences"""
    offsets = [(0,) * p]
    for r in range(p):
        e_r = [0] * p
        e_r[r] = 1
        offsets.append(tuple(e_r))
    for r in range(p):
        for s in range(r, p):
            both = [0] * p
            both[r] += 1
            both[s] += 1
            offsets.append(tuple(both))
    return offsets


def profile_covariance(design, fit, config=None, threads=1):
    """Covariance -D^{-1} and standard errors of beta-hat from the profile likelihood"""
    config = (config or ProfileConfig()).validate()
    if not fit.converged:
        raise InferenceError("Profile covariance needs a converged fit", {'n_iter': fit.n_iter})
    p = design.p
    if p == 0:
        raise InferenceError("No regression coefficients to profile")

    h = float(config.step(design.n))
    beta_hat = fit.params.beta
    warm = fit.params.eta
    offsets = stencil_offsets(p)

    def evaluate(offset):
        return profile_loglik(design, beta_hat + h * np.asarray(offset, dtype=float), warm, config.solver)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(evaluate, offsets))
    else:
        values = [evaluate(offset) for offset in offsets]
    cache = dict(zip(offsets, values))

    def unit(*indices):
        vec = [0] * p
        for j in indices:
            vec[j] += 1
        return tuple(vec)

    d_matrix = np.zeros((p, p))
    base = cache[unit()]
    for r in range(p):
        for s in range(r, p):
            d_matrix[r, s] = (base - cache[unit(r)] - cache[unit(s)] + cache[unit(r, s)]) / h ** 2
            d_matrix[s, r] = d_matrix[r, s]

    eigenvalues = np.linalg.eigvalsh(-d_matrix)
    if not np.all(eigenvalues > 0):
        raise InferenceError(
            "-D is not positive definite; try another hn multiplier",
            {'eigenvalues': eigenvalues.tolist(), 'hn': h}
        )
    cov = -np.linalg.inv(d_matrix)
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.diag(cov))
    logger.info(f"Profile SE with hn={h:.6g}: {np.round(se, 8).tolist()} ({len(cache)} profile fits)")
    return ProfileCovariance(cov=cov, se=se, d_matrix=d_matrix, hn=h, n_evaluations=len(cache))
