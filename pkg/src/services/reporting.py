"""
Report payloads shared by the command line and the HTTP service
"""
import numpy as np


def build_fit_report(data, fit, covariance=None):
    """Estimates, profile standard errors, baseline jumps and grid for one fit"""
    se = covariance.se if covariance is not None else np.full(fit.params.p, np.nan)
    beta = [
        {'name': name, 'estimate': float(est), 'se': None if np.isnan(s) else float(s)}
        for name, est, s in zip(data.covariate_names, fit.params.beta, se)
    ]
    return {
        'beta': beta,
        'covariance': None if covariance is None else np.asarray(covariance.cov, dtype=float).tolist(),
        'hn': None if covariance is None else float(covariance.hn),
        'lambda': [float(v) for v in fit.params.lam],
        'times': [float(t) for t in fit.grid.times],
        'loglik': float(fit.loglik),
        'n_iter': int(fit.n_iter),
        'converged': bool(fit.converged),
        'n': int(data.n),
        'm': int(fit.grid.m),
        'p': int(fit.params.p)
    }


def build_boot_report(result, data):
    report = result.to_dict()
    report['names'] = list(data.covariate_names)
    return report


def build_trace_report(error_or_fit):
    """Log-likelihood trace for a non-converged run"""
    trace = getattr(error_or_fit, 'loglik_trace', None)
    if trace is None:
        trace = getattr(error_or_fit, 'trace', None) or []
    return {'converged': False, 'loglik_trace': [float(v) for v in trace]}
