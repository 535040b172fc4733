"""
Direct quasi-Newton maximization of the log-likelihood over all of (eta, beta)

Serves as a reference optimizer for the MM fit and as the comparison point for the
timing benchmarks. Works on eta so the baseline jumps stay positive without bounds.
"""
import logging
import time
from dataclasses import replace

import numpy as np
from scipy import optimize

from src.models.params import ModelParams, ProfileConfig, SolverConfig
from src.models.results import BenchRecord, FitResult
from src.services.inference import profile_covariance
from src.services.likelihood import Design, lambda_gradient, loglik, loglik_gradient
from src.services.mm_solver import MMSolver
from src.services.simulate import Scenario, generate
from src.utils.errors import DomainError, EstimationError, InferenceError, PositivityError
from src.utils.monitoring import fit_tracker, log_fit_event
from src.utils.validation import ValidationError, validate_positive_integer

logger = logging.getLogger(__name__)

DIRECT_METHODS = ('BFGS', 'L-BFGS-B')
MIN_BENCH_SIZE = 50
LAMBDA_FLOOR = 1e-12
POLISH_FTOL = 1e-13
POLISH_GTOL = 1e-8


def negative_objective(theta, design):
    """(-loglik, -gradient) at theta = (eta, beta); +inf outside the valid region"""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return np.inf, np.zeros_like(theta)
    params = ModelParams.from_vector(theta, design.m)
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        try:
            u = design.u_terms(params)
            value = loglik(design, params)
            grad_eta, grad_beta = loglik_gradient(design, params, u)
        except (PositivityError, DomainError):
            return np.inf, np.zeros_like(theta)
    grad = np.concatenate([grad_eta, grad_beta])
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return np.inf, np.zeros_like(theta)
    return -value, -grad


def negative_lambda_objective(x, design):
    """(-loglik, -gradient) at x = (lambda, beta) for the bounded polishing pass"""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return np.inf, np.zeros_like(x)
    params = ModelParams(np.log(np.maximum(x[:design.m], LAMBDA_FLOOR)), x[design.m:])
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        try:
            u = design.u_terms(params)
            value = loglik(design, params)
            grad_lam, grad_beta = lambda_gradient(design, params, u)
        except (PositivityError, DomainError):
            return np.inf, np.zeros_like(x)
    grad = np.concatenate([grad_lam, grad_beta])
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return np.inf, np.zeros_like(x)
    return -value, -grad


def polish_fit(design, theta, value, max_iter):
    """
    Bounded L-BFGS-B on (lambda, beta) from an eta-scale optimum. Jumps sitting near zero
    have almost no eta gradient, so the eta-scale search can stop while mass still has
    to move between them. Returns (theta, loglik, success) or None when nothing improves.
    """
    m, p = design.m, design.p
    start = np.concatenate([np.maximum(np.exp(theta[:m]), LAMBDA_FLOOR), theta[m:]])
    bounds = [(LAMBDA_FLOOR, None)] * m + [(None, None)] * p
    result = optimize.minimize(
        negative_lambda_objective, start, args=(design,), jac=True, method='L-BFGS-B', bounds=bounds,
        options={'ftol': POLISH_FTOL, 'gtol': POLISH_GTOL, 'maxiter': max_iter}
    )
    polished_value = -float(result.fun)
    if not np.isfinite(polished_value) or polished_value <= value:
        return None
    lam = np.maximum(result.x[:m], LAMBDA_FLOOR)
    logger.debug(f"Polishing pass raised the log-likelihood by {polished_value - value:.3e}")
    return np.concatenate([np.log(lam), result.x[m:]]), polished_value, bool(result.success)


def direct_fit(design, init=None, method='BFGS', gtol=1e-6, max_iter=None, polish=True, label='direct_fit'):
    """
    Maximize the log-likelihood with scipy's quasi-Newton minimizer and the analytic
    gradient, then polish on the lambda scale. A failed line search gives
    converged=False rather than an exception. The inverse Hessian kept for standard
    errors is the one built by the eta-scale pass.
    """
    if method not in DIRECT_METHODS:
        raise ValidationError(f"Unknown direct method '{method}'", {'method': f"choose from {', '.join(DIRECT_METHODS)}"})
    if not (np.any(design.on_left) or np.any(design.on_interval)):
        raise EstimationError(
            "Degenerate data: no left- or interval-censored observations, the likelihood has no finite maximizer",
            {'censoring': design.data.censoring_counts()}
        )

    init = init if init is not None else ModelParams.initial(design.m, design.p)
    start_value, _ = negative_objective(init.vector(), design)
    if not np.isfinite(start_value):
        raise EstimationError("Initial state is outside the valid region")

    max_iter = max_iter or 200 * (design.m + design.p)
    started = time.perf_counter()
    result = optimize.minimize(
        negative_objective, init.vector(), args=(design,), jac=True, method=method,
        options={'gtol': gtol, 'maxiter': max_iter}
    )
    theta, value = np.asarray(result.x, dtype=float), -float(result.fun)
    converged = bool(result.success)
    polished = polish_fit(design, theta, value, max_iter) if polish and np.isfinite(value) else None
    if polished is not None:
        theta, value, polish_success = polished
        converged = converged or polish_success
    duration = time.perf_counter() - started

    params = ModelParams.from_vector(theta, design.m)
    hess_inv = result.hess_inv if method == 'BFGS' else result.hess_inv.todense()
    grad_eta, grad_beta = loglik_gradient(design, params)
    diagnostics = {
        'message': str(result.message),
        'n_evaluations': int(result.nfev),
        'max_gradient': float(np.max(np.abs(np.concatenate([grad_eta, grad_beta])), initial=0.0)),
        'polished': polished is not None,
        'hess_inv': np.asarray(hess_inv, dtype=float),
        'duration_s': duration
    }
    fit_tracker.record_fit(label, converged, int(result.nit), duration, value)
    if not converged:
        log_fit_event('nonconvergence', {'label': label, 'method': method, 'message': str(result.message)})

    return FitResult(
        params=params,
        loglik=value,
        n_iter=int(result.nit),
        converged=converged,
        grid=design.grid,
        loglik_trace=(-float(start_value), value),
        method='direct',
        diagnostics=diagnostics
    )


def direct_standard_errors(result):
    """Standard errors of beta from the beta block of the optimizer's inverse Hessian"""
    hess_inv = result.diagnostics.get('hess_inv')
    if hess_inv is None:
        raise InferenceError("Fit carries no inverse Hessian", {'method': result.method})
    m = result.grid.m
    block = np.asarray(hess_inv, dtype=float)[m:, m:]
    diag = np.diag(block)
    if np.any(diag <= 0):
        raise InferenceError("Inverse Hessian has a nonpositive diagonal in the beta block",
                             {'diagonal': diag.tolist()})
    return np.sqrt(diag)


def _median_time(run, repetitions):
    timings = []
    outcome = None
    for _ in range(repetitions):
        started = time.perf_counter()
        outcome = run()
        timings.append(time.perf_counter() - started)
    return float(np.median(timings)), outcome


def _timed_errors(compute, n, method):
    """Standard errors, or None when they cannot be formed; the attempt still counts toward ATS"""
    try:
        return compute()
    except InferenceError as e:
        logger.warning(f"Bench n={n} {method}: no standard errors ({e.message})")
        return None


def bench(sizes, scenario_kind='const_hazard', repetitions=3, seed=0, solver_config=None, profile_config=None):
    """
    Median wall-clock times per method and sample size, single-threaded. ATE covers the
    estimate only, ATS the estimate plus each method's own standard errors.
    """
    sizes = [validate_positive_integer(n, 'sizes', minimum=MIN_BENCH_SIZE) for n in sizes]
    repetitions = validate_positive_integer(repetitions, 'repetitions', minimum=1)
    solver_config = solver_config or SolverConfig()
    profile_config = profile_config or ProfileConfig(solver=solver_config)

    records = []
    for n in sizes:
        scenario = Scenario(kind=scenario_kind, n=n, seed=seed)
        data = generate(scenario)
        design = Design.build(data, scenario.process())

        def mm_estimate():
            return MMSolver(design, solver_config).fit(label='bench-mm')

        def mm_with_se():
            fit = mm_estimate()
            return fit, _timed_errors(lambda: profile_covariance(design, fit, profile_config), n, 'mm')

        def direct_estimate():
            return direct_fit(design, label='bench-direct')

        def direct_with_se():
            fit = direct_estimate()
            return fit, _timed_errors(lambda: direct_standard_errors(fit), n, 'direct')

        # warm cache
        mm_estimate()
        direct_estimate()

        ate_mm, mm_result = _median_time(mm_estimate, repetitions)
        ats_mm, _ = _median_time(mm_with_se, repetitions)
        ate_direct, direct_result = _median_time(direct_estimate, repetitions)
        ats_direct, _ = _median_time(direct_with_se, repetitions)

        records.append(BenchRecord('mm', n, design.m, design.p, ate_mm, ats_mm, float(mm_result.loglik)))
        records.append(BenchRecord('direct', n, design.m, design.p, ate_direct, ats_direct, float(direct_result.loglik)))
        logger.info(f"Bench n={n} m={design.m}: mm {ate_mm:.3f}s, direct {ate_direct:.3f}s "
                    f"(ratio {ate_direct / ate_mm:.1f})")
    return records


def round_inspection_times(data, decimals):
    """Dataset with inspection times rounded, keeping every row's censoring type valid"""
    unit = 10.0 ** (-decimals)
    left = np.round(data.left, decimals)
    right = np.where(np.isfinite(data.right), np.round(data.right, decimals), np.inf)
    left = np.where(data.delta_l == 1, 0.0, np.maximum(left, unit))
    right = np.where(data.delta_l == 1, np.maximum(right, unit), right)
    right = np.where(data.delta_i == 1, np.maximum(right, left + unit), right)
    return replace(data, left=left, right=right)


def sweep_timings(n=500, resolutions=(0, 1, 2, 3), seed=0, scenario_kind='const_hazard', repetitions=5):
    """
    Per-sweep MM time for grids of different size m at fixed n, obtained by rounding the
    inspection times of one simulated dataset to fewer decimals.
    """
    data = generate(Scenario(kind=scenario_kind, n=n, seed=seed))
    rows = []
    for decimals in resolutions:
        design = Design.build(round_inspection_times(data, decimals))
        solver = MMSolver(design)
        state = solver.initial_state()
        solver.sweep(state)
        per_sweep, _ = _median_time(lambda: solver.sweep(state), repetitions)
        rows.append({'decimals': int(decimals), 'n': n, 'm': design.m, 'sweep_s': per_sweep})
        logger.debug(f"Sweep timing decimals={decimals} m={design.m}: {per_sweep:.5f}s")
    return rows


def complexity_slope(rows):
    """Log-log slope of per-sweep time against grid size"""
    m = np.array([r['m'] for r in rows], dtype=float)
    seconds = np.array([r['sweep_s'] for r in rows], dtype=float)
    if np.unique(m).size < 2:
        raise ValidationError("Need at least two distinct grid sizes", {'m': m.tolist()})
    slope, _ = np.polyfit(np.log(m), np.log(seconds), 1)
    return float(slope)
