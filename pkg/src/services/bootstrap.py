"""
Nonparametric bootstrap over subjects

Replicate r draws n subjects with replacement using its own random stream, derived from
(seed, r), then refits on a rebuilt grid. Replicates run in a thread pool and are
aggregated in index order, so results do not depend on the worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from src.models.grid import survival
from src.models.params import BootConfig, ModelParams, SolverConfig, normalize_ci_types
from src.models.process import TimeIndependent
from src.models.results import BootstrapResult
from src.services.likelihood import Design
from src.services.mm_solver import MMSolver
from src.utils.config import get_thread_count
from src.utils.errors import ARMError, BootstrapError
from src.utils.monitoring import log_fit_event
from src.utils.validation import ValidationError

logger = logging.getLogger(__name__)


def replicate_rng(seed, index):
    """Independent generator for replicate `index`, identical whatever the schedule"""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def resample_indices(n, rng):
    return rng.integers(0, n, size=n)


def resample(data, rng):
    """n subjects drawn with replacement"""
    if data.n < 2:
        raise ValidationError("Bootstrap needs at least 2 observations", {'n': data.n})
    return data.subset(resample_indices(data.n, rng))


@dataclass(frozen=True, eq=False)
class ReplicateFit:
    """The parts of a fit needed after the fact: grid times and parameters"""
    times: np.ndarray
    params: ModelParams
    converged: bool
    error: str = None

    @property
    def ok(self):
        return self.converged and self.error is None

    def survival(self, process, x, time_points):
        return survival(self.times, self.params, process, np.asarray(time_points, dtype=float), x)


def fit_replicate(data, solver_config=None, process=None, label='replicate'):
    """Fit one dataset, turning estimation failures into a failed replicate"""
    try:
        result = MMSolver(Design.build(data, process), solver_config).fit(label=label)
    except (ARMError, np.linalg.LinAlgError) as e:
        logger.debug(f"{label} failed: {e}")
        return ReplicateFit(times=np.zeros(0), params=ModelParams(np.zeros(0), np.zeros(data.p)),
                            converged=False, error=str(e))
    return ReplicateFit(times=np.asarray(result.grid.times), params=result.params, converged=result.converged)


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_replicates(data, boot_num, seed, solver_config=None, process=None, threads=1):
    """Bootstrap refits in replicate order"""
    def one(index):
        return fit_replicate(resample(data, replicate_rng(seed, index)), solver_config, process,
                             label=f'replicate-{index}')
    return _map(one, range(boot_num), threads)


def jackknife_fits(data, solver_config=None, process=None, threads=1):
    """Leave-one-out refits, used for the BCa acceleration"""
    def one(index):
        return fit_replicate(data.drop(index), solver_config, process, label=f'jackknife-{index}')
    return _map(one, range(data.n), threads)


def _tail(conf):
    return (1.0 - conf) / 2.0


def quantiles(replicates, probs):
    """Type-7 (linear interpolation) empirical quantiles, column-wise"""
    return np.quantile(np.asarray(replicates, dtype=float), probs, axis=0, method='linear')


def normal_interval(estimate, replicates, conf=0.95):
    """Bias-corrected normal interval: 2*est - mean(rep) -/+ z * sd(rep)"""
    estimate = np.asarray(estimate, dtype=float)
    replicates = np.asarray(replicates, dtype=float)
    z = stats.norm.ppf(1 - _tail(conf))
    center = 2 * estimate - replicates.mean(axis=0)
    half = z * replicates.std(axis=0, ddof=1)
    return np.column_stack([center - half, center + half])


def percentile_interval(replicates, conf=0.95):
    alpha = _tail(conf)
    low, high = quantiles(replicates, [alpha, 1 - alpha])
    return np.column_stack([low, high])


def basic_interval(estimate, replicates, conf=0.95):
    """Percentile quantiles reflected about the estimate"""
    estimate = np.asarray(estimate, dtype=float)
    perc = percentile_interval(replicates, conf)
    return np.column_stack([2 * estimate - perc[:, 1], 2 * estimate - perc[:, 0]])


def bca_acceleration(jackknife_values):
    """a = sum(U^3) / (6 (sum U^2)^1.5) with U = mean(jv) - jv, column-wise"""
    jv = np.asarray(jackknife_values, dtype=float)
    if jv.ndim == 1:
        jv = jv[:, None]
    u = jv.mean(axis=0) - jv
    num = np.sum(u ** 3, axis=0)
    den = 6.0 * np.sum(u ** 2, axis=0) ** 1.5
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def bias_correction(estimate, replicates):
    """z0 = Phi^-1(share of replicates below the estimate), share kept inside (0, 1)"""
    replicates = np.asarray(replicates, dtype=float)
    count = replicates.shape[0]
    share = np.mean(replicates < np.asarray(estimate, dtype=float), axis=0)
    share = np.clip(share, 0.5 / count, 1 - 0.5 / count)
    return stats.norm.ppf(share)


def bca_interval(estimate, replicates, jackknife_values, conf=0.95):
    """Bias-corrected and accelerated percentile interval"""
    replicates = np.asarray(replicates, dtype=float)
    if replicates.ndim == 1:
        replicates = replicates[:, None]
    z0 = bias_correction(estimate, replicates)
    accel = bca_acceleration(jackknife_values)
    alpha = _tail(conf)
    out = np.zeros((replicates.shape[1], 2))
    for j in range(replicates.shape[1]):
        bounds = []
        for z_alpha in (stats.norm.ppf(alpha), stats.norm.ppf(1 - alpha)):
            shifted = z0[j] + z_alpha
            bounds.append(stats.norm.cdf(z0[j] + shifted / (1 - accel[j] * shifted)))
        out[j] = quantiles(replicates[:, j], bounds)
    return out


def confidence_intervals(estimate, replicates, conf, ci_types, jackknife_values=None):
    """Requested interval families, each a (k, 2) array of lower/upper bounds"""
    out = {}
    for ci_type in normalize_ci_types(ci_types):
        if ci_type == 'norm':
            out[ci_type] = normal_interval(estimate, replicates, conf)
        elif ci_type == 'basic':
            out[ci_type] = basic_interval(estimate, replicates, conf)
        elif ci_type == 'perc':
            out[ci_type] = percentile_interval(replicates, conf)
        elif ci_type == 'bca':
            if jackknife_values is None:
                raise BootstrapError("BCa interval needs jackknife values")
            out[ci_type] = bca_interval(estimate, replicates, jackknife_values, conf)
    return out


def _clamp(intervals):
    return {k: np.clip(v, 0.0, 1.0) for k, v in intervals.items()}


def _target_values(fit, process, x, time_points):
    """beta, then survival at the time points when requested"""
    values = [np.asarray(fit.params.beta, dtype=float)]
    if time_points is not None:
        values.append(np.atleast_1d(fit.survival(process, x, time_points)))
    return np.concatenate(values)


def _collect(fits, process, x, time_points):
    rows, failures = [], 0
    for fit in fits:
        if not fit.ok:
            failures += 1
            continue
        try:
            rows.append(_target_values(fit, process, x, time_points))
        except ARMError as e:
            logger.debug(f"Replicate dropped while evaluating targets: {e}")
            failures += 1
    return rows, failures


def boot_analyze(data, boot_config=None, solver_config=None, process=None, threads=None):
    """Bootstrap standard errors and confidence intervals for beta and optional survival targets"""
    cfg = (boot_config or BootConfig()).validate()
    solver_config = solver_config or SolverConfig()
    process = process or TimeIndependent()
    threads = get_thread_count(threads)
    ci_types = normalize_ci_types(cfg.ci_types)

    base = fit_replicate(data, solver_config, process, label='bootstrap-base')
    if not base.ok:
        raise BootstrapError("Base fit did not converge", {'error': base.error})

    time_points, x = None, None
    if cfg.wants_survival:
        time_points = np.asarray(cfg.time_points, dtype=float)
        if np.any(time_points < 0) or np.any(time_points > base.times[-1]):
            raise ValidationError("Survival time points must lie within the inspection range",
                                  {'time_points': f"allowed range [0, {base.times[-1]}]"})
        x = np.zeros(data.p) if cfg.covariate_value is None else np.asarray(cfg.covariate_value, dtype=float)
        if x.shape != (data.p,):
            raise ValidationError("Covariate vector has the wrong length", {'covariate_value': f"expected {data.p} values"})

    estimate = _target_values(base, process, x, time_points)
    fits = run_replicates(data, cfg.boot_num, cfg.seed, solver_config, process, threads)
    rows, n_failed = _collect(fits, process, x, time_points)

    if n_failed > cfg.max_failure_rate * cfg.boot_num or len(rows) < 2:
        log_fit_event('bootstrap_unstable', {'boot_num': cfg.boot_num, 'n_failed': n_failed})
        raise BootstrapError(
            f"{n_failed} of {cfg.boot_num} bootstrap replicates failed",
            {'n_failed': n_failed, 'boot_num': cfg.boot_num}
        )
    replicates = np.vstack(rows)

    jackknife = None
    if 'bca' in ci_types:
        jack_rows, jack_failed = _collect(jackknife_fits(data, solver_config, process, threads), process, x, time_points)
        if jack_failed:
            logger.warning(f"{jack_failed} leave-one-out fit(s) failed; acceleration uses the rest")
        jackknife = np.vstack(jack_rows) if jack_rows else np.zeros((0, estimate.size))

    intervals = confidence_intervals(estimate, replicates, cfg.conf, ci_types, jackknife)
    se = replicates.std(axis=0, ddof=1)
    p = data.p

    result = BootstrapResult(
        estimate=estimate[:p],
        replicate_betas=replicates[:, :p],
        boot_se=se[:p],
        ci={k: v[:p] for k, v in intervals.items()},
        conf=cfg.conf,
        n_failed=n_failed,
        boot_num=cfg.boot_num,
        time_points=time_points,
        covariate_value=x,
        surv_estimate=None if time_points is None else estimate[p:],
        replicate_survivals=None if time_points is None else replicates[:, p:],
        surv_se=None if time_points is None else se[p:],
        surv_ci=None if time_points is None else _clamp({k: v[p:] for k, v in intervals.items()})
    )
    log_fit_event('bootstrap_complete', {
        'boot_num': cfg.boot_num,
        'n_failed': n_failed,
        'boot_se': result.boot_se.tolist()
    })
    return result


def resolve_column(data, group_col):
    """Covariate position from a name or a 0-based index"""
    if isinstance(group_col, str) and group_col in data.covariate_names:
        return data.covariate_names.index(group_col)
    try:
        index = int(group_col)
    except (TypeError, ValueError):
        raise ValidationError(f"Unknown covariate column '{group_col}'",
                              {'group_col': f"choose from {', '.join(data.covariate_names)}"})
    if not 0 <= index < data.p:
        raise ValidationError(f"Covariate index {index} out of range", {'group_col': f"0..{data.p - 1}"})
    return index


def survival_bands(data, group_col=0, boot_num=200, conf=0.95, ci_type='perc', seed=0,
                   solver_config=None, process=None, threads=None, max_failure_rate=0.2):
    """
    Per-group survival step curves on the inspection times with pointwise bootstrap
    bands. Each group sets the chosen covariate to the group value and the others to 0.

    Returns a DataFrame with columns time, group, estimate, lower, upper.
    """
    cfg = BootConfig(boot_num=boot_num, conf=conf, ci_types=(ci_type,), seed=seed,
                     max_failure_rate=max_failure_rate).validate()
    (ci_type,) = normalize_ci_types((ci_type,))
    solver_config = solver_config or SolverConfig()
    process = process or TimeIndependent()
    threads = get_thread_count(threads)
    column = resolve_column(data, group_col)

    base = fit_replicate(data, solver_config, process, label='survcurve-base')
    if not base.ok:
        raise BootstrapError("Base fit did not converge", {'error': base.error})
    times = np.concatenate([[0.0], base.times])
    groups = np.unique(data.covariates[:, column])

    fits = run_replicates(data, boot_num, seed, solver_config, process, threads)
    jack_fits = jackknife_fits(data, solver_config, process, threads) if ci_type == 'bca' else None

    frames = []
    for value in groups:
        x = np.zeros(data.p)
        x[column] = value
        estimate = base.survival(process, x, times)
        rows, n_failed = _collect(fits, process, x, times)
        if n_failed > cfg.max_failure_rate * boot_num or len(rows) < 2:
            raise BootstrapError(f"{n_failed} of {boot_num} bootstrap replicates failed",
                                 {'n_failed': n_failed, 'group': float(value)})
        replicates = np.vstack(rows)[:, data.p:]
        jackknife = None
        if jack_fits is not None:
            jack_rows, jack_failed = _collect(jack_fits, process, x, times)
            if jack_failed:
                logger.warning(f"{jack_failed} leave-one-out fit(s) failed; acceleration uses the rest")
            jackknife = np.vstack(jack_rows)[:, data.p:] if jack_rows else np.zeros((0, times.size))
        band = _clamp(confidence_intervals(estimate, replicates, conf, (ci_type,), jackknife))[ci_type]
        frames.append(pd.DataFrame({
            'time': times,
            'group': value,
            'estimate': estimate,
            'lower': band[:, 0],
            'upper': band[:, 1]
        }))
    logger.info(f"Survival bands for {len(groups)} group(s) over {times.size} time points")
    return pd.concat(frames, ignore_index=True)
