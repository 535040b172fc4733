"""
Estimation API routes
"""
from flask import Blueprint, current_app, jsonify, request
import logging
import time

from src import __version__
from src.models.params import BootConfig, ProfileConfig, SolverConfig
from src.models.process import get_process
from src.services.bootstrap import boot_analyze
from src.services.inference import profile_covariance
from src.services.likelihood import Design
from src.services.mm_solver import MMSolver
from src.services.reporting import build_boot_report, build_fit_report, build_trace_report
from src.services.simulate import Scenario, generate
from src.utils.errors import ARMError, ConvergenceError
from src.utils.monitoring import fit_tracker, get_system_health
from src.utils.validation import ValidationError, canonicalize

estimation_bp = Blueprint('estimation', __name__)
logger = logging.getLogger(__name__)


def _payload():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ValidationError("Request body must be a JSON object", {'body': 'No data provided'})
    return data


def _dataset(payload):
    rows = payload.get('rows')
    if not isinstance(rows, list) or not rows:
        raise ValidationError("rows must be a non-empty list", {'rows': 'required'})
    limit = current_app.config['ARM_MM_MAX_ROWS']
    if len(rows) > limit:
        raise ValidationError(f"Too many rows: {len(rows)} > {limit}", {'rows': f'at most {limit} rows'})
    return canonicalize(rows, covariate_names=tuple(payload.get('covariate_names') or ()))


def _solver_config(payload):
    return SolverConfig(
        max_iter=payload.get('max_iter', current_app.config['ARM_MM_MAX_ITER']),
        tol=payload.get('tol', current_app.config['ARM_MM_TOL']),
        accelerate=bool(payload.get('accelerate', current_app.config['ARM_MM_ACCELERATE']))
    ).validate()


def _process(payload):
    try:
        return get_process(payload.get('process', 'linear'))
    except ARMError as e:
        raise ValidationError(e.message, {'process': f"choose from {', '.join(e.details.get('choices', []))}"})


@estimation_bp.errorhandler(ValidationError)
def validation_error_handler(e):
    logger.info(f"Rejected request: {e.message}")
    return jsonify({'success': False, 'error': e.message, 'errors': e.details.get('errors', {})}), 400


@estimation_bp.errorhandler(ARMError)
def estimation_error_handler(e):
    fit_tracker.record_error(request.path, type(e).__name__, e.message)
    return jsonify({'success': False, 'error': e.message, 'details': e.details}), 422


@estimation_bp.route('/health', methods=['GET'])
def health_check():
    """Service health with fit metrics"""
    return jsonify({
        'status': 'healthy',
        'service': 'arm-mm',
        'version': __version__,
        'metrics': get_system_health()
    })


@estimation_bp.route('/fit', methods=['POST'])
def fit():
    """Fit the model and return estimates with profile standard errors"""
    start_time = time.time()
    payload = _payload()
    data = _dataset(payload)
    solver_config = _solver_config(payload)
    design = Design.build(data, _process(payload))

    try:
        result = MMSolver(design, solver_config).fit(label='api-fit')
    except ConvergenceError as e:
        return jsonify({'success': False, 'error': e.message, **build_trace_report(e)}), 422
    if not result.converged:
        return jsonify({'success': False, 'error': 'Fit did not converge', **build_trace_report(result)}), 422

    profile = ProfileConfig(hn_multiplier=payload.get('hn', 1.5), solver=solver_config)
    covariance = profile_covariance(design, result, profile, threads=current_app.config['ARM_MM_THREADS'])
    report = build_fit_report(data, result, covariance)
    logger.info(f"API fit n={data.n} m={result.grid.m} in {time.time() - start_time:.3f}s")
    return jsonify({'success': True, **report, 'processing_time': round(time.time() - start_time, 3)})


@estimation_bp.route('/boot', methods=['POST'])
def boot():
    """Bootstrap standard errors and confidence intervals"""
    payload = _payload()
    data = _dataset(payload)
    boot_config = BootConfig(
        boot_num=payload.get('boot_num', 200),
        conf=payload.get('conf', 0.95),
        ci_types=payload.get('ci', 'norm,basic,perc,bca'),
        time_points=payload.get('surv_times'),
        covariate_value=payload.get('surv_cov'),
        seed=payload.get('seed', 0)
    )
    result = boot_analyze(data, boot_config, _solver_config(payload), _process(payload),
                          current_app.config['ARM_MM_THREADS'])
    return jsonify({'success': True, **build_boot_report(result, data)})


@estimation_bp.route('/simulate', methods=['POST'])
def simulate():
    """Synthetic rows in the input layout"""
    payload = _payload()
    scenario = Scenario(
        kind=payload.get('scenario', 'const_hazard'),
        beta=payload.get('beta'),
        n=payload.get('n', 200),
        seed=payload.get('seed', 0)
    )
    limit = current_app.config['ARM_MM_MAX_ROWS']
    if isinstance(scenario.n, int) and scenario.n > limit:
        raise ValidationError(f"n exceeds the row limit {limit}", {'n': f'at most {limit}'})
    data = generate(scenario)
    rows = [
        [float(o.left), 'Inf' if o.delta_r else float(o.right), o.delta_l, o.delta_i, o.delta_r, *o.covariates]
        for o in data
    ]
    return jsonify({
        'success': True,
        'scenario': scenario.to_dict(),
        'columns': ['left', 'right', 'L', 'I', 'R', *data.covariate_names],
        'rows': rows,
        'censoring': data.censoring_counts()
    })
