"""
Environment configuration for the CLI and the HTTP service
"""
import os
import logging

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_THREADS = 1
DEFAULT_MAX_ITER = 1000
DEFAULT_TOL = 0.001


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def _env_float(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric {name}={raw!r}, using {default}")
        return default


def _env_flag(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    return raw.strip().lower() not in ('0', 'false', 'no', 'off')


def get_thread_count(explicit=None):
    """Worker count: explicit flag first, then ARM_MM_THREADS, then 1"""
    if explicit is not None:
        return max(1, int(explicit))
    return max(1, _env_int('ARM_MM_THREADS', DEFAULT_THREADS))


def get_solver_defaults():
    """Default iteration cap, stopping tolerance and extrapolation switch, overridable from the environment"""
    return {
        'max_iter': _env_int('ARM_MM_MAX_ITER', DEFAULT_MAX_ITER),
        'tol': _env_float('ARM_MM_TOL', DEFAULT_TOL),
        'accelerate': _env_flag('ARM_MM_ACCELERATE', True)
    }


def get_log_settings():
    return {
        'level': os.getenv('ARM_MM_LOG_LEVEL', 'INFO').upper(),
        'log_file': os.getenv('ARM_MM_LOG_FILE') or None
    }


def configure_app(app):
    """Copy service settings into a Flask app config"""
    app.config['ARM_MM_THREADS'] = get_thread_count()
    app.config['ARM_MM_MAX_ROWS'] = _env_int('ARM_MM_MAX_ROWS', 10000)
    app.config.update({f'ARM_MM_{k.upper()}': v for k, v in get_solver_defaults().items()})
    logger.info(f"Configured service: threads={app.config['ARM_MM_THREADS']}, "
                f"max_rows={app.config['ARM_MM_MAX_ROWS']}")
