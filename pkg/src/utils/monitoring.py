"""
Logging setup and fit outcome tracking
"""
import logging
import time
import json
from datetime import datetime
from collections import deque
import threading

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Metrics storage
metrics_storage = {
    'fits': deque(maxlen=1000),
    'failures': deque(maxlen=1000)
}
metrics_lock = threading.Lock()

logger = logging.getLogger(__name__)


def configure_logging(level='INFO', log_file=None):
    """Configure root logging once for a CLI run or the service"""
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )


class FitTracker:
    """Track fit outcomes and health"""

    def __init__(self):
        self.success_count = 0
        self.nonconverged_count = 0
        self.error_count = 0
        self.start_time = time.time()

    def record_fit(self, label, converged, n_iter, duration, loglik=None):
        """Record a finished fit"""
        with metrics_lock:
            if converged:
                self.success_count += 1
            else:
                self.nonconverged_count += 1
            metrics_storage['fits'].append({
                'label': label,
                'converged': bool(converged),
                'n_iter': int(n_iter),
                'duration': float(duration),
                'loglik': None if loglik is None else float(loglik),
                'timestamp': time.time()
            })

        if converged:
            logger.debug(f"Fit converged: {label} in {n_iter} sweeps ({duration:.3f}s)")
        else:
            logger.warning(f"Fit did not converge: {label} after {n_iter} sweeps")

    def record_error(self, label, error_type, error_message):
        """Record a failed fit"""
        with metrics_lock:
            self.error_count += 1
            metrics_storage['failures'].append({
                'label': label,
                'error_type': error_type,
                'error_message': error_message,
                'timestamp': time.time()
            })

        logger.error(f"Fit error: {label} - {error_type}: {error_message}")

    def get_metrics(self, window_minutes=60):
        """Counts, convergence rate and averages over a time window"""
        current_time = time.time()
        window_seconds = window_minutes * 60

        with metrics_lock:
            recent = [f for f in metrics_storage['fits'] if current_time - f['timestamp'] <= window_seconds]
            recent_failures = [f for f in metrics_storage['failures'] if current_time - f['timestamp'] <= window_seconds]

        total = len(recent) + len(recent_failures)
        converged = [f for f in recent if f['converged']]
        return {
            'fits': len(recent),
            'failures': len(recent_failures),
            'convergence_rate': 100.0 if total == 0 else len(converged) / total * 100,
            'mean_iterations': (sum(f['n_iter'] for f in recent) / len(recent)) if recent else None,
            'mean_duration_s': (sum(f['duration'] for f in recent) / len(recent)) if recent else None
        }


# Global tracker
fit_tracker = FitTracker()


def get_system_health():
    """Overall service health metrics"""
    return {
        **fit_tracker.get_metrics(),
        'uptime_seconds': time.time() - fit_tracker.start_time,
        'total_converged': fit_tracker.success_count,
        'total_nonconverged': fit_tracker.nonconverged_count,
        'total_errors': fit_tracker.error_count,
        'timestamp': datetime.now().isoformat()
    }


def log_fit_event(event_type, details=None):
    """Log estimation-related events as one JSON line"""
    log_data = {
        'event_type': event_type,
        'timestamp': datetime.now().isoformat()
    }

    if details:
        log_data['details'] = details

    logger.info(f"FIT_EVENT: {json.dumps(log_data, default=str)}")
