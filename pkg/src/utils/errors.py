"""
Exception hierarchy for estimation, inference and simulation failures
"""


class ARMError(Exception):
    """Base error carrying a message and a JSON-friendly details dict"""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self):
        return {
            'error_type': self.__class__.__name__,
            'message': self.message,
            'details': self.details
        }


class PositivityError(ARMError):
    """Raised when a cumulative hazard term is nonpositive where the model needs it positive"""
    pass


class DomainError(ARMError):
    """Raised when a helper is evaluated outside its domain"""
    pass


class EstimationError(ARMError):
    """Raised when data cannot support a finite maximum likelihood estimate"""
    pass


class ConvergenceError(EstimationError):
    """Raised when neither parameter block of a sweep can be improved"""

    def __init__(self, message, trace=None, details=None):
        details = dict(details or {})
        details['loglik_trace'] = [float(v) for v in (trace or [])]
        super().__init__(message, details)
        self.trace = list(trace or [])


class InferenceError(ARMError):
    """Raised when the profile likelihood covariance cannot be formed"""
    pass


class BootstrapError(ARMError):
    """Raised when too many bootstrap replicates fail"""
    pass


class SimulationError(ARMError):
    """Raised when an event time cannot be bracketed"""
    pass
