"""
Validation for interval-censored input rows and numeric settings
Turns raw table rows into canonical observations, collecting every problem by row
"""
import math

import numpy as np

from src.models.observation import Dataset
from src.utils.errors import ARMError

INF_TOKENS = {'inf', '+inf', 'infinity', '+infinity'}


class ValidationError(ARMError):
    """Invalid input; `errors` maps a row number or field name to a message"""

    def __init__(self, message, errors=None):
        if isinstance(message, dict):
            errors = message
            message = f"{len(errors)} validation error(s)"
        super().__init__(message, {'errors': {str(k): v for k, v in (errors or {}).items()}})
        self.errors = dict(errors or {})

    def __str__(self):
        if not self.errors:
            return self.message
        lines = [f"{key}: {value}" for key, value in sorted(self.errors.items(), key=lambda kv: str(kv[0]))]
        return f"{self.message}\n" + "\n".join(lines)


def validate_positive_number(value, field_name, allow_zero=False):
    """Validate positive numeric values"""
    try:
        num_value = float(value)
    except (ValueError, TypeError):
        raise ValidationError(f"{field_name} must be a valid number")
    if math.isnan(num_value):
        raise ValidationError(f"{field_name} must be a valid number")
    if allow_zero and num_value < 0:
        raise ValidationError(f"{field_name} must be zero or positive")
    elif not allow_zero and num_value <= 0:
        raise ValidationError(f"{field_name} must be positive")
    return num_value


def validate_positive_integer(value, field_name, minimum=1):
    """Validate integer values bounded below"""
    try:
        int_value = int(value)
        if int_value != float(value):
            raise ValueError
    except (ValueError, TypeError):
        raise ValidationError(f"{field_name} must be a valid integer")
    if int_value < minimum:
        raise ValidationError(f"{field_name} must be an integer >= {minimum}")
    return int_value


def validate_probability(value, field_name):
    """Validate a level strictly inside (0, 1)"""
    num_value = validate_positive_number(value, field_name)
    if num_value >= 1:
        raise ValidationError(f"{field_name} must be below 1")
    return num_value


def collect_errors(checks):
    """
    Run (field_name, callable) checks and raise one ValidationError with every failure
    """
    errors = {}
    for field_name, check in checks:
        try:
            check()
        except ValidationError as e:
            errors[field_name] = e.message
    if errors:
        raise ValidationError(errors)


def parse_time(token, allow_inf=False):
    """Parse a time value; `Inf` (any case) only where infinity is allowed"""
    if isinstance(token, str):
        text = token.strip()
        if text.lower() in INF_TOKENS:
            if not allow_inf:
                raise ValueError("infinity is only allowed in the right column")
            return math.inf
        value = float(text)
    else:
        value = float(token)
    if math.isnan(value):
        raise ValueError("time is missing")
    if math.isinf(value) and not allow_inf:
        raise ValueError("infinity is only allowed in the right column")
    return value


def _parse_indicator(token):
    value = float(token)
    if value not in (0.0, 1.0):
        raise ValueError(f"indicator must be 0 or 1, got {token}")
    return int(value)


def _canonical_row(row):
    if len(row) < 6:
        raise ValueError(f"expected at least 6 columns (left,right,L,I,R,covariates), got {len(row)}")

    try:
        left = parse_time(row[0])
        right = parse_time(row[1], allow_inf=True)
    except (TypeError, ValueError) as e:
        raise ValueError(f"invalid time: {e}")

    try:
        delta = tuple(_parse_indicator(token) for token in row[2:5])
    except (TypeError, ValueError) as e:
        raise ValueError(str(e))
    if sum(delta) != 1:
        raise ValueError(f"indicators L,I,R must sum to 1, got {delta}")

    covariates = []
    for j, token in enumerate(row[5:]):
        try:
            value = float(token)
        except (TypeError, ValueError):
            raise ValueError(f"covariate {j + 1} is not numeric: {token!r}")
        if not math.isfinite(value):
            raise ValueError(f"covariate {j + 1} must be finite")
        covariates.append(value)

    if left < 0 or right < 0:
        raise ValueError("times must be nonnegative")

    delta_l, delta_i, delta_r = delta
    if delta_l:
        if math.isinf(right) or right <= 0:
            raise ValueError("left-censored row needs a finite positive right value")
        left = 0.0
    elif delta_r:
        if left <= 0:
            raise ValueError("right-censored row needs a positive left value")
        right = math.inf
    else:
        if not (0 < left < right < math.inf):
            raise ValueError(f"interval-censored row needs 0 < left < right < Inf, got ({left}, {right})")

    return left, right, delta, covariates


def canonicalize(raw_rows, covariate_names=()):
    """
    Convert raw rows (left, right, L, I, R, x1..xp) into a Dataset.

    Left-censored rows keep the inspection time in `right` with left = 0; right-censored
    rows keep it in `left` with right = Inf. Every bad row is reported, keyed by its
    1-based row number.
    """
    errors = {}
    parsed = []
    width = None
    for number, row in enumerate(raw_rows, start=1):
        row = list(row)
        try:
            left, right, delta, covariates = _canonical_row(row)
        except ValueError as e:
            errors[number] = f"row {number}: {e}"
            continue
        if width is None:
            width = len(covariates)
        elif len(covariates) != width:
            errors[number] = f"row {number}: expected {width} covariates, got {len(covariates)}"
            continue
        parsed.append((left, right, delta, covariates))

    if errors:
        raise ValidationError("Input rows failed validation", errors)
    if not parsed:
        raise ValidationError("Input contains no observations", {'rows': 'no data rows'})

    return Dataset(
        left=[r[0] for r in parsed],
        right=[r[1] for r in parsed],
        delta=[r[2] for r in parsed],
        covariates=np.array([r[3] for r in parsed], dtype=float).reshape(len(parsed), width),
        covariate_names=tuple(covariate_names)
    )
