"""
Reading and writing datasets, reports and run manifests
"""
import json
import logging
import os

import numpy as np
import pandas as pd

from src.utils.validation import ValidationError, canonicalize, parse_time

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data')
BCOS_FILE = 'bcos.csv'


def _looks_like_header(row):
    try:
        parse_time(row[0], allow_inf=True)
        return False
    except (TypeError, ValueError):
        return True


def read_dataset(path):
    """
    Read a CSV in the canonical layout left,right,L,I,R,x1..xp into a Dataset.
    A header line is optional; `Inf` is accepted in the right column.
    """
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise ValidationError(f"Input file not found: {path}", {'path': 'file not found'})
    except pd.errors.EmptyDataError:
        raise ValidationError(f"Input file is empty: {path}", {'path': 'no rows'})

    rows = frame.values.tolist()
    names = ()
    if rows and _looks_like_header(rows[0]):
        header, rows = rows[0], rows[1:]
        names = tuple(str(h).strip() for h in header[5:])
    data = canonicalize(rows, covariate_names=names)
    logger.info(f"Read {data.n} observations with {data.p} covariate(s) from {path}: {data.censoring_counts()}")
    return data


def write_dataset(data, path):
    """Write a Dataset in the canonical layout with a header line"""
    frame = data.to_frame()
    frame['right'] = frame['right'].map(lambda v: 'Inf' if np.isinf(v) else repr(float(v)))
    frame['left'] = frame['left'].map(lambda v: repr(float(v)))
    frame.to_csv(path, index=False)
    return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(payload):
    """Deterministic JSON text: sorted keys, two-space indent"""
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default)


def write_json(payload, path):
    with open(path, 'w') as f:
        f.write(dumps(payload))
        f.write('\n')
    return path


def write_csv(frame, path):
    if not isinstance(frame, pd.DataFrame):
        frame = pd.DataFrame(frame)
    frame.to_csv(path, index=False)
    return path


def manifest_path(output_path):
    return f"{output_path}.manifest.json"


def write_manifest(output_path, manifest):
    """Write the run manifest beside an output file"""
    path = manifest_path(output_path)
    write_json(manifest.to_dict(), path)
    logger.debug(f"Manifest written to {path}")
    return path


def bcos_path():
    return os.path.join(DATA_DIR, BCOS_FILE)


def load_bcos():
    """Breast cosmesis data: 94 patients, covariate treatment (0 radiotherapy, 1 radiotherapy + chemotherapy)"""
    return read_dataset(bcos_path())
