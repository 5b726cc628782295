import os, logging, json, math

import numpy as np
from tqdm import tqdm

from nuqkit.settings import gSettings
from nuqkit.errors import UsageError

def bits_fmt(num, suffix="bit"):
    """
    Returns human-readable bit count format.
    """
    for unit in ("", "Ki", "Mi", "Gi", "Ti", "Pi"):
        if abs(num) < 1024.0:
            return f"{num:3.1f}{unit}{suffix}"
        num /= 1024.0
    return f"{num:.1f}Ei{suffix}"

def progress_bar(iterable, desc, total=None, progress=None):
    """Common tqdm wrapper; disabled unless "progress" setting is on."""
    if progress is None: progress = gSettings['progress']
    return tqdm(iterable, desc=desc, total=total, disable=not progress
            , ascii='.#', bar_format='{desc:<10.10}{percentage:3.0f}%|{bar:40}{r_bar}')

def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ''
    return str(value)

def write_csv(f, columns, rows, metadata=None):
    """
    Writes comma-separated table to file object: '#'-prefixed ``metadata``
    lines (key: value, keys sorted), header and rows (dicts or sequences).
    Floats are written with shortest round-trip representation.
    """
    for k, v in sorted((metadata or {}).items()):
        f.write(f'# {k}: {json.dumps(v, sort_keys=True)}\n')
    f.write(','.join(columns) + '\n')
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        f.write(','.join(_cell(v) for v in row) + '\n')

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else str(obj)
    return obj

def write_json(f, obj):
    """Stable (sorted keys) JSON dump of object with numpy values."""
    json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
    f.write('\n')

def read_vector_file(path):
    """
    Reads newline-delimited decimal vector; empty lines and lines starting
    with '#' are skipped. Malformed line raises ``UsageError`` with the line
    number.
    """
    L = logging.getLogger(__name__)
    if not os.path.isfile(path):
        raise UsageError(f'Not a file: "{path}"')
    values = []
    with open(path) as f:
        for nLine, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith('#'): continue
            try:
                value = float(line)
            except ValueError:
                raise UsageError(f'{path}:{nLine}: not a decimal number: "{line}"')
            if not math.isfinite(value):
                raise UsageError(f'{path}:{nLine}: non-finite value "{line}"')
            values.append(value)
    if not values:
        raise UsageError(f'{path}: no values')
    L.debug(f'{len(values)} values read from "{path}"')
    return np.array(values)
