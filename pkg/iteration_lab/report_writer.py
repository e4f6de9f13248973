"""
CSV and JSON report emission
Files are written to a sibling temp file and moved into place
"""

import csv
import json
import math
import os
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np


def format_value(value) -> str:
    """One CSV cell: 17 significant digits, '' for missing or non-finite numbers"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return ''
        return '%.17g' % float(value)
    return str(value)


def _finite_json(data):
    """Replace NaN/inf by None and numpy scalars by Python numbers"""
    if isinstance(data, dict):
        return {str(key): _finite_json(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [_finite_json(value) for value in data]
    if isinstance(data, np.ndarray):
        return [_finite_json(value) for value in data.tolist()]
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (float, np.floating)):
        return float(data) if math.isfinite(data) else None
    return data


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_name(f".{path.name}.tmp")
    with open(temp_path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    os.replace(temp_path, path)


def write_csv(path: Path, columns: Sequence[str], rows: List[Dict]):
    """
    Write rows as CSV with a header row

    Args:
        path: Output file
        columns: Column order; missing keys become empty cells
        rows: One dict per row
    """
    lines = [','.join(columns)]
    for row in rows:
        lines.append(','.join(format_value(row.get(column)) for column in columns))
    _atomic_write(Path(path), '\n'.join(lines) + '\n')


def write_json(path: Path, data: Dict):
    """Write a JSON document with sorted keys"""
    text = json.dumps(_finite_json(data), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    _atomic_write(Path(path), text + '\n')


def trajectory_rows(traj) -> List[Dict]:
    """n, coordinates, error, ratio and log ratio per iterate"""
    rows = []
    for n in range(traj.horizon + 1):
        row = {'n': n, 'e_n': float(traj.errors[n]), 'r_n': float(traj.ratios[n]),
               'ln_r_n': float(traj.ln_ratios[n])}
        for i, coordinate in enumerate(traj.points[n]):
            row[f"x_{i}"] = float(coordinate)
        if traj.intermediates is not None and n < traj.horizon:
            for i, coordinate in enumerate(traj.intermediates[n]):
                row[f"y_{i}"] = float(coordinate)
        rows.append(row)
    return rows


def trajectory_columns(traj) -> List[str]:
    dim = traj.points.shape[1]
    columns = ['n'] + [f"x_{i}" for i in range(dim)]
    if traj.intermediates is not None:
        columns += [f"y_{i}" for i in range(dim)]
    return columns + ['e_n', 'r_n', 'ln_r_n']


def read_csv(path: Path) -> List[Dict[str, str]]:
    """Read a written report back as one dict of strings per row"""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))
