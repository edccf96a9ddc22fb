"""
Report tables and atomic file output.

CSV columns are fixed per table, floats carry 17 significant digits and every
line ends with a single newline, so identical runs give identical bytes.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

FLOAT_FORMAT = '%.17g'
PLOT_BINS = 20

DECISION_COLUMNS = ['experiment_id', 'rule', 'statistic', 'verdict']
MATRIX_COLUMNS = ['rule', 'interim', 'final', 'count']
PLOT_COLUMNS = ['rule', 'bin_lower', 'bin_upper', 'count']
SAMPLE_COLUMNS = ['replicate', 'discrepancy']


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def write_atomic(path, text: str) -> Path:
    """Write to a temporary file next to `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(handle, 'w', encoding='utf-8', newline='') as stream:
            stream.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    return path


def decision_frame(rows: Sequence[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=DECISION_COLUMNS)
    return frame.astype({'statistic': float})


def matrix_frame(rows: Sequence[dict]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=MATRIX_COLUMNS).astype({'count': int})


def plot_frame(statistics_by_rule: dict[str, Sequence[float]], bins: int = PLOT_BINS) -> pd.DataFrame:
    """Histogram of each rule's interim statistic over equal-width bins spanning its range."""
    rows = []
    for rule, values in statistics_by_rule.items():
        counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
        rows.extend(
            {'rule': rule, 'bin_lower': float(lower), 'bin_upper': float(upper), 'count': int(count)}
            for lower, upper, count in zip(edges[:-1], edges[1:], counts)
        )
    return pd.DataFrame(rows, columns=PLOT_COLUMNS)


def samples_frame(samples: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame(
        {'replicate': np.arange(len(samples)), 'discrepancy': np.asarray(samples, dtype=float)},
        columns=SAMPLE_COLUMNS,
    )
