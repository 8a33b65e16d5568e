"""CSV result files with a ``#``-prefixed metadata header.

Floats are written with 17 significant digits so a read-back reproduces
every value bit for bit.  Column order of result files is fixed by
:data:`RESULT_COLUMNS`.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__

RESULT_COLUMNS = (
    "experiment_id", "sweep_param", "sweep_value", "averaged", "episodes", "slot", "agent",
    "expected_reward", "realized_reward", "action", "qos_flag", "conjecture",
)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def _parse_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def render_csv(rows: Iterable[Sequence], columns: Sequence[str],
               metadata: Mapping[str, object] | None = None) -> str:
    buf = io.StringIO()
    meta = {"version": __version__}
    meta.update(metadata or {})
    for k, v in meta.items():
        text = v if isinstance(v, str) else json.dumps(v, sort_keys=True, separators=(",", ":"))
        buf.write(f"# {k}: {text}\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(rows: Iterable[Sequence], path: str | Path, metadata: Mapping[str, object] | None = None,
              columns: Sequence[str] = RESULT_COLUMNS) -> Path:
    """Write rows after the metadata header; the header row is always present."""
    path = Path(path)
    text = render_csv(rows, columns, metadata)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror or err}") from err
    return path


def read_csv(path: str | Path):
    """Return ``(metadata, columns, rows)`` with numbers parsed back."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise OSError(f"cannot read {path}: {err.strerror or err}") from err
    meta = {}
    lines = text.splitlines(keepends=True)
    body_start = 0
    for line in lines:
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition(": ")
        meta[key] = val
        body_start += 1
    reader = csv.reader(io.StringIO("".join(lines[body_start:])))
    columns = next(reader, [])
    rows = [[_parse_value(x) for x in r] for r in reader]
    return meta, columns, rows


def series_rows(experiment_id: str, series, sweep_param: str = "", sweep_value=None):
    """One row per (slot, agent) of a MetricSeries."""
    T, N = series.expected.shape
    avg = series.averaged
    for t in range(T):
        for i in range(N):
            yield (experiment_id, sweep_param, sweep_value, avg, series.episodes, t, i,
                   float(series.expected[t, i]), float(series.realized[t, i]),
                   float(series.action[t, i]), float(series.qos[t, i]),
                   float(series.conjecture[t, i]))
