"""File formats: Matrix Market for matrices, headered CSV for samples, JSON reports."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .numerics import SparseSymmetric

MM_HEADER = "%%MatrixMarket matrix coordinate real symmetric"
MISSING = {"", "na", "nan", "null", "none", "?"}


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return format(float(x), ".17g")


def write_matrix_market(path, m):
    """Store a symmetric matrix as coordinate ``symmetric`` (lower triangle, 1-based).

    Dense input keeps every nonzero of the lower triangle plus the full
    diagonal; sparse input keeps its stored entries plus the diagonal.
    """
    if isinstance(m, SparseSymmetric):
        d = m.dim
        rows = np.concatenate([np.arange(d), m.cols])
        cols = np.concatenate([np.arange(d), m.rows])
        vals = np.concatenate([m.diag, m.vals])
    else:
        a = np.asarray(m, dtype=float)
        d = a.shape[0]
        r, c = np.nonzero(np.tril(a, k=-1))
        rows = np.concatenate([np.arange(d), r])
        cols = np.concatenate([np.arange(d), c])
        vals = np.concatenate([np.diag(a), a[r, c]])
    order = np.lexsort((rows, cols))
    lines = [MM_HEADER, f"{d} {d} {len(vals)}"]
    lines += [f"{rows[k] + 1} {cols[k] + 1} {_fmt(vals[k])}" for k in order]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_market(path, dense=True):
    """Read a Matrix Market file; returns a dense array or a ``SparseSymmetric``."""
    with open(path, "rb") as fh:
        m = scipy.io.mmread(fh)
    if sp.issparse(m):
        m = m.toarray()
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0))):
        raise ValueError(f"{path}: matrix is not symmetric")
    return a if dense else SparseSymmetric.from_dense(a)


def read_samples_csv(path, missing="drop"):
    """Read a headered CSV of observations (rows) by variables (columns).

    ``missing`` is ``"drop"`` (discard rows with any missing value) or
    ``"linear-time"`` (interpolate each column linearly over row order,
    holding the end values constant).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one data row")
    header, body = rows[0], rows[1:]
    d = len(header)
    data = np.empty((len(body), d))
    for t, row in enumerate(body):
        if len(row) != d:
            raise ValueError(f"{path}: row {t + 2} has {len(row)} fields, expected {d}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in MISSING:
                data[t, j] = math.nan
                continue
            try:
                data[t, j] = float(cell)
            except ValueError as exc:
                raise ValueError(f"{path}: row {t + 2}, column {j + 1}: bad value {cell!r}") from exc
    if not np.all(np.isfinite(data[~np.isnan(data)])):
        raise ValueError(f"{path}: non-finite values present")
    if missing == "drop":
        data = data[~np.isnan(data).any(axis=1)]
    elif missing == "linear-time":
        idx = np.arange(data.shape[0])
        for j in range(d):
            bad = np.isnan(data[:, j])
            if bad.all():
                raise ValueError(f"{path}: column {header[j]!r} has no values")
            if bad.any():
                data[bad, j] = np.interp(idx[bad], idx[~bad], data[~bad, j])
    else:
        raise ValueError(f"unknown missing-value policy {missing!r}")
    if data.shape[0] == 0:
        raise ValueError(f"{path}: no complete rows")
    return header, data


def write_samples_csv(path, data, header=None):
    data = np.asarray(data, dtype=float)
    header = header or [f"x{j}" for j in range(data.shape[1])]
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in data]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n")
