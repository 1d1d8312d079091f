"""JSON and CSV formats shared by the command-line tools.

A matrix is ``{"rows": m, "cols": n, "entries": [row-major reals]}``; a
factor pair is ``{"X": matrix, "Z": matrix}``.  Floats are written with
``repr`` precision so that they round-trip exactly; non-finite values
become ``null``.
"""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .exceptions import ValidationError
from .linalg import FactorPair


def matrix_to_json(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValidationError("expected a 2-D array")
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "entries": [float(x) for x in M.ravel()]}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
        arr = np.array(entries, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from None
    if rows < 0 or cols < 0 or arr.ndim != 1 or arr.size != rows * cols:
        raise ValidationError(f"matrix JSON needs {rows}*{cols} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix entries must be finite")
    return arr.reshape(rows, cols)


def factor_pair_to_json(fp: FactorPair) -> dict:
    return {"X": matrix_to_json(fp.X), "Z": matrix_to_json(fp.Z)}


def factor_pair_from_json(obj, check_rank=True) -> FactorPair:
    if not isinstance(obj, dict) or "X" not in obj or "Z" not in obj:
        raise ValidationError('factor pair JSON needs "X" and "Z"')
    return FactorPair(matrix_from_json(obj["X"]), matrix_from_json(obj["Z"]), check_rank=check_rank)


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None


def to_jsonable(obj):
    """Convert numpy values, tuples and matrices into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return matrix_to_json(obj)
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(report) -> str:
    return json.dumps(to_jsonable(report), indent=2, allow_nan=False) + "\n"


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["evaluation", "best_value"])
    for k, v in trace:
        w.writerow([int(k), repr(float(v))])
    return buf.getvalue()
