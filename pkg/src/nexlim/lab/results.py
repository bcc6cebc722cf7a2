"""Result emission: CSV with a stable column order and versioned JSON."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from ..errors import ArgumentError, NexlimError

SCHEMA = "nexlim.result.v1"
SWEEP_COLUMNS = ["N", "seed", "metric", "error"]


def fmt(v):
    """Floats at 17 significant digits, everything else via str."""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan literal in the strict sense
        return v if math.isfinite(v) else repr(v)
    return obj


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as exc:
        raise NexlimError(f"cannot open {path}: {exc}") from exc


def write_csv(path, columns, rows):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def sweep_rows(result):
    return [{"N": r["N"], "seed": r["seed"], "metric": result.metric, "error": float(r["error"])}
            for r in result.rows]


def sweep_summary(result):
    return {"kind": "sweep", "metric": result.metric, "reference": result.reference,
            "note": result.note, "slope": result.slope, "intercept": result.intercept,
            "residual": result.residual,
            "rows": [{"N": r["N"], "seed": r["seed"], "error": r["error"],
                      "checkpoint_errors": r["checkpoints"]} for r in result.rows],
            "wall_time_s": {f"{N}:{s}": t for (N, s), t in sorted(result.wall_time.items())}}


def emit(results, format, path):  # noqa: A002 - mirrors the CLI option
    """Write ``results`` (a sweep result, row list or dict) as ``csv`` or ``json``."""
    if format == "csv":
        if hasattr(results, "rows") and hasattr(results, "metric"):
            write_csv(path, SWEEP_COLUMNS, sweep_rows(results))
        elif isinstance(results, list):
            cols = list(results[0].keys()) if results else SWEEP_COLUMNS
            write_csv(path, cols, results)
        else:
            raise ArgumentError("csv emission needs a sweep result or a list of row dicts")
    elif format == "json":
        body = sweep_summary(results) if hasattr(results, "rows") else dict(results)
        doc = {"schema": SCHEMA, **_plain(body)}
        with _open(path) as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ArgumentError(f"format must be csv or json, got {format!r}")
    return path


def load_json(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise NexlimError(f"cannot load {path}: {exc}") from exc
    if doc.get("schema") != SCHEMA:
        raise NexlimError(f"{path}: unsupported schema {doc.get('schema')!r}")
    return doc


def load_sweep_csv(path):
    """Rows of a sweep CSV as (N, seed, error) arrays."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise NexlimError(f"cannot read {path}: {exc}") from exc
    try:
        N = np.array([int(r["N"]) for r in rows])
        seed = np.array([int(r["seed"]) for r in rows])
        err = np.array([float(r["error"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ArgumentError(f"{path}: not a sweep CSV ({exc})") from exc
    return N, seed, err


def write_trajectory_csv(path, t, xs, ms=None, torus=False):
    """Rows ``t, i, x..., [m]`` for each recorded time and particle."""
    d = xs.shape[-1]
    cols = ["t", "i"] + [f"x{k}" for k in range(d)] + (["m"] if ms is not None else [])
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for n, tn in enumerate(t):
            xv = np.mod(xs[n], 2.0 * math.pi) if torus else xs[n]
            for i in range(xv.shape[0]):
                row = [fmt(float(tn)), i + 1] + [fmt(v) for v in xv[i]]
                if ms is not None:
                    row.append(fmt(ms[n][i]))
                w.writerow(row)


def write_matrix_csv(path, W):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(W):
            w.writerow([fmt(v) for v in row])
