"""Deterministic CSV/JSON writers and the dataset file format.

Every float is written with 12 significant digits so files are byte-stable
across runs and platforms.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .risk import Dataset
from .spectral import GridSpec

SCHEMA_VERSION = 1
SIG_DIGITS = 12


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), f".{SIG_DIGITS}g")
    return str(x)


def round_sig(x: float) -> float:
    return float(format(float(x), f".{SIG_DIGITS}g"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else round_sig(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ConfigurationError(f"row {row!r} does not match columns {columns!r}")
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def dataset_to_json(ds: Dataset) -> str:
    """Dataset file: GridSpec header plus one record per trajectory block.

    ``u0`` is the flat row-major grid array; each query is
    ``[x_index_1, ..., x_index_d, t_index]``.
    """
    doc = {
        "schema": SCHEMA_VERSION,
        "kind": "dataset",
        "grid": {
            "dim": ds.spec.dim,
            "points_per_axis": ds.spec.points_per_axis,
            "time_nodes": ds.spec.time_nodes,
        },
        "horizon": ds.horizon,
        "M": ds.M,
        "n": ds.n,
        "q": ds.q,
        "blocks": [
            {
                "u0": ds.u0[i].ravel(),
                "queries": ds.queries[i].astype(int),
                "targets": ds.targets[i],
            }
            for i in range(ds.n)
        ],
    }
    return dumps_json(doc)


def dataset_from_json(text: str) -> Dataset:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA_VERSION or doc.get("kind") != "dataset":
        raise ConfigurationError("not a schema-1 dataset file")
    g = doc["grid"]
    spec = GridSpec(g["dim"], g["points_per_axis"], g["time_nodes"])
    n, q = doc["n"], doc["q"]
    blocks = doc["blocks"]
    u0 = np.array([b["u0"] for b in blocks], dtype=float).reshape((n,) + spec.shape)
    queries = np.array([b["queries"] for b in blocks], dtype=np.int64).reshape(n, q, spec.dim + 1)
    targets = np.array([b["targets"] for b in blocks], dtype=float).reshape(n, q)
    return Dataset(spec, float(doc["horizon"]), u0, queries, targets, float(doc["M"]))
