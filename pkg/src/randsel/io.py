"""Dataset CSV files, metadata sidecars and line-delimited trace/ledger output.

CSV layout: header ``f0,...,f{n-1},label`` (any feature names are accepted on
read), one sample per row, labels -1/+1, values written with 17 significant
digits so a write/read round trip is exact. Ground-truth relevant ids go in
a sidecar ``<file>.meta.json``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .datagen import GENERATOR_VERSION, Dataset
from .errors import InvalidDataError
from .evaluation import FoldRecord
from .selector import SelectionTrace


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_csv(data: Dataset, path, meta: Optional[dict] = None) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + ["label"])
        for row, label in zip(data.X, data.y):
            w.writerow([f"{v:.17g}" for v in row] + ["1" if label > 0 else "-1"])
    info = {"format_version": 1, "name": data.name, "n_samples": data.n_samples,
            "n_features": data.n_features}
    if data.relevant is not None:
        info["relevant"] = sorted(data.relevant)
    if meta:
        info.update(meta)
    meta_path(path).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_csv(path, name: Optional[str] = None) -> Dataset:
    """Load a dataset; schema problems raise ``InvalidDataError`` naming the row.

    Rows are numbered from 1 for the first data row (the header is row 0).
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidDataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidDataError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1].strip() != "label":
            raise InvalidDataError(f"{path}: header must end with a 'label' column")
        n = len(header) - 1
        X, y = [], []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != n + 1:
                raise InvalidDataError(f"{path}: row {i} has {len(row)} columns, expected {n + 1}")
            try:
                vals = [float(v) for v in row[:n]]
            except ValueError:
                col = next(j for j, v in enumerate(row[:n]) if not _is_float(v))
                raise InvalidDataError(
                    f"{path}: row {i}, column {col} ({header[col]!r}): {row[col]!r} is not a number"
                ) from None
            if not all(math.isfinite(v) for v in vals):
                raise InvalidDataError(f"{path}: row {i} contains a non-finite value")
            label = row[n].strip()
            if label not in ("1", "+1", "-1", "1.0", "-1.0"):
                raise InvalidDataError(f"{path}: row {i}: label {label!r} is not -1 or +1")
            X.append(vals)
            y.append(float(label))
    if not X:
        raise InvalidDataError(f"{path}: no data rows")
    relevant = None
    ds_name = name or path.stem
    mp = meta_path(path)
    if mp.exists():
        info = json.loads(mp.read_text(encoding="utf-8"))
        relevant = info.get("relevant")
        ds_name = name or info.get("name", ds_name)
    return Dataset(np.array(X), np.array(y), relevant=relevant,
                   feature_names=[h.strip() for h in header[:n]], name=ds_name)


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_line(record: dict) -> str:
    return json.dumps(_clean(record), sort_keys=True, allow_nan=False)


def trace_lines(trace: SelectionTrace) -> list:
    lines = [dumps_line({"format_version": 1, "record": "config", **trace.config.to_dict(),
                         "n_features": trace.n_features})]
    for r in trace.iterations:
        lines.append(dumps_line({"record": "iteration", **r.to_dict()}))
    lines.append(dumps_line({
        "format_version": 1, "record": "final", "selected_ids": trace.selected,
        "fixed_ids": trace.fixed, "total_kernel_evals": trace.total_kernel_evals,
    }))
    return lines


def write_trace(trace: SelectionTrace, path) -> None:
    Path(path).write_text("\n".join(trace_lines(trace)) + "\n", encoding="utf-8")


def read_jsonl(path) -> list:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def write_ledger(records: Iterable[FoldRecord], path) -> None:
    Path(path).write_text("".join(dumps_line(r.to_dict()) + "\n" for r in records), encoding="utf-8")


def read_ledger(path) -> list:
    return [FoldRecord.from_dict(d) for d in read_jsonl(path)]


def generator_meta(generator: str, m: int, n: int, seed: int, **extra) -> dict:
    return {"generator": generator, "generator_version": GENERATOR_VERSION, "m": m, "n": n,
            "seed": seed, **extra}
