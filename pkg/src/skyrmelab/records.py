"""CSV and JSON writers with fixed 17-significant-digit number formatting.

Every CSV starts with a ``# schema_version=N`` comment line followed by a
header row; every JSON document carries a top-level ``schema_version``.
Floats are written with ``%.17g`` so that values round-trip exactly and
identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path: Path, columns: Mapping[str, Sequence[float]]) -> Path:
    """Write equal-length columns; NaN entries are written as ``nan``."""
    names = list(columns)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    lengths = {c.size for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"column lengths differ: {sorted(lengths)}")
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*cols):
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Path):
        return json.dumps(str(obj))
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (np.ndarray, list, tuple)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Mapping[str, Any], indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, **payload}
    path = Path(path)
    path.write_text(dumps(doc))
    return path


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text())


def missing(paths: Iterable[Path]) -> list[str]:
    return [str(p) for p in paths if not Path(p).is_file()]
