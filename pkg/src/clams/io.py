"""File formats for scatterplots, clusterings and high-dimensional tables, plus stable JSON output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Clustering, Scatterplot
from .errors import ParseError

SIGNIFICANT_DIGITS = 12
REPORT_FORMAT_VERSION = 1


def _number(text: str, path, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", path, line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value: {text!r}", path, line)
    return v


def _rows(path, header: list[str] | None, keep_first: bool = False):
    """Yield (line number, fields) of non-blank rows after the checked header.

    With `keep_first`, the first row is yielded too instead of being checked.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        except (UnicodeDecodeError, csv.Error) as exc:
            raise ParseError(str(exc), path, 1) from None
        if keep_first:
            yield 1, first
        elif header is not None and [h.strip().lower() for h in first] != header:
            raise ParseError(f"expected header {','.join(header)}", path, 1)
        try:
            for row in reader:
                if row and any(c.strip() for c in row):
                    yield reader.line_num, row
        except (UnicodeDecodeError, csv.Error) as exc:
            raise ParseError(str(exc), path, reader.line_num + 1) from None


def read_points_csv(path, id: str | None = None) -> Scatterplot:
    pts = []
    for line, row in _rows(path, ["x", "y"]):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", path, line)
        pts.append((_number(row[0], path, line), _number(row[1], path, line)))
    if len(pts) < 2:
        raise ParseError("need at least 2 points", path)
    return Scatterplot(np.array(pts), id=Path(path).stem if id is None else id)


def read_points_json(path) -> Scatterplot:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read: {exc}", path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("points"), list):
        raise ParseError('expected an object with a "points" array', path, 1)
    pts = doc["points"]
    ok = all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        for p in pts
    )
    if not ok:
        raise ParseError("points must be [x, y] number pairs", path)
    arr = np.array(pts, dtype=float).reshape(-1, 2)
    if len(arr) < 2 or not np.all(np.isfinite(arr)):
        raise ParseError("need at least 2 finite points", path)
    return Scatterplot(arr, id=str(doc.get("id", path.stem)))


def read_scatterplot(path) -> Scatterplot:
    if Path(path).suffix.lower() == ".json":
        return read_points_json(path)
    return read_points_csv(path)


def write_points_csv(points: np.ndarray, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in points:
            w.writerow([format_float(x), format_float(y)])


def read_labels_csv(path) -> Clustering:
    labels = []
    for line, row in _rows(path, ["label"]):
        if len(row) != 1:
            raise ParseError(f"expected 1 field, got {len(row)}", path, line)
        try:
            v = int(row[0].strip())
        except ValueError:
            raise ParseError(f"not an integer label: {row[0]!r}", path, line) from None
        if v < -1:
            raise ParseError(f"label {v} below -1", path, line)
        labels.append(v)
    if not labels:
        raise ParseError("no labels", path)
    return Clustering(np.array(labels, dtype=np.int64))


def write_labels_csv(clustering: Clustering, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in clustering.labels)


def read_highdim_csv(path) -> np.ndarray:
    """Numeric table, one row per point. A non-numeric first row is taken as a header."""
    rows, width = [], None
    for line, row in _rows(path, None, keep_first=True):
        try:
            values = [float(c) for c in row]
        except ValueError:
            if line == 1:
                continue
            raise ParseError("non-numeric field", path, line) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError("non-finite value", path, line)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"expected {width} fields, got {len(values)}", path, line)
        rows.append(values)
    if len(rows) < 3 or width is None or width < 2:
        raise ParseError("need at least 3 rows of at least 2 columns", path)
    return np.array(rows)


def format_float(v: float) -> str:
    """Shortest text for v rounded to 12 significant digits."""
    v = float(v)
    if not math.isfinite(v):
        return "inf" if v > 0 else "-inf" if v < 0 else "nan"
    r = float(f"{v:.{SIGNIFICANT_DIGITS}g}")
    if r == 0.0:
        return "0.0"
    return repr(r)


def _normalize(obj):
    """Round floats to 12 significant digits; non-finite floats become strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return format_float(v)
        return float(f"{v:.{SIGNIFICANT_DIGITS}g}") + 0.0
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, pretty: bool = False) -> str:
    return json.dumps(_normalize(obj), sort_keys=True, indent=2 if pretty else None,
                      separators=None if pretty else (",", ":"), allow_nan=False) + "\n"


def write_json(obj, path, pretty: bool = False) -> None:
    Path(path).write_text(dumps(obj, pretty), encoding="utf-8")

