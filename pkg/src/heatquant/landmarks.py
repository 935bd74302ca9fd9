"""Reading and writing landmark annotation files.

CSV files have a header ``image_id,x0,y0,x1,y1,...``, optionally followed by
``bbox_x,bbox_y,bbox_w,bbox_h`` and visibility columns ``v0,v1,...``.
JSON files hold an array of objects::

    {"image_id": "a", "landmarks": [[x, y], ...], "bbox": [x, y, w, h], "visibility": [1, 0, ...]}

where ``bbox`` and ``visibility`` are optional.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, InconsistentCountError, ParseError, SchemaError

_BBOX_COLS = ["bbox_x", "bbox_y", "bbox_w", "bbox_h"]


@dataclass(frozen=True, eq=False)
class LandmarkRecord:
    image_id: str
    landmarks: np.ndarray  # (K, 2) pixels
    bbox: tuple[float, float, float, float] | None = None
    visibility: np.ndarray | None = None

    @property
    def count(self) -> int:
        return len(self.landmarks)

    def to_dict(self) -> dict:
        d = {"image_id": self.image_id, "landmarks": self.landmarks.tolist()}
        if self.bbox is not None:
            d["bbox"] = list(self.bbox)
        if self.visibility is not None:
            d["visibility"] = [int(v) for v in self.visibility]
        return d


def _infer_format(path: Path, fmt: str | None) -> str:
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "json"):
        raise ParseError(f"{path}: cannot infer format; pass 'csv' or 'json'")
    return fmt


def _coords(values, where: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{where}: non-finite coordinate")
    if np.any(arr < 0):
        raise SchemaError(f"{where}: negative coordinate")
    return arr


def _bbox(values, where: str):
    if values is None:
        return None
    vals = [float(v) for v in values]
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals) or vals[2] < 0 or vals[3] < 0:
        raise SchemaError(f"{where}: bbox must be four finite numbers with non-negative size")
    return tuple(vals)


def _parse_csv(text: str, path: Path) -> list[LandmarkRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyInputError(f"{path}: file is empty")
    _, header = rows[0]
    header = [h.strip() for h in header]
    if not header or header[0] != "image_id":
        raise SchemaError(f"{path}: header must start with image_id")
    xy = [h for h in header[1:] if re.fullmatch(r"[xy]\d+", h)]
    k = len(xy) // 2
    if k == 0 or xy != [f"{a}{i}" for i in range(k) for a in "xy"] or header[1 : 1 + 2 * k] != xy:
        raise SchemaError(f"{path}: expected columns x0,y0,x1,y1,... after image_id")
    rest = header[1 + 2 * k :]
    has_bbox = rest[:4] == _BBOX_COLS
    vis_cols = rest[4:] if has_bbox else rest
    if vis_cols and vis_cols != [f"v{i}" for i in range(k)]:
        raise SchemaError(f"{path}: unrecognized columns {vis_cols}")
    records = []
    for lineno, row in rows[1:]:
        where = f"{path}: row {lineno}"
        if len(row) != len(header):
            raise ParseError(f"{where}: expected {len(header)} fields, got {len(row)}")
        try:
            nums = [float(c) for c in row[1 : 1 + 2 * k]]
            bbox = [float(c) for c in row[1 + 2 * k : 5 + 2 * k]] if has_bbox else None
            vis = [int(float(c)) for c in row[-k:]] if vis_cols else None
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from None
        records.append(
            LandmarkRecord(
                row[0].strip(),
                _coords(nums, where),
                _bbox(bbox, where),
                None if vis is None else np.asarray(vis, dtype=bool),
            )
        )
    if not records:
        raise EmptyInputError(f"{path}: no records")
    return records


def _parse_json(text: str, path: Path) -> list[LandmarkRecord]:
    if not text.strip():
        raise EmptyInputError(f"{path}: file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, list):
        raise SchemaError(f"{path}: top level must be an array of records")
    if not data:
        raise EmptyInputError(f"{path}: no records")
    records = []
    for i, obj in enumerate(data):
        where = f"{path}: record {i}"
        if not isinstance(obj, dict) or "image_id" not in obj or "landmarks" not in obj:
            raise SchemaError(f"{where}: needs image_id and landmarks")
        unknown = set(obj) - {"image_id", "landmarks", "bbox", "visibility"}
        if unknown:
            raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")
        try:
            pts = np.asarray(obj["landmarks"], dtype=np.float64)
        except (TypeError, ValueError):
            raise SchemaError(f"{where}: landmarks must be [[x, y], ...]") from None
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise SchemaError(f"{where}: landmarks must be a non-empty [[x, y], ...] list")
        vis = obj.get("visibility")
        if vis is not None and len(vis) != len(pts):
            raise SchemaError(f"{where}: visibility length differs from landmark count")
        records.append(
            LandmarkRecord(
                str(obj["image_id"]),
                _coords(pts, where),
                _bbox(obj.get("bbox"), where),
                None if vis is None else np.asarray(vis, dtype=bool),
            )
        )
    return records


def ingest_landmarks(path, fmt: str | None = None) -> list[LandmarkRecord]:
    """Load and validate a landmark file; every record must have the same K."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    fmt = _infer_format(path, fmt)
    records = _parse_csv(text, path) if fmt == "csv" else _parse_json(text, path)
    k = records[0].count
    for i, rec in enumerate(records):
        if rec.count != k:
            raise InconsistentCountError(f"{path}: record {i} has {rec.count} landmarks, expected {k}")
    return records


def dump_landmarks(records, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps([r.to_dict() for r in records], indent=1)
    k = records[0].count
    has_bbox = any(r.bbox is not None for r in records)
    has_vis = any(r.visibility is not None for r in records)
    header = ["image_id"] + [f"{a}{i}" for i in range(k) for a in "xy"]
    header += _BBOX_COLS if has_bbox else []
    header += [f"v{i}" for i in range(k)] if has_vis else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in records:
        row = [r.image_id] + [repr(float(v)) for v in r.landmarks.ravel()]
        if has_bbox:
            row += [repr(float(v)) for v in (r.bbox or (0.0, 0.0, 0.0, 0.0))]
        if has_vis:
            vis = r.visibility if r.visibility is not None else np.ones(k, dtype=bool)
            row += [str(int(v)) for v in vis]
        w.writerow(row)
    return buf.getvalue()
