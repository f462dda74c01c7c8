"""Ground-truth annotation loading.

Two on-disk formats are supported and auto-detected:

* COCO-style JSON: top-level ``images`` / ``annotations`` / ``categories``,
  with ``bbox`` given as ``[x, y, width, height]``.
* CSV with a JSON-encoded box-list column, one row per image, each box an
  object with ``x``, ``y``, ``width``, ``height`` keys.  The box column is
  found by content, and the image id column by an ``image_id`` header or,
  failing that, the first column.

Both normalize to ``{image_id: (boxes, labels)}`` with corner-form float
boxes.  Duplicate image ids are rejected.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

__all__ = ["InputError", "load_annotations"]


class InputError(Exception):
    """Malformed or inconsistent input data."""


def _corner(x, y, w, h):
    if w < 0 or h < 0:
        raise InputError(f"negative box size: width={w}, height={h}")
    return [float(x), float(y), float(x) + float(w), float(y) + float(h)]


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_coco_json(path) -> dict:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise InputError(f"{path}: expected COCO-style keys 'images' and 'annotations'")
    out: dict = {}
    for rec in doc["images"]:
        try:
            image_id = rec["id"]
        except (TypeError, KeyError) as exc:
            raise InputError(f"{path}: image record without 'id': {rec!r}") from exc
        key = str(image_id)
        if key in out:
            raise InputError(f"{path}: duplicate image id {key!r}")
        out[key] = ([], [])
    for rec in doc["annotations"]:
        try:
            key = str(rec["image_id"])
            x, y, w, h = rec["bbox"]
            label = int(rec.get("category_id", 0))
        except (TypeError, KeyError, ValueError) as exc:
            raise InputError(f"{path}: bad annotation record {rec!r}: {exc}") from exc
        if key not in out:
            raise InputError(f"{path}: annotation references unknown image id {key!r}")
        out[key][0].append(_corner(x, y, w, h))
        out[key][1].append(label)
    return {
        k: (np.array(b, dtype=np.float64).reshape(-1, 4), np.array(l, dtype=np.int64))
        for k, (b, l) in out.items()
    }


def _parse_box_list(text: str, where: str):
    try:
        lst = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{where}: box column is not valid JSON: {exc}") from exc
    if not isinstance(lst, list):
        raise InputError(f"{where}: box column must be a JSON list")
    boxes, labels = [], []
    for obj in lst:
        try:
            boxes.append(_corner(obj["x"], obj["y"], obj["width"], obj["height"]))
        except (TypeError, KeyError) as exc:
            raise InputError(f"{where}: bad box object {obj!r}: {exc}") from exc
        labels.append(int(obj.get("class_id", 0)))
    return boxes, labels


def _looks_like_box_list(text: str) -> bool:
    text = text.strip()
    if not text.startswith("["):
        return False
    try:
        lst = json.loads(text)
    except json.JSONDecodeError:
        return False
    return isinstance(lst, list) and all(
        isinstance(o, dict) and {"x", "y", "width", "height"} <= set(o) for o in lst
    )


def _load_csv_jsonboxes(path) -> dict:
    rows = list(csv.DictReader(io.StringIO(_read_text(path))))
    if not rows:
        raise InputError(f"{path}: empty CSV")
    headers = list(rows[0].keys())

    # find the annotation column by content: some row must hold a JSON box list
    box_col = None
    for col in headers:
        if any(_looks_like_box_list(row[col] or "") and (row[col] or "").strip() != "[]"
               for row in rows):
            box_col = col
            break
    if box_col is None:
        # fall back to a column that is "[]" everywhere (legal: no objects at all)
        for col in headers:
            if all((row[col] or "").strip() == "[]" for row in rows):
                box_col = col
                break
    if box_col is None:
        raise InputError(f"{path}: no JSON box-list column found")
    id_col = "image_id" if "image_id" in headers else headers[0]

    out: dict = {}
    for i, row in enumerate(rows, start=2):  # header is line 1
        key = str(row[id_col])
        if key in out:
            raise InputError(f"{path}: duplicate image id {key!r} at line {i}")
        boxes, labels = _parse_box_list(row[box_col] or "[]", f"{path} line {i}")
        out[key] = (
            np.array(boxes, dtype=np.float64).reshape(-1, 4),
            np.array(labels, dtype=np.int64),
        )
    return out


def load_annotations(path, fmt: str = "auto") -> dict:
    """Load ground truth as {image_id: (corner boxes (N,4), labels (N,))}."""
    path = str(path)
    if fmt == "coco_json":
        return _load_coco_json(path)
    if fmt == "csv_jsonboxes":
        return _load_csv_jsonboxes(path)
    if fmt != "auto":
        raise InputError(f"unknown annotation format {fmt!r}")
    if path.lower().endswith(".json"):
        return _load_coco_json(path)
    if path.lower().endswith(".csv"):
        return _load_csv_jsonboxes(path)
    # sniff: JSON documents start with '{'
    head = _read_text(path)[:64].lstrip()
    if head.startswith("{"):
        return _load_coco_json(path)
    if "," in head or head.startswith("["):
        return _load_csv_jsonboxes(path)
    raise InputError(f"{path}: cannot auto-detect annotation format")
