"""Annotation ingestion and editing-candidate selection.

One input format is supported: COCO-style detection JSON restricted to the
documented field subset (images[{id,file_name,width,height}],
annotations[{id,image_id,bbox,category_id}], categories[{id,name}]).
Extra keys are ignored; missing or mistyped required keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ArgumentError, FormatError, RecordValidationError
from .geometry import Box


@dataclass(frozen=True)
class Vocabulary:
    """Ordered closed set of labels; label_id is the index into `labels`."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) < 1:
            raise ArgumentError("vocabulary needs at least one label")
        folded = [s.casefold() for s in self.labels]
        if len(set(folded)) != len(folded):
            raise ArgumentError("vocabulary labels must be unique after case-fold")

    @property
    def size(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def label_of(self, label_id: int) -> str:
        return self.labels[label_id]


@dataclass(frozen=True)
class IdObjectRecord:
    """One annotated in-distribution object.

    Image dimensions are carried along so validation and relative-area
    policies never need to reopen the image file.
    """

    record_id: int
    image_id: int
    image_path: str
    box: Box
    label_id: int
    image_width: int
    image_height: int


@dataclass(frozen=True)
class CandidatePolicy:
    min_box_area: float = 1024.0
    max_relative_area: float = 0.8
    max_edits_per_image: int = 2

    def __post_init__(self):
        if self.min_box_area < 0:
            raise ArgumentError("min_box_area must be >= 0")
        if not (0 < self.max_relative_area <= 1):
            raise ArgumentError("max_relative_area must be in (0, 1]")
        if self.max_edits_per_image < 1:
            raise ArgumentError("max_edits_per_image must be >= 1")


def _require(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"{where}: missing required key '{key}'")
    value = obj[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise FormatError(f"{where}: key '{key}' must be a number, got {type(value).__name__}")
        return float(value)
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise FormatError(f"{where}: key '{key}' must be {kind.__name__}, got {type(value).__name__}")
    return value


def load_annotations(path, fmt: str = "coco-json"):
    """Parse a detection annotation file into (Vocabulary, records).

    Every record is validated against its image dimensions; the vocabulary
    preserves category file order.
    """
    if fmt != "coco-json":
        raise ArgumentError(f"unsupported annotation format: {fmt}")
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: JSON parse failure at byte {exc.pos}: {exc.msg}") from exc
    for section in ("images", "annotations", "categories"):
        if section not in doc or not isinstance(doc[section], list):
            raise FormatError(f"{path}: missing or non-list section '{section}'")

    labels = []
    category_to_label = {}
    for i, cat in enumerate(doc["categories"]):
        cid = _require(cat, "id", int, f"categories[{i}]")
        name = _require(cat, "name", str, f"categories[{i}]")
        if cid in category_to_label:
            raise FormatError(f"categories[{i}]: duplicate category id {cid}")
        category_to_label[cid] = len(labels)
        labels.append(name)
    vocab = Vocabulary(tuple(labels))

    images = {}
    base = Path(path).parent
    for i, img in enumerate(doc["images"]):
        iid = _require(img, "id", int, f"images[{i}]")
        if iid in images:
            raise FormatError(f"images[{i}]: duplicate image id {iid}")
        images[iid] = {
            "file_name": _require(img, "file_name", str, f"images[{i}]"),
            "width": _require(img, "width", int, f"images[{i}]"),
            "height": _require(img, "height", int, f"images[{i}]"),
        }

    records = []
    seen_ids = set()
    for i, ann in enumerate(doc["annotations"]):
        where = f"annotations[{i}]"
        rid = _require(ann, "id", int, where)
        iid = _require(ann, "image_id", int, where)
        cid = _require(ann, "category_id", int, where)
        bbox = _require(ann, "bbox", list, where)
        if rid in seen_ids:
            raise RecordValidationError(f"record {rid}: duplicate annotation id")
        seen_ids.add(rid)
        if iid not in images:
            raise RecordValidationError(f"record {rid}: unknown image_id {iid}")
        if cid not in category_to_label:
            raise RecordValidationError(f"record {rid}: unknown category_id {cid}")
        img = images[iid]
        try:
            box = Box.from_list(bbox)
        except ArgumentError as exc:
            raise RecordValidationError(f"record {rid}: invalid bbox: {exc}") from exc
        if not box.fits_in(img["width"], img["height"]):
            raise RecordValidationError(
                f"record {rid}: box {box.to_list()} outside image "
                f"{img['width']}x{img['height']}"
            )
        records.append(
            IdObjectRecord(
                record_id=rid,
                image_id=iid,
                image_path=str(base / img["file_name"]),
                box=box,
                label_id=category_to_label[cid],
                image_width=img["width"],
                image_height=img["height"],
            )
        )
    return vocab, records


def select_edit_candidates(records, policy: CandidatePolicy):
    """Pick which objects get edited: deterministic, record_id ascending,
    first-N per image."""
    kept = []
    per_image = {}
    for rec in sorted(records, key=lambda r: r.record_id):
        area = rec.box.area
        if area < policy.min_box_area:
            continue
        if area > policy.max_relative_area * rec.image_width * rec.image_height:
            continue
        count = per_image.get(rec.image_id, 0)
        if count >= policy.max_edits_per_image:
            continue
        per_image[rec.image_id] = count + 1
        kept.append(rec)
    return kept


def record_to_dict(rec: IdObjectRecord) -> dict:
    return {
        "record_id": rec.record_id,
        "image_id": rec.image_id,
        "image_path": rec.image_path,
        "box": rec.box.to_list(),
        "label_id": rec.label_id,
        "image_width": rec.image_width,
        "image_height": rec.image_height,
    }


def record_from_dict(doc: dict) -> IdObjectRecord:
    return IdObjectRecord(
        record_id=int(doc["record_id"]),
        image_id=int(doc["image_id"]),
        image_path=str(doc["image_path"]),
        box=Box.from_list(doc["box"]),
        label_id=int(doc["label_id"]),
        image_width=int(doc["image_width"]),
        image_height=int(doc["image_height"]),
    )


def write_record_manifest(path, records) -> None:
    """Line-delimited JSON, one record per line, stable key order."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), sort_keys=True) + "\n")


def read_record_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise FormatError(f"{path}:{line_no}: bad manifest line: {exc}") from exc
    return records
