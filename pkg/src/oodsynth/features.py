"""Feature archives, pairing, and the similarity filter.

Archives are the bit-exact handoff point from whatever extractor produced
the latents. Binary layout (little-endian):

    magic   4 bytes  b"SYNF"
    version u32      1
    dim     u32      vector dimension d
    count   u64      number of records
    then per record:
        record_id u64, image_id u64, box 4 x f32 (x, y, w, h),
        label_id u32, kind u8 (0 = id, 1 = edit), 3 pad bytes,
        vector d x f32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ArgumentError,
    CorruptionError,
    DegenerateVectorError,
    FormatError,
    PairingError,
    RecordValidationError,
)
from .geometry import Box
from .synthesis import STATUS_ACCEPTED, STATUS_REFINED, STATUS_SIM_REJECTED

MAGIC = b"SYNF"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_RECORD_FIXED = struct.Struct("<QQ4fIB3x")

KIND_ID = "id"
KIND_EDIT = "edit"
_KIND_CODES = {KIND_ID: 0, KIND_EDIT: 1}
_KIND_NAMES = {0: KIND_ID, 1: KIND_EDIT}


@dataclass(frozen=True)
class FeatureRecord:
    record_id: int
    image_id: int
    box: Box
    label_id: int
    kind: str
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float32))
        if self.kind not in _KIND_CODES:
            raise ArgumentError(f"kind must be one of {sorted(_KIND_CODES)}, got {self.kind!r}")
        if not np.isfinite(self.vector).all():
            raise RecordValidationError(f"record {self.record_id}: non-finite feature value")


@dataclass(frozen=True)
class FeaturePair:
    id_feature: FeatureRecord
    edit_feature: FeatureRecord
    similarity: float


@dataclass(frozen=True)
class FilterConfig:
    eps_low: float = 0.4
    eps_up: float = 0.9

    def __post_init__(self):
        if not (-1.0 <= self.eps_low < self.eps_up <= 1.0):
            raise ArgumentError(
                f"need -1 <= eps_low < eps_up <= 1, got ({self.eps_low}, {self.eps_up})"
            )


def write_feature_archive(path, records, dim: int) -> None:
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(records)))
        for rec in records:
            if rec.vector.shape != (dim,):
                raise ArgumentError(
                    f"record {rec.record_id}: vector length {rec.vector.shape} != dim {dim}"
                )
            fh.write(
                _RECORD_FIXED.pack(
                    rec.record_id,
                    rec.image_id,
                    rec.box.x,
                    rec.box.y,
                    rec.box.w,
                    rec.box.h,
                    rec.label_id,
                    _KIND_CODES[rec.kind],
                )
            )
            fh.write(rec.vector.astype("<f4").tobytes())


def read_feature_archive(path):
    """Decode an archive exactly; every deviation is a loud, typed error."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: too short for a header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    record_size = _RECORD_FIXED.size + 4 * dim
    body = data[_HEADER.size:]
    if len(body) != count * record_size:
        complete = len(body) // record_size
        raise CorruptionError(
            f"{path}: header promises {count} records but payload holds "
            f"{len(body)} bytes; truncated at record {complete}"
        )
    records = []
    offset = 0
    for index in range(count):
        record_id, image_id, x, y, w, h, label_id, kind_code = _RECORD_FIXED.unpack_from(
            body, offset
        )
        offset += _RECORD_FIXED.size
        vector = np.frombuffer(body, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        if kind_code not in _KIND_NAMES:
            raise FormatError(f"{path}: record {index}: unknown kind code {kind_code}")
        if not np.isfinite(vector).all():
            raise RecordValidationError(
                f"{path}: record {index} (record_id {record_id}): non-finite feature value"
            )
        records.append(
            FeatureRecord(
                record_id=record_id,
                image_id=image_id,
                box=Box(x, y, w, h),
                label_id=label_id,
                kind=_KIND_NAMES[kind_code],
                vector=vector,
            )
        )
    return records


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero-norm vector is undefined")
    return float(np.clip(a.dot(b) / (norm_a * norm_b), -1.0, 1.0))


def pair_features(id_records, edit_records, edits):
    """Join refined edits to their feature vectors by lineage.

    Edit-kind features are keyed by edit_id, id-kind features by the source
    record_id. Unmatched edits raise instead of being dropped.
    """
    id_index = {}
    for rec in id_records:
        if rec.kind != KIND_ID:
            raise PairingError(f"record {rec.record_id} in id archive has kind {rec.kind}")
        if rec.record_id in id_index:
            raise PairingError(f"duplicate id feature for record {rec.record_id}",
                               lineage_ids=[rec.record_id])
        id_index[rec.record_id] = rec
    edit_index = {}
    for rec in edit_records:
        if rec.kind != KIND_EDIT:
            raise PairingError(f"record {rec.record_id} in edit archive has kind {rec.kind}")
        if rec.record_id in edit_index:
            # One instance-level feature per synthetic image.
            raise PairingError(f"duplicate edit feature for edit {rec.record_id}",
                               lineage_ids=[rec.record_id])
        edit_index[rec.record_id] = rec

    pairs = []
    missing = []
    for edit in edits:
        if edit.status != STATUS_REFINED:
            continue
        edit_feature = edit_index.get(edit.edit_id)
        id_feature = id_index.get(edit.job.source.record_id)
        if edit_feature is None or id_feature is None:
            missing.append(edit.edit_id)
            continue
        pairs.append(
            FeaturePair(
                id_feature=id_feature,
                edit_feature=edit_feature,
                similarity=cosine_similarity(edit_feature.vector, id_feature.vector),
            )
        )
    if missing:
        raise PairingError(
            f"{len(missing)} refined edits lack a feature counterpart: {missing[:10]}",
            lineage_ids=missing,
        )
    return pairs


def filter_by_similarity(pairs, config: FilterConfig):
    """Keep pairs strictly inside the (eps_low, eps_up) interval."""
    return [p for p in pairs if config.eps_low < p.similarity < config.eps_up]


def apply_filter_statuses(edits, pairs, config: FilterConfig):
    """Mark each paired edit accepted or sim_rejected; returns new records."""
    from dataclasses import replace

    by_edit_id = {p.edit_feature.record_id: p for p in pairs}
    out = []
    for edit in edits:
        pair = by_edit_id.get(edit.edit_id)
        if edit.status == STATUS_REFINED and pair is not None:
            kept = config.eps_low < pair.similarity < config.eps_up
            edit = replace(
                edit,
                status=STATUS_ACCEPTED if kept else STATUS_SIM_REJECTED,
                similarity=pair.similarity,
            )
        out.append(edit)
    return out
