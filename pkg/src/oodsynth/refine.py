"""Box refinement: segment the edited region from a padded prompt, convert
the best mask to a box, and gate on IoU against the editing box."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ArgumentError, ProtocolError, TransportError
from .geometry import iou, mask_to_box, pad_box
from .synthesis import (
    STATUS_FAILED,
    STATUS_IOU_REJECTED,
    STATUS_REFINED,
    STATUS_SYNTHESIZED,
    EditRecord,
    resolve_edit_path,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefineConfig:
    padding: float = 0.1
    iou_threshold: float = 0.5

    def __post_init__(self):
        if self.padding < 0:
            raise ArgumentError("padding must be >= 0")
        if not (0.0 <= self.iou_threshold <= 1.0):
            raise ArgumentError("iou_threshold must be in [0, 1]")


def select_best_mask(candidates):
    """Highest confidence wins; ties broken by larger foreground area."""
    return max(candidates, key=lambda c: (c.score, c.mask.foreground_count()))


def _refine_one(edit: EditRecord, backend, config: RefineConfig, retry_budget: int,
                images_root=None) -> EditRecord:
    image_bytes = resolve_edit_path(edit, images_root).read_bytes()
    source = edit.job.source
    prompt_box = pad_box(edit.edit_mask_box, config.padding,
                         source.image_width, source.image_height)
    request = {"image": image_bytes, "box_prompt": prompt_box}

    last_error = None
    for attempt in range(retry_budget):
        try:
            response = backend.segment(request)
            break
        except TransportError as exc:
            last_error = exc
            logger.warning("refine edit %d attempt %d transport failure: %s",
                           edit.edit_id, attempt + 1, exc)
        except ProtocolError as exc:
            return replace(edit, status=STATUS_FAILED, reason=f"protocol: {exc}")
    else:
        return replace(edit, status=STATUS_FAILED, reason=f"transport: {last_error}")

    if not response["masks"]:
        return replace(edit, status=STATUS_IOU_REJECTED, reason="empty_mask")
    best = select_best_mask(response["masks"])
    if best.mask.foreground_count() == 0:
        return replace(edit, status=STATUS_IOU_REJECTED, reason="empty_mask")
    measured = mask_to_box(best.mask)
    overlap = iou(measured, edit.edit_mask_box)
    # Strict gate: scale drift at or below the threshold is rejected, but the
    # measured box is kept either way for audit.
    if overlap > config.iou_threshold:
        return replace(edit, status=STATUS_REFINED, refined_box=measured, measured_iou=overlap)
    return replace(edit, status=STATUS_IOU_REJECTED, refined_box=measured,
                   measured_iou=overlap, reason="iou_below_threshold")


def refine_boxes(edits, backend, config: RefineConfig, concurrency: int = 1,
                 retry_budget: int = 3, images_root=None):
    """Refine every synthesized edit; other statuses pass through unchanged."""
    def runner(edit):
        if edit.status != STATUS_SYNTHESIZED:
            return edit
        return _refine_one(edit, backend, config, retry_budget, images_root)

    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            return list(pool.map(runner, edits))
    return [runner(edit) for edit in edits]


def bypass_refinement(edits):
    """Refiner-off path: adopt the editing mask box as the refined box."""
    out = []
    for edit in edits:
        if edit.status == STATUS_SYNTHESIZED:
            edit = replace(edit, status=STATUS_REFINED, refined_box=edit.edit_mask_box,
                           measured_iou=1.0, reason="refiner_disabled")
        out.append(edit)
    return out
