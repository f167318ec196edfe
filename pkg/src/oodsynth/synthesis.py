"""Box-conditioned editing orchestration.

Jobs fan out over (candidate record x concept) pairs, run against the
inpaint backend with bounded concurrency, and land as EditRecords with full
provenance. The orchestrator clamps every returned image so pixels outside
the editing box are copied from the source; downstream stages may rely on
that guarantee without trusting the backend.
"""

from __future__ import annotations

import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from PIL import Image

from .concepts import ConceptMap
from .dataset import IdObjectRecord, record_from_dict, record_to_dict
from .errors import ArgumentError, FormatError, PlanningError, ProtocolError, TransportError
from .geometry import Box
from .seeds import derive_seed

logger = logging.getLogger(__name__)

STATUS_SYNTHESIZED = "synthesized"
STATUS_REFINED = "refined"
STATUS_IOU_REJECTED = "iou_rejected"
STATUS_SIM_REJECTED = "sim_rejected"
STATUS_ACCEPTED = "accepted"
STATUS_FAILED = "failed"

ALL_STATUSES = (
    STATUS_SYNTHESIZED,
    STATUS_REFINED,
    STATUS_IOU_REJECTED,
    STATUS_SIM_REJECTED,
    STATUS_ACCEPTED,
    STATUS_FAILED,
)


def resolve_edit_path(edit: "EditRecord", images_root=None) -> Path:
    """Edited-image paths are stored relative to the synthesis output dir."""
    path = Path(edit.edited_image_path)
    if not path.is_absolute() and images_root is not None:
        return Path(images_root) / path
    return path


@dataclass(frozen=True)
class SynthesisJob:
    source: IdObjectRecord
    concept: str
    concept_index: int
    seed: int
    attempt: int = 1

    @property
    def job_key(self) -> str:
        """Stable hex name for on-disk artifacts, independent of attempt."""
        return format(
            derive_seed(self.source.record_id, self.concept_index, self.concept), "016x"
        )


@dataclass(frozen=True)
class EditRecord:
    edit_id: int
    job: SynthesisJob
    edited_image_path: str
    edit_mask_box: Box
    status: str
    refined_box: Box | None = None
    measured_iou: float | None = None
    similarity: float | None = None
    reason: str | None = None
    # Volatile diagnostics (latency, wall-clock); never serialized, so
    # manifests stay byte-identical across runs and concurrency levels.
    metadata: dict | None = None


def derive_job_seed(pipeline_seed: int, record_id: int, concept_index: int, attempt: int) -> int:
    return derive_seed(pipeline_seed, record_id, concept_index, attempt)


def plan_jobs(candidates, concept_map: ConceptMap, budget: int, pipeline_seed: int):
    """Enumerate jobs round-robin over concepts within each record, truncated
    to `budget`; deterministic given inputs."""
    if budget < 1:
        raise ArgumentError(f"budget must be >= 1, got {budget}")
    if not candidates:
        raise PlanningError("no edit candidates to plan over")
    per_record_concepts = {}
    for rec in candidates:
        concepts = concept_map.per_label.get(rec.label_id, [])
        if not concepts:
            raise PlanningError(f"label_id {rec.label_id} has no concepts")
        per_record_concepts[rec.record_id] = concepts

    jobs = []
    depth = max(len(c) for c in per_record_concepts.values())
    for concept_index in range(depth):
        for rec in candidates:
            concepts = per_record_concepts[rec.record_id]
            if concept_index >= len(concepts):
                continue
            jobs.append(
                SynthesisJob(
                    source=rec,
                    concept=concepts[concept_index],
                    concept_index=concept_index,
                    seed=derive_job_seed(pipeline_seed, rec.record_id, concept_index, 1),
                    attempt=1,
                )
            )
            if len(jobs) == budget:
                return jobs
    return jobs


def clamp_outside_box(source: Image.Image, edited: Image.Image, box: Box) -> Image.Image:
    """Copy every pixel outside the editing box from the source image."""
    if edited.size != source.size:
        raise ProtocolError(
            f"edited image size {edited.size} differs from source {source.size}"
        )
    x0, y0, x1, y1 = box.pixel_bounds(*source.size)
    out = source.copy()
    if x1 > x0 and y1 > y0:
        out.paste(edited.crop((x0, y0, x1, y1)), (x0, y0))
    return out


def _run_one(job: SynthesisJob, backend, out_dir: Path, pipeline_seed: int,
             retry_budget: int, prompt_template: str, edit_id: int) -> EditRecord:
    source_path = Path(job.source.image_path)
    with Image.open(source_path) as img:
        source = img.convert("RGB")
    buf = io.BytesIO()
    source.save(buf, format="PNG")
    source_bytes = buf.getvalue()
    prompt = prompt_template.format(concept=job.concept)

    attempt_job = job
    last_error = None
    for attempt in range(1, retry_budget + 1):
        seed = derive_job_seed(pipeline_seed, job.source.record_id, job.concept_index, attempt)
        attempt_job = replace(job, seed=seed, attempt=attempt)
        started = time.monotonic()
        try:
            response = backend.inpaint(
                {"image": source_bytes, "box": job.source.box, "prompt": prompt, "seed": seed}
            )
        except TransportError as exc:
            last_error = exc
            logger.warning("job %s attempt %d transport failure: %s", job.job_key, attempt, exc)
            continue
        except ProtocolError as exc:
            # Contract violations are not retried; record and move on.
            return EditRecord(
                edit_id=edit_id,
                job=attempt_job,
                edited_image_path="",
                edit_mask_box=job.source.box,
                status=STATUS_FAILED,
                reason=f"protocol: {exc}",
            )
        with Image.open(io.BytesIO(response["image"])) as edited_raw:
            edited = clamp_outside_box(source, edited_raw.convert("RGB"), job.source.box)
        name = f"{job.job_key}.png"
        edited.save(out_dir / name, format="PNG")
        # The manifest stores the name relative to out_dir so identical runs
        # into different roots stay byte-identical.
        return EditRecord(
            edit_id=edit_id,
            job=attempt_job,
            edited_image_path=name,
            edit_mask_box=job.source.box,
            status=STATUS_SYNTHESIZED,
            metadata={"latency_s": time.monotonic() - started},
        )
    return EditRecord(
        edit_id=edit_id,
        job=attempt_job,
        edited_image_path="",
        edit_mask_box=job.source.box,
        status=STATUS_FAILED,
        reason=f"transport: {last_error}",
    )


def run_synthesis(jobs, backend, out_dir, pipeline_seed: int, concurrency: int = 1,
                  retry_budget: int = 3, prompt_template: str = "a {concept}"):
    """Execute jobs with bounded concurrency; results come back in job order
    regardless of completion order."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise ArgumentError(f"output directory {out_dir} is not writable: {exc}") from exc

    def runner(indexed):
        edit_id, job = indexed
        return _run_one(job, backend, out_dir, pipeline_seed, retry_budget,
                        prompt_template, edit_id)

    indexed_jobs = list(enumerate(jobs))
    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(runner, indexed_jobs))
    else:
        records = [runner(item) for item in indexed_jobs]
    return records


# --- manifest serialization ----------------------------------------------------


def edit_to_dict(edit: EditRecord) -> dict:
    return {
        "edit_id": edit.edit_id,
        "source": record_to_dict(edit.job.source),
        "concept": edit.job.concept,
        "concept_index": edit.job.concept_index,
        "seed": edit.job.seed,
        "attempt": edit.job.attempt,
        "edited_image_path": edit.edited_image_path,
        "edit_mask_box": edit.edit_mask_box.to_list(),
        "refined_box": edit.refined_box.to_list() if edit.refined_box else None,
        "measured_iou": edit.measured_iou,
        "similarity": edit.similarity,
        "status": edit.status,
        "reason": edit.reason,
    }


def edit_from_dict(doc: dict) -> EditRecord:
    source = record_from_dict(doc["source"])
    job = SynthesisJob(
        source=source,
        concept=doc["concept"],
        concept_index=int(doc["concept_index"]),
        seed=int(doc["seed"]),
        attempt=int(doc["attempt"]),
    )
    status = doc["status"]
    if status not in ALL_STATUSES:
        raise FormatError(f"unknown edit status {status!r}")
    return EditRecord(
        edit_id=int(doc["edit_id"]),
        job=job,
        edited_image_path=doc["edited_image_path"],
        edit_mask_box=Box.from_list(doc["edit_mask_box"]),
        refined_box=Box.from_list(doc["refined_box"]) if doc.get("refined_box") else None,
        measured_iou=doc.get("measured_iou"),
        similarity=doc.get("similarity"),
        status=status,
        reason=doc.get("reason"),
    )


def write_edit_manifest(path, edits) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for edit in edits:
            fh.write(json.dumps(edit_to_dict(edit), sort_keys=True) + "\n")


def read_edit_manifest(path):
    edits = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                edits.append(edit_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise FormatError(f"{path}:{line_no}: bad edit manifest line: {exc}") from exc
    return edits
