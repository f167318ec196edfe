"""Shared wire-contract checks.

The suite exercises schema-level behavior only, so the same checks must pass
against the in-process mocks, a replayed fixture service, or a live adapter.
Requests are fully deterministic; services that key fixtures by request hash
can be recorded once and replayed forever.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ProtocolError


@dataclass(frozen=True)
class ContractResult:
    name: str
    ok: bool
    detail: str = ""


def contract_image(width: int = 24, height: int = 24) -> bytes:
    """Deterministic RGB gradient PNG used by every contract request."""
    yy, xx = np.mgrid[0:height, 0:width]
    arr = np.stack(
        [(xx * 7 + yy * 3) % 256, (xx * 5) % 256, (yy * 11) % 256], axis=-1
    ).astype(np.uint8)
    out = io.BytesIO()
    Image.fromarray(arr, "RGB").save(out, format="PNG")
    return out.getvalue()


def contract_requests() -> dict:
    image = contract_image()
    return {
        "concepts": {"id_labels": ["person", "car"], "query_label": "person", "num": 5},
        "concepts_zero": {"id_labels": ["person", "car"], "query_label": "person", "num": 0},
        "inpaint": {"image": image, "box": [4.0, 4.0, 10.0, 10.0], "prompt": "a test object", "seed": 7},
        "inpaint_oob": {"image": image, "box": [10.0, 10.0, 40.0, 40.0], "prompt": "a test object", "seed": 7},
        "segment": {"image": image, "box_prompt": [4.0, 4.0, 10.0, 10.0]},
        "segment_oob": {"image": image, "box_prompt": [-5.0, 4.0, 10.0, 10.0]},
    }


def _expect_protocol_error(fn, request):
    try:
        fn(request)
    except ProtocolError:
        return True, ""
    except Exception as exc:  # wrong error type is a contract violation
        return False, f"raised {type(exc).__name__} instead of ProtocolError"
    return False, "no error raised"


def run_contract_suite(backend) -> list:
    """Run every schema check against a backend; returns one result per check."""
    reqs = contract_requests()
    results = []

    def record(name, ok, detail=""):
        results.append(ContractResult(name, bool(ok), detail))

    try:
        body = backend.concepts(reqs["concepts"])
        concepts = body["concepts"]
        ok = (
            isinstance(concepts, list)
            and len(concepts) >= 1
            and all(isinstance(c, str) and c for c in concepts)
        )
        record("concepts-returns-nonempty-strings", ok, f"got {concepts!r}" if not ok else "")
    except Exception as exc:
        record("concepts-returns-nonempty-strings", False, repr(exc))

    ok, detail = _expect_protocol_error(backend.concepts, reqs["concepts_zero"])
    record("concepts-rejects-zero-num", ok, detail)

    try:
        body = backend.inpaint(reqs["inpaint"])
        with Image.open(io.BytesIO(body["image"])) as img:
            ok = img.size == (24, 24)
        record("inpaint-preserves-dimensions", ok, f"got {img.size}" if not ok else "")
    except Exception as exc:
        record("inpaint-preserves-dimensions", False, repr(exc))

    ok, detail = _expect_protocol_error(backend.inpaint, reqs["inpaint_oob"])
    record("inpaint-rejects-out-of-bounds-box", ok, detail)

    try:
        body = backend.segment(reqs["segment"])
        masks = body["masks"]
        ok = isinstance(masks, list)
        for cand in masks:
            ok = ok and 0.0 <= cand.score <= 1.0
            ok = ok and sum(cand.mask.runs) == cand.mask.width * cand.mask.height
        record("segment-masks-are-valid", ok)
    except Exception as exc:
        record("segment-masks-are-valid", False, repr(exc))

    ok, detail = _expect_protocol_error(backend.segment, reqs["segment_oob"])
    record("segment-rejects-out-of-bounds-box", ok, detail)

    return results


def assert_contract(backend) -> None:
    results = run_contract_suite(backend)
    failed = [r for r in results if not r.ok]
    if failed:
        lines = "\n".join(f"  {r.name}: {r.detail}" for r in failed)
        raise AssertionError(f"contract suite failures:\n{lines}")
