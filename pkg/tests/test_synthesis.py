import io

import numpy as np
import pytest
from PIL import Image

from oodsynth.backends import MockBackend, MockWorld
from oodsynth.concepts import ConceptMap
from oodsynth.errors import ArgumentError, PlanningError, ProtocolError, TransportError
from oodsynth.geometry import Box
from oodsynth.synthesis import (
    STATUS_FAILED,
    STATUS_SYNTHESIZED,
    clamp_outside_box,
    plan_jobs,
    read_edit_manifest,
    resolve_edit_path,
    run_synthesis,
    write_edit_manifest,
)


def _concepts_for(records, n=5):
    labels = {r.label_id for r in records}
    return ConceptMap({lid: [f"novel thing {i}" for i in range(n)] for lid in labels})


def test_plan_jobs_round_robin_order(candidates):
    two = candidates[:2]
    cmap = _concepts_for(two)
    jobs = plan_jobs(two, cmap, budget=4, pipeline_seed=0)
    expected = [
        (two[0].record_id, 0), (two[1].record_id, 0),
        (two[0].record_id, 1), (two[1].record_id, 1),
    ]
    assert [(j.source.record_id, j.concept_index) for j in jobs] == expected


def test_plan_jobs_budget_truncates_and_caps_at_pairs(candidates):
    cmap = _concepts_for(candidates)
    total_pairs = len(candidates) * 5
    jobs = plan_jobs(candidates, cmap, budget=10 ** 6, pipeline_seed=0)
    assert len(jobs) == total_pairs
    assert len({(j.source.record_id, j.concept_index) for j in jobs}) == total_pairs
    assert len(plan_jobs(candidates, cmap, budget=7, pipeline_seed=0)) == 7


def test_plan_jobs_rejects_bad_inputs(candidates):
    cmap = _concepts_for(candidates)
    with pytest.raises(ArgumentError):
        plan_jobs(candidates, cmap, budget=0, pipeline_seed=0)
    with pytest.raises(PlanningError):
        plan_jobs([], cmap, budget=4, pipeline_seed=0)
    empty = ConceptMap({r.label_id: [] for r in candidates})
    with pytest.raises(PlanningError):
        plan_jobs(candidates, empty, budget=4, pipeline_seed=0)


def test_plan_jobs_seeds_differ_per_job(candidates):
    cmap = _concepts_for(candidates)
    jobs = plan_jobs(candidates, cmap, budget=10, pipeline_seed=7)
    seeds = [j.seed for j in jobs]
    assert len(set(seeds)) == len(seeds)
    again = plan_jobs(candidates, cmap, budget=10, pipeline_seed=7)
    assert seeds == [j.seed for j in again]


def test_run_synthesis_deterministic_output(tmp_path, candidates):
    cmap = _concepts_for(candidates, n=1)
    jobs = plan_jobs(candidates[:1], cmap, budget=1, pipeline_seed=3)
    backend = MockBackend(MockWorld(seed=3))
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    rec_a = run_synthesis(jobs, backend, out_a, pipeline_seed=3)[0]
    rec_b = run_synthesis(jobs, backend, out_b, pipeline_seed=3)[0]
    assert rec_a.status == STATUS_SYNTHESIZED
    assert resolve_edit_path(rec_a, out_a).read_bytes() == resolve_edit_path(rec_b, out_b).read_bytes()


def test_run_synthesis_clamps_outside_pixels(tmp_path, candidates):
    cmap = _concepts_for(candidates, n=2)
    jobs = plan_jobs(candidates[:4], cmap, budget=8, pipeline_seed=5)
    backend = MockBackend(MockWorld(seed=5))
    records = run_synthesis(jobs, backend, tmp_path / "out", pipeline_seed=5)
    for rec in records:
        assert rec.status == STATUS_SYNTHESIZED
        source = np.asarray(Image.open(rec.job.source.image_path).convert("RGB"))
        edited = np.asarray(Image.open(resolve_edit_path(rec, tmp_path / "out")).convert("RGB"))
        x0, y0, x1, y1 = rec.edit_mask_box.pixel_bounds(*source.shape[1::-1])
        inside = np.zeros(source.shape[:2], dtype=bool)
        inside[y0:y1, x0:x1] = True
        assert np.array_equal(source[~inside], edited[~inside])
        assert (source[inside] != edited[inside]).any()


def test_mock_blob_can_spill_before_clamping(candidates):
    # The clamp must be doing real work: for at least one job the raw backend
    # output differs from the source outside the box.
    backend = MockBackend(MockWorld(seed=5))
    spilled = False
    for rec_idx, rec in enumerate(candidates[:6]):
        with Image.open(rec.image_path) as img:
            source = img.convert("RGB")
        buf = io.BytesIO()
        source.save(buf, format="PNG")
        response = backend.inpaint({"image": buf.getvalue(), "box": rec.box,
                                    "prompt": "a novel thing", "seed": rec_idx})
        raw = np.asarray(Image.open(io.BytesIO(response["image"])).convert("RGB"))
        src = np.asarray(source)
        x0, y0, x1, y1 = rec.box.pixel_bounds(*source.size)
        outside = np.ones(src.shape[:2], dtype=bool)
        outside[y0:y1, x0:x1] = False
        if (raw[outside] != src[outside]).any():
            spilled = True
            break
    assert spilled


def test_run_synthesis_retries_with_fresh_seed(tmp_path, candidates):
    calls = []

    class FlakyInpaint:
        def __init__(self):
            self.n = 0

        def inpaint(self, request):
            calls.append(request["seed"])
            self.n += 1
            if self.n <= 2:
                raise TransportError("flaky")
            return MockBackend(MockWorld()).inpaint(request)

    cmap = _concepts_for(candidates, n=1)
    jobs = plan_jobs(candidates[:1], cmap, budget=1, pipeline_seed=9)
    rec = run_synthesis(jobs, FlakyInpaint(), tmp_path, pipeline_seed=9, retry_budget=3)[0]
    assert rec.status == STATUS_SYNTHESIZED
    assert rec.job.attempt == 3
    assert len(set(calls)) == 3  # every attempt used a fresh derived seed


def test_run_synthesis_transport_exhaustion_marks_failed(tmp_path, candidates):
    class AlwaysDown:
        def inpaint(self, request):
            raise TransportError("down")

    cmap = _concepts_for(candidates, n=1)
    jobs = plan_jobs(candidates[:1], cmap, budget=1, pipeline_seed=9)
    rec = run_synthesis(jobs, AlwaysDown(), tmp_path, pipeline_seed=9, retry_budget=2)[0]
    assert rec.status == STATUS_FAILED
    assert "transport" in rec.reason


def test_run_synthesis_protocol_error_not_retried(tmp_path, candidates):
    calls = []

    class Rejecting:
        def inpaint(self, request):
            calls.append(1)
            raise ProtocolError("image too large")

    cmap = _concepts_for(candidates, n=1)
    jobs = plan_jobs(candidates[:1], cmap, budget=1, pipeline_seed=9)
    rec = run_synthesis(jobs, Rejecting(), tmp_path, pipeline_seed=9, retry_budget=3)[0]
    assert rec.status == STATUS_FAILED
    assert len(calls) == 1


def test_run_synthesis_concurrency_matches_serial(tmp_path, candidates):
    cmap = _concepts_for(candidates, n=3)
    jobs = plan_jobs(candidates, cmap, budget=12, pipeline_seed=11)
    backend = MockBackend(MockWorld(seed=11))
    serial = run_synthesis(jobs, backend, tmp_path / "s", pipeline_seed=11, concurrency=1)
    threaded = run_synthesis(jobs, backend, tmp_path / "t", pipeline_seed=11, concurrency=8)
    assert [r.edited_image_path for r in serial] == [r.edited_image_path for r in threaded]
    for a, b in zip(serial, threaded):
        pa = resolve_edit_path(a, tmp_path / "s")
        pb = resolve_edit_path(b, tmp_path / "t")
        assert pa.read_bytes() == pb.read_bytes()


def test_statuses_partition_and_counts(tmp_path, candidates):
    cmap = _concepts_for(candidates, n=2)
    jobs = plan_jobs(candidates, cmap, budget=9, pipeline_seed=2)
    records = run_synthesis(jobs, MockBackend(MockWorld()), tmp_path, pipeline_seed=2)
    assert len(records) == len(jobs)
    assert all(r.status == STATUS_SYNTHESIZED for r in records)


def test_edit_manifest_roundtrip(tmp_path, candidates):
    cmap = _concepts_for(candidates, n=2)
    jobs = plan_jobs(candidates[:3], cmap, budget=5, pipeline_seed=8)
    records = run_synthesis(jobs, MockBackend(MockWorld()), tmp_path, pipeline_seed=8)
    path = tmp_path / "manifest.jsonl"
    write_edit_manifest(path, records)
    loaded = read_edit_manifest(path)
    stripped = [r.__class__(**{**r.__dict__, "metadata": None}) for r in records]
    assert loaded == stripped


def test_clamp_outside_box_requires_matching_dims():
    src = Image.new("RGB", (10, 10))
    bad = Image.new("RGB", (11, 10))
    with pytest.raises(ProtocolError):
        clamp_outside_box(src, bad, Box(1, 1, 2, 2))
