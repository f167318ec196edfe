import json

from fastapi.testclient import TestClient

from oodsynth.backends import to_wire
from oodsynth.contract import contract_requests

from ood_adapter.app import create_app
from ood_adapter.config import AdapterConfig, EndpointSetting
from ood_adapter.fixtures import request_key

from adapter_helpers import record_config


def _record_then_replay(tmp_path, endpoint, body):
    fixture_dir = tmp_path / "fixtures"
    recorder = TestClient(create_app(record_config(fixture_dir)))
    recorded = recorder.post(f"/v1/{endpoint}", json=body)
    assert recorded.status_code == 200
    replayer = TestClient(create_app(AdapterConfig(mode="replay",
                                                   fixture_dir=str(fixture_dir))))
    replayed = replayer.post(f"/v1/{endpoint}", json=body)
    return recorded, replayed


def test_record_then_replay_identical_bytes(tmp_path):
    reqs = contract_requests()
    for endpoint in ("concepts", "inpaint", "segment"):
        recorded, replayed = _record_then_replay(tmp_path, endpoint,
                                                 to_wire(endpoint, reqs[endpoint]))
        assert replayed.status_code == 200
        assert replayed.content == recorded.content


def test_replay_of_unrecorded_request_is_404_no_fixture(tmp_path):
    (tmp_path / "fixtures").mkdir()
    replayer = TestClient(create_app(AdapterConfig(mode="replay",
                                                   fixture_dir=str(tmp_path / "fixtures"))))
    body = to_wire("concepts", contract_requests()["concepts"])
    response = replayer.post("/v1/concepts", json=body)
    assert response.status_code == 404
    assert response.json()["code"] == "no_fixture"


def test_fixture_dir_survives_restart(tmp_path):
    fixture_dir = tmp_path / "fixtures"
    body = to_wire("concepts", contract_requests()["concepts"])
    recorder = TestClient(create_app(record_config(fixture_dir)))
    first = recorder.post("/v1/concepts", json=body)
    # Fresh app instances over the same directory behave identically.
    for _ in range(2):
        replayer = TestClient(create_app(AdapterConfig(mode="replay",
                                                       fixture_dir=str(fixture_dir))))
        assert replayer.post("/v1/concepts", json=body).content == first.content


def test_fixture_key_independent_of_client_formatting(tmp_path):
    body = to_wire("concepts", contract_requests()["concepts"])
    spaced = json.dumps(body, indent=4).encode("utf-8")
    fixture_dir = tmp_path / "fixtures"
    recorder = TestClient(create_app(record_config(fixture_dir)))
    recorded = recorder.post("/v1/concepts", content=spaced,
                             headers={"Content-Type": "application/json"})
    assert recorded.status_code == 200
    assert (fixture_dir / f"{request_key('concepts', body)}.json").exists()


def test_index_manifest_lists_fixtures(tmp_path):
    fixture_dir = tmp_path / "fixtures"
    recorder = TestClient(create_app(record_config(fixture_dir)))
    reqs = contract_requests()
    recorder.post("/v1/concepts", json=to_wire("concepts", reqs["concepts"]))
    recorder.post("/v1/segment", json=to_wire("segment", reqs["segment"]))
    index = json.loads((fixture_dir / "index.json").read_text())
    assert sorted(index.values()) == ["concepts", "segment"]


def test_stub_inpaint_preserves_dimensions_and_edits_box(tmp_path):
    import base64
    import io

    import numpy as np
    from PIL import Image

    body = to_wire("inpaint", contract_requests()["inpaint"])
    recorder = TestClient(create_app(record_config(tmp_path / "f")))
    response = recorder.post("/v1/inpaint", json=body)
    original = np.asarray(Image.open(io.BytesIO(base64.b64decode(body["image"]))).convert("RGB"))
    edited = np.asarray(Image.open(io.BytesIO(base64.b64decode(
        response.json()["image"]))).convert("RGB"))
    assert edited.shape == original.shape
    x, y, w, h = (int(v) for v in body["box"])
    assert (edited[y:y + h, x:x + w] != original[y:y + h, x:x + w]).any()
    outside = np.ones(original.shape[:2], dtype=bool)
    outside[y:y + h, x:x + w] = False
    assert np.array_equal(edited[outside], original[outside])
