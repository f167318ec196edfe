import base64

from fastapi.testclient import TestClient

from oodsynth.backends import to_wire
from oodsynth.contract import contract_requests

from ood_adapter.app import create_app

from adapter_helpers import replay_config


def _client():
    return TestClient(create_app(replay_config()))


def _wire(name, endpoint=None):
    reqs = contract_requests()
    return to_wire(endpoint or name, reqs[name])


def test_missing_field_returns_400_with_path():
    body = _wire("concepts")
    del body["query_label"]
    response = _client().post("/v1/concepts", json=body)
    assert response.status_code == 400
    doc = response.json()
    assert doc["code"] == "validation_error"
    assert "query_label" in doc["message"]


def test_unknown_field_rejected():
    body = _wire("concepts")
    body["temperature"] = 0.7
    response = _client().post("/v1/concepts", json=body)
    assert response.status_code == 400
    assert "temperature" in response.json()["message"]


def test_zero_num_rejected():
    body = _wire("concepts")
    body["num"] = 0
    response = _client().post("/v1/concepts", json=body)
    assert response.status_code == 400
    assert "num" in response.json()["message"]


def test_bad_base64_names_image_field():
    body = _wire("inpaint")
    body["image"] = "@@@not-base64@@@"
    response = _client().post("/v1/inpaint", json=body)
    assert response.status_code == 400
    assert response.json()["message"].startswith("image:")


def test_non_png_payload_rejected():
    body = _wire("segment")
    body["image"] = base64.b64encode(b"plain text").decode("ascii")
    response = _client().post("/v1/segment", json=body)
    assert response.status_code == 400
    assert "image" in response.json()["message"]


def test_out_of_bounds_box_rejected_before_fixture_lookup():
    body = _wire("inpaint_oob", "inpaint")
    response = _client().post("/v1/inpaint", json=body)
    assert response.status_code == 400
    assert "box" in response.json()["message"]


def test_non_json_body_rejected():
    response = _client().post("/v1/concepts", content=b"{{{",
                              headers={"Content-Type": "application/json"})
    assert response.status_code == 400
    assert response.json()["code"] == "validation_error"


def test_wrong_type_reports_field_path():
    body = _wire("segment")
    body["box_prompt"] = "not a list"
    response = _client().post("/v1/segment", json=body)
    assert response.status_code == 400
    assert "box_prompt" in response.json()["message"]
