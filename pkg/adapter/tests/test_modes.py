import pytest
from fastapi.testclient import TestClient

from oodsynth.backends import to_wire
from oodsynth.contract import contract_requests

from ood_adapter.app import create_app
from ood_adapter.config import AdapterConfig, AdapterConfigError, EndpointSetting, config_from_dict

from adapter_helpers import STUB, live_config


def test_unconfigured_endpoint_returns_501():
    app = create_app(live_config(concepts=STUB))  # inpaint/segment unconfigured
    client = TestClient(app)
    body = to_wire("inpaint", contract_requests()["inpaint"])
    response = client.post("/v1/inpaint", json=body)
    assert response.status_code == 501
    assert response.json()["code"] == "unimplemented"


def test_hook_failure_returns_502():
    def exploding(request, settings):
        raise RuntimeError("model went away")

    import ood_adapter.hooks as hooks_module

    hooks_module.EXPLODING = exploding
    try:
        config = live_config(concepts=EndpointSetting(model="ood_adapter.hooks:EXPLODING"))
        client = TestClient(create_app(config))
        body = to_wire("concepts", contract_requests()["concepts"])
        response = client.post("/v1/concepts", json=body)
        assert response.status_code == 502
        assert response.json()["code"] == "backend_error"
    finally:
        del hooks_module.EXPLODING


def test_unloadable_model_fails_at_startup():
    config = live_config(concepts=EndpointSetting(model="no_such_module:fn"))
    with pytest.raises(AdapterConfigError):
        create_app(config)


def test_replay_mode_requires_fixture_dir():
    with pytest.raises(AdapterConfigError):
        AdapterConfig(mode="replay", fixture_dir=None)


def test_config_from_dict_roundtrip():
    doc = {
        "mode": "record",
        "fixture_dir": "fixtures",
        "endpoints": {
            "concepts": {"model": "stub"},
            "inpaint": {"model": "stub", "settings": {"steps": 30, "guidance": 7.5}},
        },
    }
    config = config_from_dict(doc)
    assert config.mode == "record"
    assert config.inpaint.settings == {"steps": 30, "guidance": 7.5}
    assert config.segment.model is None


def test_config_rejects_unknown_endpoint():
    with pytest.raises(AdapterConfigError):
        config_from_dict({"mode": "live", "endpoints": {"upscale": {"model": "stub"}}})


def test_health_reports_mode():
    client = TestClient(create_app(live_config(concepts=STUB)))
    assert client.get("/healthz").json() == {"mode": "live"}
