import pytest

from adapter_helpers import ServerHandle, record_config, replay_config

from ood_adapter.app import create_app


@pytest.fixture()
def record_app(tmp_path):
    return create_app(record_config(tmp_path / "fixtures")), tmp_path / "fixtures"


@pytest.fixture()
def replay_app():
    return create_app(replay_config())


@pytest.fixture()
def serve():
    return ServerHandle
