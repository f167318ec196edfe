"""Regenerate the committed replay fixtures.

Runs the shared contract-suite requests against a record-mode adapter backed
by the stub hooks, writing into tests/fixtures/. Run from the adapter
directory:

    python tests/make_fixtures.py
"""

from pathlib import Path

from fastapi.testclient import TestClient

from ood_adapter.app import create_app
from ood_adapter.config import AdapterConfig, EndpointSetting

from oodsynth.backends import to_wire
from oodsynth.contract import contract_requests


def main() -> None:
    fixture_dir = Path(__file__).parent / "fixtures"
    stub = EndpointSetting(model="stub")
    config = AdapterConfig(mode="record", fixture_dir=str(fixture_dir),
                           concepts=stub, inpaint=stub, segment=stub)
    client = TestClient(create_app(config))
    requests = contract_requests()
    for endpoint, name in (("concepts", "concepts"), ("inpaint", "inpaint"),
                           ("segment", "segment")):
        body = to_wire(endpoint, requests[name])
        response = client.post(f"/v1/{endpoint}", json=body)
        response.raise_for_status()
        print(f"recorded {endpoint}: {response.status_code}")
    print(f"fixtures in {fixture_dir}")


if __name__ == "__main__":
    main()
