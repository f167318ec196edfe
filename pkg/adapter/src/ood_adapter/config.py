"""Adapter configuration.

Each endpoint names the model hook powering it plus its generation settings;
generation settings never leak into the wire schema. Modes:

- live:   call the hook, return its response.
- record: call the hook and persist the response keyed by request hash.
- replay: return recorded responses only; no models needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

ENDPOINTS = ("concepts", "inpaint", "segment")
MODES = ("live", "record", "replay")


class AdapterConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EndpointSetting:
    model: str | None = None   # None = unconfigured, "stub" = builtin, "pkg.mod:fn" = import
    settings: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "replay"
    fixture_dir: str | None = None
    concepts: EndpointSetting = EndpointSetting()
    inpaint: EndpointSetting = EndpointSetting()
    segment: EndpointSetting = EndpointSetting()

    def __post_init__(self):
        if self.mode not in MODES:
            raise AdapterConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "replay" and not self.fixture_dir:
            raise AdapterConfigError("replay mode needs fixture_dir")
        if self.mode == "record" and not self.fixture_dir:
            raise AdapterConfigError("record mode needs fixture_dir")

    def endpoint(self, name: str) -> EndpointSetting:
        return getattr(self, name)


def config_from_dict(doc: dict) -> AdapterConfig:
    endpoints = doc.get("endpoints", {})
    unknown = set(endpoints) - set(ENDPOINTS)
    if unknown:
        raise AdapterConfigError(f"unknown endpoints {sorted(unknown)}")

    def setting(name):
        entry = endpoints.get(name, {})
        return EndpointSetting(model=entry.get("model"), settings=dict(entry.get("settings", {})))

    return AdapterConfig(
        mode=doc.get("mode", "replay"),
        fixture_dir=doc.get("fixture_dir"),
        concepts=setting("concepts"),
        inpaint=setting("inpaint"),
        segment=setting("segment"),
    )


def load_config(path) -> AdapterConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
