"""Record/replay fixture store.

A request's identity is sha256("{endpoint}\\n" + canonical JSON) where the
canonical form is sorted-key, separator-free; this matches the documented
wire convention, so any conforming client hits the same fixture regardless of
its own JSON formatting. The recorded response is stored as a canonical JSON
string and replayed byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def request_key(endpoint: str, request: dict) -> str:
    material = f"{endpoint}\n{canonical_json(request)}".encode("utf-8")
    return hashlib.sha256(material).hexdigest()


class FixtureStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def lookup(self, endpoint: str, request: dict) -> bytes | None:
        """Recorded response bytes for this request, or None."""
        path = self._path(request_key(endpoint, request))
        if not path.exists():
            return None
        doc = json.loads(path.read_text(encoding="utf-8"))
        return doc["response_json"].encode("utf-8")

    def save(self, endpoint: str, request: dict, response: dict) -> bytes:
        key = request_key(endpoint, request)
        body = canonical_json(response)
        doc = {"endpoint": endpoint, "request": request, "response_json": body}
        self._path(key).write_text(canonical_json(doc) + "\n", encoding="utf-8")
        self._update_index(key, endpoint)
        return body.encode("utf-8")

    def _update_index(self, key: str, endpoint: str) -> None:
        index_path = self.root / "index.json"
        index = {}
        if index_path.exists():
            index = json.loads(index_path.read_text(encoding="utf-8"))
        index[key] = endpoint
        index_path.write_text(json.dumps(index, sort_keys=True, indent=1) + "\n",
                              encoding="utf-8")
