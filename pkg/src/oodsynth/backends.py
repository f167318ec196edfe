"""Model-backend wire contract, deterministic mocks, and the HTTP client.

Three endpoint roles exist: concepts (language model), inpaint (region
editing), segment (box-prompted instance masks). Requests and responses are
JSON on the wire; in process, images travel as raw PNG bytes and masks as
``geometry.Mask``. The canonical wire encoding (sorted-key JSON, base64
images) is also the byte string mocks and replay fixtures hash, so a request
has exactly one identity everywhere.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .errors import ArgumentError, ConfigError, ProtocolError, TransportError
from .geometry import Box, Mask, box_to_mask
from .seeds import derive_seed

ENDPOINT_PATHS = {
    "concepts": "/v1/concepts",
    "inpaint": "/v1/inpaint",
    "segment": "/v1/segment",
}


@dataclass(frozen=True)
class BackendEndpointConfig:
    base_url: str = "http://127.0.0.1:8080"
    timeout: float = 30.0
    retry_budget: int = 3
    auth_token_env: str = ""
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0:
            raise ArgumentError("timeout must be > 0")
        if self.retry_budget < 0:
            raise ArgumentError("retry_budget must be >= 0")


@dataclass(frozen=True)
class MaskCandidate:
    mask: Mask
    score: float


# --- wire encoding -----------------------------------------------------------


def _box_list(box) -> list:
    if isinstance(box, Box):
        return box.to_list()
    return Box.from_list(box).to_list()


def to_wire(endpoint: str, request: dict) -> dict:
    """In-process request -> JSON-ready wire body."""
    if endpoint == "concepts":
        return {
            "id_labels": list(request["id_labels"]),
            "query_label": request["query_label"],
            "num": int(request["num"]),
        }
    if endpoint == "inpaint":
        return {
            "image": base64.b64encode(request["image"]).decode("ascii"),
            "box": _box_list(request["box"]),
            "prompt": request["prompt"],
            "seed": int(request["seed"]),
        }
    if endpoint == "segment":
        return {
            "image": base64.b64encode(request["image"]).decode("ascii"),
            "box_prompt": _box_list(request["box_prompt"]),
        }
    raise ArgumentError(f"unknown endpoint {endpoint!r}")


def canonical_request_bytes(endpoint: str, wire_body: dict) -> bytes:
    """The one canonical byte identity of a request; mocks and replay
    fixtures both hash this."""
    payload = json.dumps(wire_body, sort_keys=True, separators=(",", ":"))
    return f"{endpoint}\n{payload}".encode("utf-8")


def request_hash(endpoint: str, wire_body: dict) -> str:
    return hashlib.sha256(canonical_request_bytes(endpoint, wire_body)).hexdigest()


def mask_to_wire(mask: Mask) -> dict:
    return {"width": mask.width, "height": mask.height, "runs": list(mask.runs)}


def mask_from_wire(doc: dict) -> Mask:
    try:
        return Mask(int(doc["width"]), int(doc["height"]), tuple(doc["runs"]))
    except (KeyError, TypeError, ArgumentError) as exc:
        raise ProtocolError(f"malformed RLE mask in response: {exc}") from exc


# --- response validation (shared by HTTP client and contract suite) ----------


def _png_size(data: bytes):
    try:
        with Image.open(io.BytesIO(data)) as img:
            return img.size
    except Exception as exc:
        raise ProtocolError(f"response image does not decode: {exc}") from exc


def validate_inpaint_response(request: dict, image_bytes: bytes) -> bytes:
    if _png_size(image_bytes) != _png_size(request["image"]):
        raise ProtocolError("inpaint response dimensions differ from request image")
    return image_bytes


def validate_segment_response(masks) -> list:
    for cand in masks:
        if not (0.0 <= cand.score <= 1.0):
            raise ProtocolError(f"mask score {cand.score} outside [0, 1]")
    return list(masks)


# --- deterministic in-process mocks ------------------------------------------

_FALLBACK_STYLES = (
    "miniature", "inflatable", "wooden", "clay", "paper",
    "origami", "plush", "chrome", "woven", "marble",
)

DEFAULT_CONCEPT_TABLES = {
    "person": ("mannequin", "sculpture", "scarecrows", "doll", "puppet"),
}


@dataclass(frozen=True)
class MockWorld:
    """Knobs for the offline backends; every output is a pure function of
    (seed, canonical request bytes)."""

    seed: int = 0
    concept_tables: dict = field(default_factory=dict)
    concept_failure_rate: float = 0.0
    inpaint_failure_rate: float = 0.0
    inpaint_texture_cells: int = 6
    segment_jitter: float = 0.0
    segment_shrink: float = 0.25
    segment_failure_rate: float = 0.0
    segment_empty_rate: float = 0.0


class MockBackend:
    """Offline stand-in for all three endpoint roles."""

    def __init__(self, world: MockWorld):
        self.world = world

    def _rng(self, endpoint: str, wire_body: dict) -> np.random.Generator:
        digest = request_hash(endpoint, wire_body)
        return np.random.default_rng(derive_seed(self.world.seed, endpoint, digest))

    def _maybe_fail(self, rng, rate: float, endpoint: str):
        if rate > 0 and rng.random() < rate:
            raise TransportError(f"mock {endpoint} backend transport failure (injected)")

    def concepts(self, request: dict) -> dict:
        wire = to_wire("concepts", request)
        if wire["num"] < 1:
            raise ProtocolError("num must be >= 1")
        if not wire["query_label"]:
            raise ProtocolError("query_label must be non-empty")
        rng = self._rng("concepts", wire)
        self._maybe_fail(rng, self.world.concept_failure_rate, "concepts")
        label = wire["query_label"]
        tables = {**DEFAULT_CONCEPT_TABLES, **self.world.concept_tables}
        table = tables.get(label)
        if table:
            out = [table[i % len(table)] for i in range(wire["num"])]
        else:
            out = []
            for i in range(wire["num"]):
                style = _FALLBACK_STYLES[i % len(_FALLBACK_STYLES)]
                suffix = "" if i < len(_FALLBACK_STYLES) else f" {i // len(_FALLBACK_STYLES) + 1}"
                out.append(f"{style} {label}{suffix}")
        return {"concepts": out}

    def inpaint(self, request: dict) -> dict:
        wire = to_wire("inpaint", request)
        rng = self._rng("inpaint", wire)
        self._maybe_fail(rng, self.world.inpaint_failure_rate, "inpaint")
        with Image.open(io.BytesIO(request["image"])) as img:
            img = img.convert("RGB")
            width, height = img.size
            box = Box.from_list(wire["box"])
            if not box.fits_in(width, height):
                raise ProtocolError(f"box {wire['box']} outside image {width}x{height}")
            x0, y0, x1, y1 = box.pixel_bounds(width, height)

            # Coarse random texture across the editing region.
            cells = max(1, self.world.inpaint_texture_cells)
            grid = rng.integers(0, 256, size=(cells, cells, 3), dtype=np.uint8)
            texture = Image.fromarray(grid, "RGB").resize(
                (max(1, x1 - x0), max(1, y1 - y0)), Image.NEAREST
            )
            img.paste(texture, (x0, y0))

            # Pseudo-object blob; its extent is a perturbation of the box and
            # may spill outside it, which the orchestrator's clamp removes.
            cx = (x0 + x1) / 2 + (rng.random() - 0.5) * 0.4 * (x1 - x0)
            cy = (y0 + y1) / 2 + (rng.random() - 0.5) * 0.4 * (y1 - y0)
            rx = (x1 - x0) / 2 * (0.5 + rng.random() * 0.8)
            ry = (y1 - y0) / 2 * (0.5 + rng.random() * 0.8)
            color = tuple(int(v) for v in rng.integers(0, 256, size=3))
            draw = ImageDraw.Draw(img)
            draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=color)

            out = io.BytesIO()
            img.save(out, format="PNG")
        return {"image": out.getvalue()}

    def segment(self, request: dict) -> dict:
        wire = to_wire("segment", request)
        rng = self._rng("segment", wire)
        self._maybe_fail(rng, self.world.segment_failure_rate, "segment")
        width, height = _png_size(request["image"])
        prompt = Box.from_list(wire["box_prompt"])
        if not prompt.fits_in(width, height):
            raise ProtocolError(f"box_prompt {wire['box_prompt']} outside image {width}x{height}")
        if self.world.segment_empty_rate > 0 and rng.random() < self.world.segment_empty_rate:
            return {"masks": []}

        # Jitter units are drawn from the request identity only, so sweeping
        # the magnitude moves every mask along a continuous trajectory.
        ux, uy = rng.uniform(-1.0, 1.0, size=2)
        u_shrink = rng.random()
        u_score = rng.random()
        m = self.world.segment_jitter
        scale = 1.0 - min(0.9, m * u_shrink * self.world.segment_shrink)
        cx = prompt.x + prompt.w / 2 + m * ux * prompt.w
        cy = prompt.y + prompt.h / 2 + m * uy * prompt.h
        w = prompt.w * scale
        h = prompt.h * scale
        x0 = max(0.0, cx - w / 2)
        y0 = max(0.0, cy - h / 2)
        x1 = min(float(width), cx + w / 2)
        y1 = min(float(height), cy + h / 2)
        if x1 - x0 < 1.0 or y1 - y0 < 1.0:
            return {"masks": []}
        mask = box_to_mask(Box(x0, y0, x1 - x0, y1 - y0), width, height)
        score = 0.3 + 0.7 * u_score
        return {"masks": [MaskCandidate(mask=mask, score=float(score))]}


# --- retry wrapper ------------------------------------------------------------


class RetryingBackend:
    """Retries transport failures with exponential backoff; protocol errors
    are never retried."""

    def __init__(self, inner, retry_budget: int = 3, backoff_base: float = 0.5,
                 seed: int = 0, sleep_fn=time.sleep):
        self.inner = inner
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self._rng = np.random.default_rng(derive_seed(seed, "backoff"))
        self._sleep = sleep_fn

    def _call(self, name: str, request: dict):
        attempts = self.retry_budget + 1
        for attempt in range(attempts):
            try:
                return getattr(self.inner, name)(request)
            except TransportError:
                if attempt == attempts - 1:
                    raise
                delay = self.backoff_base * (2 ** attempt) * (0.5 + self._rng.random())
                if delay > 0:
                    self._sleep(delay)

    def concepts(self, request: dict) -> dict:
        return self._call("concepts", request)

    def inpaint(self, request: dict) -> dict:
        return self._call("inpaint", request)

    def segment(self, request: dict) -> dict:
        return self._call("segment", request)


# --- HTTP client ---------------------------------------------------------------


class HttpBackend:
    """requests-based client for a service implementing the wire contract."""

    def __init__(self, config: BackendEndpointConfig, seed: int = 0, sleep_fn=time.sleep):
        import requests

        self._requests = requests
        self.config = config
        self._session = requests.Session()
        self._rng = np.random.default_rng(derive_seed(seed, "http-backoff"))
        self._sleep = sleep_fn

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_token_env:
            token = os.environ.get(self.config.auth_token_env)
            if token is None:
                raise ConfigError(
                    f"auth token env var {self.config.auth_token_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, endpoint: str, wire_body: dict) -> dict:
        url = self.config.base_url.rstrip("/") + ENDPOINT_PATHS[endpoint]
        attempts = self.config.retry_budget + 1
        for attempt in range(attempts):
            try:
                response = self._session.post(
                    url, json=wire_body, headers=self._headers(), timeout=self.config.timeout
                )
            except self._requests.exceptions.RequestException as exc:
                if attempt == attempts - 1:
                    raise TransportError(f"{endpoint}: {exc}") from exc
                self._backoff(attempt)
                continue
            if response.status_code >= 500:
                if attempt == attempts - 1:
                    raise TransportError(
                        f"{endpoint}: server error {response.status_code}: {response.text[:200]}"
                    )
                self._backoff(attempt)
                continue
            if response.status_code >= 400:
                raise ProtocolError(self._error_detail(endpoint, response))
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{endpoint}: response body is not JSON") from exc
        raise TransportError(f"{endpoint}: retry budget exhausted")  # unreachable

    def _backoff(self, attempt: int) -> None:
        delay = self.config.backoff_base * (2 ** attempt) * (0.5 + self._rng.random())
        if delay > 0:
            self._sleep(delay)

    @staticmethod
    def _error_detail(endpoint: str, response) -> str:
        try:
            body = response.json()
            return f"{endpoint}: {body.get('code', 'error')}: {body.get('message', '')}"
        except ValueError:
            return f"{endpoint}: HTTP {response.status_code}"

    def concepts(self, request: dict) -> dict:
        body = self._post("concepts", to_wire("concepts", request))
        concepts = body.get("concepts")
        if not isinstance(concepts, list) or not all(isinstance(c, str) for c in concepts):
            raise ProtocolError("concepts: body must carry a list of strings under 'concepts'")
        return {"concepts": concepts}

    def inpaint(self, request: dict) -> dict:
        body = self._post("inpaint", to_wire("inpaint", request))
        encoded = body.get("image")
        if not isinstance(encoded, str):
            raise ProtocolError("inpaint: body must carry a base64 string under 'image'")
        try:
            image = base64.b64decode(encoded, validate=True)
        except Exception as exc:
            raise ProtocolError(f"inpaint: image is not valid base64: {exc}") from exc
        return {"image": validate_inpaint_response(request, image)}

    def segment(self, request: dict) -> dict:
        body = self._post("segment", to_wire("segment", request))
        raw = body.get("masks")
        if not isinstance(raw, list):
            raise ProtocolError("segment: body must carry a list under 'masks'")
        masks = []
        for entry in raw:
            if not isinstance(entry, dict) or "rle" not in entry or "score" not in entry:
                raise ProtocolError("segment: each mask needs 'rle' and 'score'")
            masks.append(MaskCandidate(mask=mask_from_wire(entry["rle"]), score=float(entry["score"])))
        return {"masks": validate_segment_response(masks)}
