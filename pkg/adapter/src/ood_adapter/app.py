"""FastAPI service implementing the model-backend wire contract.

Request validation (schema and semantic) runs before any mode dispatch, so
live, record, and replay behave identically at the schema level. Requests
are hashed from the raw parsed body, keeping fixture keys faithful to what
the client actually sent.
"""

from __future__ import annotations

import base64
import io
import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel, ValidationError

from .config import ENDPOINTS, AdapterConfig
from .fixtures import FixtureStore
from .hooks import HookError, resolve_hook

logger = logging.getLogger(__name__)


class ConceptsRequest(BaseModel):
    id_labels: list[str]
    query_label: str
    num: int


class InpaintRequest(BaseModel):
    image: str
    box: list[float]
    prompt: str
    seed: int


class SegmentRequest(BaseModel):
    image: str
    box_prompt: list[float]


_SCHEMAS = {"concepts": ConceptsRequest, "inpaint": InpaintRequest, "segment": SegmentRequest}


class _RequestProblem(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _image_size(field: str, encoded) -> tuple:
    if not isinstance(encoded, str):
        raise _RequestProblem(field, "must be a base64 string")
    try:
        data = base64.b64decode(encoded, validate=True)
    except Exception as exc:
        raise _RequestProblem(field, f"invalid base64: {exc}")
    try:
        with Image.open(io.BytesIO(data)) as img:
            return img.size
    except Exception as exc:
        raise _RequestProblem(field, f"not a decodable image: {exc}")


def _check_box(field: str, box, width: int, height: int) -> None:
    if len(box) != 4:
        raise _RequestProblem(field, "must be [x, y, w, h]")
    x, y, w, h = box
    if w <= 0 or h <= 0:
        raise _RequestProblem(field, "box extents must be positive")
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise _RequestProblem(field, f"box outside image {width}x{height}")


def _validate(endpoint: str, body: dict) -> None:
    try:
        _SCHEMAS[endpoint].model_validate(body)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(part) for part in first["loc"]) or endpoint
        raise _RequestProblem(path, first["msg"])
    extra = set(body) - set(_SCHEMAS[endpoint].model_fields)
    if extra:
        raise _RequestProblem(sorted(extra)[0], "unknown field")
    if endpoint == "concepts":
        if body["num"] < 1:
            raise _RequestProblem("num", "must be >= 1")
        if not body["query_label"]:
            raise _RequestProblem("query_label", "must be non-empty")
    elif endpoint == "inpaint":
        width, height = _image_size("image", body["image"])
        _check_box("box", body["box"], width, height)
    elif endpoint == "segment":
        width, height = _image_size("image", body["image"])
        _check_box("box_prompt", body["box_prompt"], width, height)


def create_app(config: AdapterConfig) -> FastAPI:
    app = FastAPI(title="oodsynth model-backend adapter")
    store = FixtureStore(config.fixture_dir) if config.fixture_dir else None
    hooks = {}
    if config.mode in ("live", "record"):
        for name in ENDPOINTS:
            setting = config.endpoint(name)
            if setting.model:
                hooks[name] = (resolve_hook(name, setting.model), setting.settings)

    def handle(endpoint: str, body: dict) -> Response:
        try:
            _validate(endpoint, body)
        except _RequestProblem as exc:
            return _error(400, "validation_error", f"{exc.field}: {exc}")

        if config.mode == "replay":
            recorded = store.lookup(endpoint, body)
            if recorded is None:
                return _error(404, "no_fixture", f"no fixture recorded for this {endpoint} request")
            return Response(content=recorded, media_type="application/json")

        if endpoint not in hooks:
            return _error(501, "unimplemented", f"endpoint {endpoint} has no configured model")
        hook, settings = hooks[endpoint]
        try:
            response = hook(body, settings)
        except HookError as exc:
            return _error(502, "backend_error", str(exc))
        except Exception as exc:
            logger.exception("hook failure on %s", endpoint)
            return _error(502, "backend_error", f"{type(exc).__name__}: {exc}")

        if config.mode == "record":
            return Response(content=store.save(endpoint, body, response),
                            media_type="application/json")
        return JSONResponse(content=response)

    def register(endpoint: str):
        async def route(request: Request):
            try:
                body = json.loads(await request.body())
            except json.JSONDecodeError as exc:
                return _error(400, "validation_error", f"body: not valid JSON: {exc}")
            if not isinstance(body, dict):
                return _error(400, "validation_error", "body: must be a JSON object")
            return handle(endpoint, body)

        app.add_api_route(f"/v1/{endpoint}", route, methods=["POST"], name=endpoint)

    for name in ENDPOINTS:
        register(name)

    @app.get("/healthz")
    async def health():
        return {"mode": config.mode}

    return app
