"""Model hooks: callables mapping a wire-form request dict to a wire-form
response dict.

"stub" resolves to the deterministic CPU built-ins below, useful for fixture
recording and smoke runs. Real integrations (a diffusion inpainter, a
segmentation model, an LLM client) are referenced as "package.module:callable"
and imported at startup; the endpoint's generation settings dict is passed as
the second argument.
"""

from __future__ import annotations

import base64
import importlib
import io

import numpy as np
from PIL import Image

from .config import AdapterConfigError


class HookError(RuntimeError):
    """Raised by hooks on model failure; surfaces as 502 backend_error."""


_STYLES = ("miniature", "inflatable", "wooden", "clay", "paper",
           "origami", "plush", "chrome", "woven", "marble")


def stub_concepts(request: dict, settings: dict) -> dict:
    label = request["query_label"]
    num = request["num"]
    out = []
    for i in range(num):
        style = _STYLES[i % len(_STYLES)]
        suffix = "" if i < len(_STYLES) else f" {i // len(_STYLES) + 1}"
        out.append(f"{style} {label}{suffix}")
    return {"concepts": out}


def _decode_png(encoded: str) -> np.ndarray:
    data = base64.b64decode(encoded)
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB")).copy()


def _encode_png(arr: np.ndarray) -> str:
    out = io.BytesIO()
    Image.fromarray(arr, "RGB").save(out, format="PNG")
    return base64.b64encode(out.getvalue()).decode("ascii")


def _int_bounds(box, width, height):
    x, y, w, h = box
    x0 = max(0, int(np.floor(x)))
    y0 = max(0, int(np.floor(y)))
    x1 = min(width, int(np.ceil(x + w)))
    y1 = min(height, int(np.ceil(y + h)))
    return x0, y0, x1, y1


def stub_inpaint(request: dict, settings: dict) -> dict:
    arr = _decode_png(request["image"])
    height, width = arr.shape[:2]
    x0, y0, x1, y1 = _int_bounds(request["box"], width, height)
    arr[y0:y1, x0:x1] = 255 - arr[y0:y1, x0:x1]  # deterministic edit
    return {"image": _encode_png(arr)}


def _rle_encode(mask: np.ndarray) -> dict:
    """Column-major uncompressed RLE, background count first."""
    height, width = mask.shape
    flat = mask.T.reshape(-1)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"width": int(width), "height": int(height), "runs": [int(r) for r in runs]}


def stub_segment(request: dict, settings: dict) -> dict:
    encoded = request["image"]
    data = base64.b64decode(encoded)
    with Image.open(io.BytesIO(data)) as img:
        width, height = img.size
    mask = np.zeros((height, width), dtype=bool)
    x0, y0, x1, y1 = _int_bounds(request["box_prompt"], width, height)
    mask[y0:y1, x0:x1] = True
    return {"masks": [{"rle": _rle_encode(mask), "score": 0.9}]}


_STUBS = {"concepts": stub_concepts, "inpaint": stub_inpaint, "segment": stub_segment}


def resolve_hook(endpoint: str, model: str):
    """Turn a model spec into a callable; import failures are startup errors."""
    if model == "stub":
        return _STUBS[endpoint]
    if ":" not in model:
        raise AdapterConfigError(
            f"endpoint {endpoint}: model must be 'stub' or 'module:callable', got {model!r}"
        )
    module_name, attr = model.split(":", 1)
    try:
        module = importlib.import_module(module_name)
        return getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise AdapterConfigError(f"endpoint {endpoint}: cannot load {model!r}: {exc}") from exc
