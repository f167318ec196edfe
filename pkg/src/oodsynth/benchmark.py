"""Controlled synthetic worlds for offline runs.

Two generators: Gaussian feature clusters (training/eval at desk scale) and
procedural scene images (exercise the full mock pipeline). Both emit the
exact formats the real pipeline consumes. A deterministic patch-projection
extractor stands in for the external detector when the pipeline runs against
mock backends.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .dataset import IdObjectRecord
from .errors import ArgumentError
from .features import KIND_EDIT, KIND_ID, FeatureRecord, write_feature_archive
from .geometry import Box
from .seeds import derive_seed
from .synthesis import STATUS_REFINED, EditRecord, SynthesisJob, write_edit_manifest

CONTAMINATION_OFFSET = 0.15  # orthogonal offset -> cosine 1/sqrt(1.0225) ~ 0.989


@dataclass(frozen=True)
class SyntheticSpec:
    feature_dim: int = 16
    n_id: int = 500
    n_ood: int = 500
    mean_radius: float = 8.0
    id_scale: float = 1.0
    ood_scale: float = 1.0
    separation: float = 6.0
    contamination: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 2:
            raise ArgumentError("feature_dim must be >= 2")
        if self.n_id < 1 or self.n_ood < 1:
            raise ArgumentError("n_id and n_ood must be >= 1")
        if self.separation < 0:
            raise ArgumentError("separation must be >= 0")
        if not (0.0 <= self.contamination <= 1.0):
            raise ArgumentError("contamination must be in [0, 1]")


def sample_feature_world(spec: SyntheticSpec):
    """Draw the clusters in memory.

    Returns (id_matrix, edit_matrix, pair_index, contaminated_mask). Edited
    feature i pairs with ID feature pair_index[i]; contaminated entries are
    near-duplicates of their ID partner with cosine similarity above 0.95.
    """
    rng = np.random.default_rng(derive_seed(spec.seed, "feature-world"))
    d = spec.feature_dim
    mean_id = np.zeros(d)
    mean_id[0] = spec.mean_radius
    mean_ood = mean_id.copy()
    mean_ood[1] += spec.separation * spec.ood_scale

    id_matrix = mean_id + spec.id_scale * rng.standard_normal((spec.n_id, d))
    edit_matrix = mean_ood + spec.ood_scale * rng.standard_normal((spec.n_ood, d))
    pair_index = np.arange(spec.n_ood) % spec.n_id

    contaminated = np.zeros(spec.n_ood, dtype=bool)
    n_contaminated = round(spec.contamination * spec.n_ood)
    if n_contaminated:
        chosen = rng.choice(spec.n_ood, size=n_contaminated, replace=False)
        contaminated[chosen] = True
        for i in chosen:
            base = id_matrix[pair_index[i]]
            direction = rng.standard_normal(d)
            direction -= direction.dot(base) / base.dot(base) * base
            norm = np.linalg.norm(direction)
            if norm == 0.0:  # vanishing odds, but stay deterministic
                direction = np.zeros(d)
                direction[-1] = 1.0
                norm = 1.0
            edit_matrix[i] = base + CONTAMINATION_OFFSET * np.linalg.norm(base) * direction / norm
    return id_matrix, edit_matrix, pair_index, contaminated


def generate_feature_world(spec: SyntheticSpec, out_dir):
    """Write (id archive, edit archive, pair manifest) under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    id_matrix, edit_matrix, pair_index, _ = sample_feature_world(spec)

    placeholder = Box(0.0, 0.0, 10.0, 10.0)
    id_records = [
        FeatureRecord(record_id=i, image_id=i, box=placeholder, label_id=0,
                      kind=KIND_ID, vector=id_matrix[i])
        for i in range(spec.n_id)
    ]
    edit_records = [
        FeatureRecord(record_id=i, image_id=int(pair_index[i]), box=placeholder, label_id=0,
                      kind=KIND_EDIT, vector=edit_matrix[i])
        for i in range(spec.n_ood)
    ]
    id_path = out_dir / "id_features.synf"
    edit_path = out_dir / "edit_features.synf"
    write_feature_archive(id_path, id_records, spec.feature_dim)
    write_feature_archive(edit_path, edit_records, spec.feature_dim)

    edits = []
    for i in range(spec.n_ood):
        source = IdObjectRecord(
            record_id=int(pair_index[i]), image_id=int(pair_index[i]), image_path="",
            box=placeholder, label_id=0, image_width=10, image_height=10,
        )
        job = SynthesisJob(source=source, concept="synthetic outlier", concept_index=0,
                           seed=derive_seed(spec.seed, "pair", i))
        edits.append(EditRecord(edit_id=i, job=job, edited_image_path="",
                                edit_mask_box=placeholder, status=STATUS_REFINED,
                                refined_box=placeholder, measured_iou=1.0))
    manifest_path = out_dir / "pairs.jsonl"
    write_edit_manifest(manifest_path, edits)
    return id_path, edit_path, manifest_path


# --- procedural image world ---------------------------------------------------

IMAGE_WORLD_LABELS = ("block", "disc", "bar")
IMAGE_SIZE = 128


def _draw_scene(rng: np.random.Generator, label: str):
    """One 128x128 scene with a single labeled object; returns (image, box)."""
    top = rng.integers(0, 90, size=3)
    bottom = top + rng.integers(60, 160, size=3)
    column = np.linspace(0.0, 1.0, IMAGE_SIZE)[:, None]
    background = (top[None, None, :] * (1 - column[..., None])
                  + bottom[None, None, :] * column[..., None])
    noise = rng.normal(0.0, 6.0, size=(IMAGE_SIZE, IMAGE_SIZE, 1))
    arr = np.clip(background + noise, 0, 255).astype(np.uint8)
    img = Image.fromarray(arr, "RGB")
    draw = ImageDraw.Draw(img)

    if label == "bar":
        w = int(rng.integers(48, 85))
        h = int(rng.integers(36, 49))
    else:
        w = int(rng.integers(36, 73))
        h = int(rng.integers(36, 73))
    x = int(rng.integers(4, IMAGE_SIZE - w - 4))
    y = int(rng.integers(4, IMAGE_SIZE - h - 4))
    color = tuple(int(v) for v in rng.integers(100, 256, size=3))
    outline = tuple(int(v) for v in rng.integers(0, 80, size=3))
    if label == "disc":
        draw.ellipse([x, y, x + w - 1, y + h - 1], fill=color, outline=outline, width=2)
    else:
        draw.rectangle([x, y, x + w - 1, y + h - 1], fill=color, outline=outline, width=2)
    return img, Box(float(x), float(y), float(w), float(h))


def generate_image_world(n_images: int, seed: int, out_dir):
    """Procedural dataset directory: images/ plus COCO-style annotations.json."""
    if n_images < 1:
        raise ArgumentError("n_images must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    images, annotations = [], []
    for i in range(n_images):
        rng = np.random.default_rng(derive_seed(seed, "image", i))
        label = IMAGE_WORLD_LABELS[i % len(IMAGE_WORLD_LABELS)]
        img, box = _draw_scene(rng, label)
        file_name = f"images/im_{i:05d}.png"
        img.save(out_dir / file_name, format="PNG")
        images.append({"id": i, "file_name": file_name,
                       "width": IMAGE_SIZE, "height": IMAGE_SIZE})
        annotations.append({"id": i, "image_id": i, "bbox": box.to_list(),
                            "category_id": 1 + IMAGE_WORLD_LABELS.index(label)})
    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1 + k, "name": name} for k, name in enumerate(IMAGE_WORLD_LABELS)],
    }
    path = out_dir / "annotations.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")
    return path


# --- stand-in feature extractor -------------------------------------------------

_PROJECTION_CACHE = {}
_PATCH_SIDE = 8


def _projection(dim: int, seed: int) -> np.ndarray:
    key = (dim, seed)
    if key not in _PROJECTION_CACHE:
        rng = np.random.default_rng(derive_seed(seed, "patch-projection"))
        side = _PATCH_SIDE * _PATCH_SIDE + 1
        _PROJECTION_CACHE[key] = rng.standard_normal((dim, side)) / np.sqrt(side)
    return _PROJECTION_CACHE[key]


def extract_patch_features(image_path, box: Box, dim: int, seed: int) -> np.ndarray:
    """Deterministic detector stand-in.

    The pooled grayscale patch is mean-centered and unit-normalized so the
    pairwise cosine reads pattern agreement, not shared brightness; a unit
    constant channel keeps the norm positive and puts unrelated content near
    the middle of the similarity range instead of zero. A fixed random
    projection mixes everything down to the archive dimension.
    """
    with Image.open(image_path) as img:
        gray = img.convert("L")
        x0, y0, x1, y1 = box.pixel_bounds(*gray.size)
        patch = gray.crop((x0, y0, x1, y1)).resize((_PATCH_SIDE, _PATCH_SIDE), Image.BILINEAR)
    flat = np.asarray(patch, dtype=np.float64).ravel() / 255.0
    centered = flat - flat.mean()
    norm = np.linalg.norm(centered)
    if norm > 1e-9:
        centered = centered / norm
    return _projection(dim, seed) @ np.concatenate([centered, [1.0]])
