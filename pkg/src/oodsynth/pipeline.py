"""Stage orchestration: one JSON config, one seed, content-addressed artifacts.

Each stage writes its outputs plus a marker file carrying the stage
fingerprint. Fingerprints chain: a stage's fingerprint hashes its own knobs
together with its upstream fingerprint, so changing any knob invalidates
exactly the stages downstream of it. Output locations are excluded from the
hash; two runs of one config into different roots produce byte-identical
artifacts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import benchmark
from .backends import BackendEndpointConfig, HttpBackend, MockBackend, MockWorld
from .concepts import ConceptConfig, ConceptMap, imagine_concepts, load_forbidden_terms
from .dataset import CandidatePolicy, load_annotations, select_edit_candidates, write_record_manifest
from .detector import TrainConfig, init_model, load_checkpoint, save_checkpoint, save_loss_curve, train
from .errors import ConfigError, MissingArtifactError
from .evaluation import EvalReport, evaluate, write_report_csv, write_report_json
from .features import (
    KIND_EDIT,
    KIND_ID,
    FeatureRecord,
    FilterConfig,
    apply_filter_statuses,
    pair_features,
    read_feature_archive,
    write_feature_archive,
)
from .refine import RefineConfig, bypass_refinement, refine_boxes
from .seeds import derive_seed
from .synthesis import (
    STATUS_ACCEPTED,
    plan_jobs,
    read_edit_manifest,
    resolve_edit_path,
    run_synthesis,
    write_edit_manifest,
)

logger = logging.getLogger(__name__)

STAGES = ("imagine", "synthesize", "refine", "pair_filter", "train", "evaluate")

_MOCK_FIELDS = {f.name for f in dataclasses.fields(MockWorld) if f.name != "concept_tables"}


@dataclass(frozen=True)
class PipelineConfig:
    dataset_annotations: str
    output_root: str
    seed: int = 0
    backend_kind: str = "mock"
    concurrency: int = 4
    mock: dict = dataclasses.field(default_factory=dict)
    http: dict = dataclasses.field(default_factory=dict)
    concepts_per_label: int = 5
    concept_retry_budget: int = 3
    forbidden_terms_file: str | None = None
    min_box_area: float = 1024.0
    max_relative_area: float = 0.8
    max_edits_per_image: int = 2
    budget: int = 4000
    synthesis_retry_budget: int = 3
    prompt_template: str = "a {concept}"
    refine_enabled: bool = True
    refine_padding: float = 0.1
    iou_threshold: float = 0.5
    filter_enabled: bool = True
    eps_low: float = 0.4
    eps_up: float = 0.9
    feature_dim: int = 16
    extractor_seed: int = 0
    id_archive: str | None = None
    edit_archive: str | None = None
    pair_manifest: str | None = None
    eval_id_archive: str | None = None
    eval_edit_archive: str | None = None
    learning_rate: float = 1e-4
    momentum: float = 0.9
    dropout: float = 0.5
    batch_size: int = 32
    epochs: int = 30
    hidden: tuple = (512, 128)

    # -- sub-config views ---------------------------------------------------

    def mock_world(self) -> MockWorld:
        return MockWorld(**self.mock)

    def endpoint_config(self) -> BackendEndpointConfig:
        return BackendEndpointConfig(**self.http)

    def candidate_policy(self) -> CandidatePolicy:
        return CandidatePolicy(self.min_box_area, self.max_relative_area,
                               self.max_edits_per_image)

    def concept_config(self) -> ConceptConfig:
        forbidden = frozenset()
        if self.forbidden_terms_file:
            forbidden = load_forbidden_terms(self.forbidden_terms_file)
        return ConceptConfig(self.concepts_per_label, forbidden, self.concept_retry_budget)

    def refine_config(self) -> RefineConfig:
        return RefineConfig(self.refine_padding, self.iou_threshold)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(self.eps_low, self.eps_up)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.momentum, self.dropout,
                           self.batch_size, self.epochs,
                           seed=derive_seed(self.seed, "train"))

    def archives_only(self) -> bool:
        """True when features come from external archives plus a pair manifest,
        so the image stages never run."""
        return bool(self.id_archive and self.edit_archive and self.pair_manifest)

    def build_backend(self):
        if self.backend_kind == "mock":
            return MockBackend(self.mock_world())
        return HttpBackend(self.endpoint_config(), seed=self.seed)


_SCHEMA = {
    "dataset": {"annotations": str},
    "output_root": str,
    "seed": int,
    "backend": {"kind": str, "concurrency": int, "mock": dict, "http": dict},
    "concepts": {"concepts_per_label": int, "retry_budget": int,
                 "forbidden_terms_file": (str, type(None))},
    "candidates": {"min_box_area": (int, float), "max_relative_area": (int, float),
                   "max_edits_per_image": int},
    "synthesis": {"budget": int, "retry_budget": int, "prompt_template": str},
    "refine": {"enabled": bool, "padding": (int, float), "iou_threshold": (int, float)},
    "filter": {"enabled": bool, "eps_low": (int, float), "eps_up": (int, float)},
    "features": {"dim": int, "extractor_seed": int,
                 "id_archive": (str, type(None)), "edit_archive": (str, type(None)),
                 "pair_manifest": (str, type(None)),
                 "eval_id_archive": (str, type(None)), "eval_edit_archive": (str, type(None))},
    "train": {"learning_rate": (int, float), "momentum": (int, float),
              "dropout": (int, float), "batch_size": int, "epochs": int, "hidden": list},
}


def default_config_dict() -> dict:
    return {
        "dataset": {"annotations": ""},
        "output_root": "out",
        "seed": 0,
        "backend": {"kind": "mock", "concurrency": 4, "mock": {"seed": 0}, "http": {}},
        "concepts": {"concepts_per_label": 5, "retry_budget": 3, "forbidden_terms_file": None},
        "candidates": {"min_box_area": 1024.0, "max_relative_area": 0.8,
                       "max_edits_per_image": 2},
        "synthesis": {"budget": 4000, "retry_budget": 3, "prompt_template": "a {concept}"},
        "refine": {"enabled": True, "padding": 0.1, "iou_threshold": 0.5},
        "filter": {"enabled": True, "eps_low": 0.4, "eps_up": 0.9},
        "features": {"dim": 16, "extractor_seed": 0, "id_archive": None, "edit_archive": None,
                     "pair_manifest": None,
                     "eval_id_archive": None, "eval_edit_archive": None},
        "train": {"learning_rate": 1e-4, "momentum": 0.9, "dropout": 0.5,
                  "batch_size": 32, "epochs": 30, "hidden": [512, 128]},
    }


def _merge_defaults(defaults: dict, given: dict, path: str = ""):
    out = {}
    for key, default in defaults.items():
        where = f"{path}.{key}" if path else key
        if key in given:
            value = given[key]
            if isinstance(default, dict) and not where.startswith("backend.mock") \
                    and not where.startswith("backend.http"):
                if not isinstance(value, dict):
                    raise ConfigError(f"{where}: expected an object", field=where)
                out[key] = _merge_defaults(default, value, where)
            else:
                out[key] = value
        else:
            out[key] = default
    for key in given:
        if key not in defaults:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"{where}: unknown config key", field=where)
    return out


def _check_types(schema: dict, doc: dict, path: str = ""):
    for key, kind in schema.items():
        where = f"{path}.{key}" if path else key
        value = doc[key]
        if isinstance(kind, dict):
            _check_types(kind, value, where)
        else:
            if isinstance(value, bool) and kind is int:
                raise ConfigError(f"{where}: expected int, got bool", field=where)
            if not isinstance(value, kind):
                expected = kind.__name__ if isinstance(kind, type) else "/".join(
                    k.__name__ for k in kind)
                raise ConfigError(f"{where}: expected {expected}, "
                                  f"got {type(value).__name__}", field=where)


def config_from_dict(doc: dict) -> PipelineConfig:
    merged = _merge_defaults(default_config_dict(), doc)
    _check_types(_SCHEMA, merged)
    unknown_mock = set(merged["backend"]["mock"]) - _MOCK_FIELDS
    if unknown_mock:
        raise ConfigError(f"backend.mock: unknown keys {sorted(unknown_mock)}",
                          field="backend.mock")
    try:
        config = PipelineConfig(
            dataset_annotations=merged["dataset"]["annotations"],
            output_root=merged["output_root"],
            seed=merged["seed"],
            backend_kind=merged["backend"]["kind"],
            concurrency=merged["backend"]["concurrency"],
            mock=dict(merged["backend"]["mock"]),
            http=dict(merged["backend"]["http"]),
            concepts_per_label=merged["concepts"]["concepts_per_label"],
            concept_retry_budget=merged["concepts"]["retry_budget"],
            forbidden_terms_file=merged["concepts"]["forbidden_terms_file"],
            min_box_area=float(merged["candidates"]["min_box_area"]),
            max_relative_area=float(merged["candidates"]["max_relative_area"]),
            max_edits_per_image=merged["candidates"]["max_edits_per_image"],
            budget=merged["synthesis"]["budget"],
            synthesis_retry_budget=merged["synthesis"]["retry_budget"],
            prompt_template=merged["synthesis"]["prompt_template"],
            refine_enabled=merged["refine"]["enabled"],
            refine_padding=float(merged["refine"]["padding"]),
            iou_threshold=float(merged["refine"]["iou_threshold"]),
            filter_enabled=merged["filter"]["enabled"],
            eps_low=float(merged["filter"]["eps_low"]),
            eps_up=float(merged["filter"]["eps_up"]),
            feature_dim=merged["features"]["dim"],
            extractor_seed=merged["features"]["extractor_seed"],
            id_archive=merged["features"]["id_archive"],
            edit_archive=merged["features"]["edit_archive"],
            pair_manifest=merged["features"]["pair_manifest"],
            eval_id_archive=merged["features"]["eval_id_archive"],
            eval_edit_archive=merged["features"]["eval_edit_archive"],
            learning_rate=float(merged["train"]["learning_rate"]),
            momentum=float(merged["train"]["momentum"]),
            dropout=float(merged["train"]["dropout"]),
            batch_size=merged["train"]["batch_size"],
            epochs=merged["train"]["epochs"],
            hidden=tuple(merged["train"]["hidden"]),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"config rejected: {exc}") from exc
    if config.backend_kind not in ("mock", "http"):
        raise ConfigError("backend.kind must be 'mock' or 'http'", field="backend.kind")
    if not config.dataset_annotations and not config.archives_only():
        raise ConfigError("dataset.annotations is required unless feature archives "
                          "and a pair manifest are given", field="dataset.annotations")
    # Instantiate every sub-config now so bad values fail at load time with a path.
    for field_name, builder in (
        ("candidates", config.candidate_policy),
        ("refine", config.refine_config),
        ("filter", config.filter_config),
        ("train", config.train_config),
        ("backend.mock", config.mock_world),
        ("backend.http", config.endpoint_config),
    ):
        try:
            builder()
        except Exception as exc:
            raise ConfigError(f"{field_name}: {exc}", field=field_name) from exc
    return config


def config_to_dict(config: PipelineConfig) -> dict:
    return {
        "dataset": {"annotations": config.dataset_annotations},
        "output_root": config.output_root,
        "seed": config.seed,
        "backend": {"kind": config.backend_kind, "concurrency": config.concurrency,
                    "mock": dict(config.mock), "http": dict(config.http)},
        "concepts": {"concepts_per_label": config.concepts_per_label,
                     "retry_budget": config.concept_retry_budget,
                     "forbidden_terms_file": config.forbidden_terms_file},
        "candidates": {"min_box_area": config.min_box_area,
                       "max_relative_area": config.max_relative_area,
                       "max_edits_per_image": config.max_edits_per_image},
        "synthesis": {"budget": config.budget, "retry_budget": config.synthesis_retry_budget,
                      "prompt_template": config.prompt_template},
        "refine": {"enabled": config.refine_enabled, "padding": config.refine_padding,
                   "iou_threshold": config.iou_threshold},
        "filter": {"enabled": config.filter_enabled, "eps_low": config.eps_low,
                   "eps_up": config.eps_up},
        "features": {"dim": config.feature_dim, "extractor_seed": config.extractor_seed,
                     "id_archive": config.id_archive, "edit_archive": config.edit_archive,
                     "pair_manifest": config.pair_manifest,
                     "eval_id_archive": config.eval_id_archive,
                     "eval_edit_archive": config.eval_edit_archive},
        "train": {"learning_rate": config.learning_rate, "momentum": config.momentum,
                  "dropout": config.dropout, "batch_size": config.batch_size,
                  "epochs": config.epochs, "hidden": list(config.hidden)},
    }


def load_config(path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse failure at byte {exc.pos}: {exc.msg}") from exc
    return config_from_dict(doc)


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply repeatable --set KEY=VALUE entries (dotted keys, JSON values)."""
    out = json.loads(json.dumps(doc))
    for entry in overrides:
        if "=" not in entry:
            raise ConfigError(f"--set needs KEY=VALUE, got {entry!r}")
        key, raw = entry.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not an object", field=key)
        node[parts[-1]] = value
    return out


# --- fingerprints -----------------------------------------------------------------


def _digest(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def stage_fingerprints(config: PipelineConfig) -> dict:
    """Chained per-stage fingerprints; output_root never participates."""
    doc = config_to_dict(config)
    doc.pop("output_root")
    backend = {k: doc["backend"][k] for k in ("kind", "mock", "http")}
    fp = {}
    fp["imagine"] = _digest({"dataset": doc["dataset"], "backend": backend,
                             "concepts": doc["concepts"], "seed": doc["seed"]})
    fp["synthesize"] = _digest({"upstream": fp["imagine"], "candidates": doc["candidates"],
                                "synthesis": doc["synthesis"]})
    fp["refine"] = _digest({"upstream": fp["synthesize"], "refine": doc["refine"]})
    fp["pair_filter"] = _digest({"upstream": fp["refine"], "features": doc["features"],
                                 "filter": doc["filter"]})
    fp["train"] = _digest({"upstream": fp["pair_filter"], "train": doc["train"]})
    fp["evaluate"] = _digest({"upstream": fp["train"]})
    return fp


def _marker_path(root: Path, stage: str) -> Path:
    return root / f"{stage}.marker.json"


def _read_marker(root: Path, stage: str):
    path = _marker_path(root, stage)
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _require_upstream(root: Path, stage: str, upstream: str, fingerprints: dict) -> None:
    marker = _read_marker(root, upstream)
    if marker is None:
        raise MissingArtifactError(
            f"stage '{stage}' needs artifacts from '{upstream}' which has not run",
            stage=upstream,
        )
    if marker.get("fingerprint") != fingerprints[upstream]:
        raise MissingArtifactError(
            f"stage '{stage}': upstream '{upstream}' artifacts have fingerprint "
            f"{marker.get('fingerprint')}, expected {fingerprints[upstream]}; rerun it",
            stage=upstream,
        )


def _finish(root: Path, stage: str, fingerprint: str, seed: int) -> None:
    payload = {"stage": stage, "fingerprint": fingerprint, "seed": seed}
    _marker_path(root, stage).write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8"
    )


def _fresh(root: Path, stage: str, fingerprint: str, force: bool) -> bool:
    if force:
        return False
    marker = _read_marker(root, stage)
    return marker is not None and marker.get("fingerprint") == fingerprint


def _out_root(config: PipelineConfig) -> Path:
    root = Path(config.output_root)
    root.mkdir(parents=True, exist_ok=True)
    return root


# --- stages -------------------------------------------------------------------------


def run_imagine(config: PipelineConfig, force: bool = False) -> Path:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    out_path = root / "concepts.json"
    if _fresh(root, "imagine", fps["imagine"], force):
        logger.info("imagine: fingerprint unchanged, skipping")
        return out_path
    vocab, _ = load_annotations(config.dataset_annotations)
    backend = config.build_backend()
    concept_map = imagine_concepts(backend, vocab, config.concept_config(),
                                   concurrency=config.concurrency)
    payload = {
        "labels": list(vocab.labels),
        "concepts": {str(lid): concept_map.per_label[lid] for lid in sorted(concept_map.per_label)},
    }
    out_path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    _finish(root, "imagine", fps["imagine"], config.seed)
    return out_path


def _load_concepts(root: Path) -> ConceptMap:
    doc = json.loads((root / "concepts.json").read_text(encoding="utf-8"))
    return ConceptMap({int(k): list(v) for k, v in doc["concepts"].items()})


def run_synthesize(config: PipelineConfig, force: bool = False) -> Path:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    manifest = root / "edits_manifest.jsonl"
    if _fresh(root, "synthesize", fps["synthesize"], force):
        logger.info("synthesize: fingerprint unchanged, skipping")
        return manifest
    _require_upstream(root, "synthesize", "imagine", fps)
    vocab, records = load_annotations(config.dataset_annotations)
    candidates = select_edit_candidates(records, config.candidate_policy())
    write_record_manifest(root / "candidates.jsonl", candidates)
    concept_map = _load_concepts(root)
    jobs = plan_jobs(candidates, concept_map, config.budget, config.seed)
    backend = config.build_backend()
    edits = run_synthesis(jobs, backend, root / "edits", config.seed,
                          concurrency=config.concurrency,
                          retry_budget=config.synthesis_retry_budget,
                          prompt_template=config.prompt_template)
    write_edit_manifest(manifest, edits)
    _finish(root, "synthesize", fps["synthesize"], config.seed)
    return manifest


def run_refine(config: PipelineConfig, force: bool = False) -> Path:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    manifest = root / "refined_manifest.jsonl"
    if _fresh(root, "refine", fps["refine"], force):
        logger.info("refine: fingerprint unchanged, skipping")
        return manifest
    _require_upstream(root, "refine", "synthesize", fps)
    edits = read_edit_manifest(root / "edits_manifest.jsonl")
    if config.refine_enabled:
        backend = config.build_backend()
        refined = refine_boxes(edits, backend, config.refine_config(),
                               concurrency=config.concurrency,
                               images_root=root / "edits")
    else:
        refined = bypass_refinement(edits)
    write_edit_manifest(manifest, refined)
    _finish(root, "refine", fps["refine"], config.seed)
    return manifest


def _mock_extract(config: PipelineConfig, root: Path, edits):
    """Stand-in extraction when no external archives are configured."""
    _, records = load_annotations(config.dataset_annotations)
    id_records = [
        FeatureRecord(
            record_id=rec.record_id, image_id=rec.image_id, box=rec.box,
            label_id=rec.label_id, kind=KIND_ID,
            vector=benchmark.extract_patch_features(
                rec.image_path, rec.box, config.feature_dim, config.extractor_seed),
        )
        for rec in records
    ]
    edit_records = []
    for edit in edits:
        if edit.refined_box is None:
            continue
        path = resolve_edit_path(edit, root / "edits")
        edit_records.append(
            FeatureRecord(
                record_id=edit.edit_id, image_id=edit.job.source.image_id,
                box=edit.refined_box, label_id=edit.job.source.label_id, kind=KIND_EDIT,
                vector=benchmark.extract_patch_features(
                    path, edit.refined_box, config.feature_dim, config.extractor_seed),
            )
        )
    return id_records, edit_records


def run_pair_filter(config: PipelineConfig, force: bool = False) -> Path:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    manifest = root / "filtered_manifest.jsonl"
    if _fresh(root, "pair_filter", fps["pair_filter"], force):
        logger.info("pair_filter: fingerprint unchanged, skipping")
        return manifest
    if config.archives_only():
        edits = read_edit_manifest(config.pair_manifest)
        id_records = read_feature_archive(config.id_archive)
        edit_records = read_feature_archive(config.edit_archive)
    else:
        _require_upstream(root, "pair_filter", "refine", fps)
        edits = read_edit_manifest(root / "refined_manifest.jsonl")
        if config.id_archive and config.edit_archive:
            id_records = read_feature_archive(config.id_archive)
            edit_records = read_feature_archive(config.edit_archive)
        else:
            id_records, edit_records = _mock_extract(config, root, edits)
            write_feature_archive(root / "id_features.synf", id_records, config.feature_dim)
            write_feature_archive(root / "edit_features.synf", edit_records, config.feature_dim)
    pairs = pair_features(id_records, edit_records, edits)
    if config.filter_enabled:
        filtered = apply_filter_statuses(edits, pairs, config.filter_config())
    else:
        by_edit_id = {p.edit_feature.record_id: p for p in pairs}
        filtered = []
        for edit in edits:
            pair = by_edit_id.get(edit.edit_id)
            if pair is not None:
                edit = dataclasses.replace(edit, status=STATUS_ACCEPTED,
                                           similarity=pair.similarity)
            filtered.append(edit)
    write_edit_manifest(manifest, filtered)
    _finish(root, "pair_filter", fps["pair_filter"], config.seed)
    return manifest


def _train_arrays(config: PipelineConfig, root: Path):
    id_path = config.id_archive or root / "id_features.synf"
    edit_path = config.edit_archive or root / "edit_features.synf"
    id_records = read_feature_archive(id_path)
    edit_records = read_feature_archive(edit_path)
    edits = read_edit_manifest(root / "filtered_manifest.jsonl")
    accepted = {e.edit_id for e in edits if e.status == STATUS_ACCEPTED}
    id_matrix = np.stack([r.vector for r in id_records]).astype(np.float64)
    kept = [r.vector for r in edit_records if r.record_id in accepted]
    if not kept:
        raise MissingArtifactError("no accepted synthetic features to train on",
                                   stage="pair_filter")
    return id_matrix, np.stack(kept).astype(np.float64)


def run_train(config: PipelineConfig, force: bool = False) -> Path:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    ckpt = root / "model.ckpt"
    if _fresh(root, "train", fps["train"], force):
        logger.info("train: fingerprint unchanged, skipping")
        return ckpt
    _require_upstream(root, "train", "pair_filter", fps)
    id_matrix, ood_matrix = _train_arrays(config, root)
    model = init_model(config.feature_dim, config.hidden,
                       seed=derive_seed(config.seed, "model"),
                       dropout_rate=config.dropout)
    model, curve = train(model, id_matrix, ood_matrix, config.train_config())
    save_checkpoint(ckpt, model)
    save_loss_curve(root / "loss_curve.csv", curve)
    from .plots import save_loss_curve_plot

    save_loss_curve_plot(root / "loss_curve.png", curve)
    _finish(root, "train", fps["train"], config.seed)
    return ckpt


def run_evaluate(config: PipelineConfig, force: bool = False) -> EvalReport:
    root = _out_root(config)
    fps = stage_fingerprints(config)
    report_path = root / "report.json"
    if _fresh(root, "evaluate", fps["evaluate"], force) and report_path.exists():
        logger.info("evaluate: fingerprint unchanged, reusing report")
        doc = json.loads(report_path.read_text(encoding="utf-8"))
        return EvalReport(**doc)
    _require_upstream(root, "evaluate", "train", fps)
    model = load_checkpoint(root / "model.ckpt")
    if config.eval_id_archive and config.eval_edit_archive:
        id_matrix = np.stack([r.vector for r in read_feature_archive(config.eval_id_archive)])
        ood_matrix = np.stack([r.vector for r in read_feature_archive(config.eval_edit_archive)])
    else:
        id_matrix, ood_matrix = _train_arrays(config, root)
    report = evaluate(model, id_matrix, ood_matrix,
                      config_fingerprint=fps["evaluate"])
    write_report_json(report_path, report)
    write_report_csv(root / "report.csv", [report])
    from .detector import score_batch
    from .plots import save_roc_plot, save_score_hist

    id_scores = score_batch(model, id_matrix)
    ood_scores = score_batch(model, ood_matrix)
    save_roc_plot(root / "roc.png", id_scores, ood_scores, report)
    save_score_hist(root / "score_hist.png", id_scores, ood_scores, report.threshold_used)
    _finish(root, "evaluate", fps["evaluate"], config.seed)
    return report


_STAGE_RUNNERS = {
    "imagine": run_imagine,
    "synthesize": run_synthesize,
    "refine": run_refine,
    "pair_filter": run_pair_filter,
    "train": run_train,
    "evaluate": run_evaluate,
}


def run_pipeline(config: PipelineConfig, force: bool = False) -> EvalReport:
    """All stages in order; equivalent to running the subcommands one by one."""
    stages = ("pair_filter", "train", "evaluate") if config.archives_only() else STAGES
    report = None
    for stage in stages:
        result = _STAGE_RUNNERS[stage](config, force=force)
        if stage == "evaluate":
            report = result
    return report


def override_axis(config: PipelineConfig, axis: str, value) -> PipelineConfig:
    """One-axis override for ablation sweeps; output lands in a subdirectory."""
    doc = config_to_dict(config)
    if axis == "sample_count":
        doc["synthesis"]["budget"] = int(value)
    elif axis == "concept_count":
        doc["concepts"]["concepts_per_label"] = int(value)
    elif axis == "filter_on_off":
        doc["filter"]["enabled"] = bool(value)
    elif axis == "refiner_on_off":
        doc["refine"]["enabled"] = bool(value)
    else:
        raise ConfigError(f"unknown ablation axis {axis!r}")
    doc["output_root"] = str(Path(config.output_root) / "ablation" / f"{axis}={value}")
    return config_from_dict(doc)
