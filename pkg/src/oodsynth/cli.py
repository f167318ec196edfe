"""Command-line front end.

Structured JSON log events go to stderr; the human summary goes to stdout.
Exit codes: 0 success, 1 config/argument error, 2 missing upstream artifact,
3 backend failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import benchmark, pipeline
from .errors import (
    ArgumentError,
    BackendError,
    ConfigError,
    FormatError,
    MissingArtifactError,
    OodSynthError,
    PlanningError,
    RecordValidationError,
)
from .evaluation import run_ablation

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MISSING_DEP = 2
EXIT_BACKEND = 3
EXIT_INTERNAL = 4

_CONFIG_ERRORS = (ConfigError, ArgumentError, PlanningError, FormatError, RecordValidationError)


class _JsonLogHandler(logging.Handler):
    def emit(self, record):
        event = {
            "ts": round(time.time(), 3),
            "level": record.levelname.lower(),
            "logger": record.name,
            "event": record.getMessage(),
        }
        sys.stderr.write(json.dumps(event, sort_keys=True) + "\n")


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger()
    root.handlers = [_JsonLogHandler()]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _load_config(args) -> pipeline.PipelineConfig:
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    else:
        doc = pipeline.default_config_dict()
    doc = pipeline.apply_overrides(doc, args.set or [])
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.backend:
        doc.setdefault("backend", {})["kind"] = args.backend
    return pipeline.config_from_dict(doc)


def _add_common(parser) -> None:
    parser.add_argument("--config", help="pipeline config JSON path")
    parser.add_argument("--seed", type=int, help="override the pipeline seed")
    parser.add_argument("--force", action="store_true",
                        help="rerun even when fingerprints match")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted config override, repeatable")
    parser.add_argument("--backend", choices=["mock", "http"],
                        help="override backend.kind")
    parser.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodsynth",
        description="Synthesize annotated outliers from scene edits, filter them, "
                    "train an ID/OOD head, and evaluate FPR95/AUROC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, hint in [
        ("imagine", "discover novel concepts per label"),
        ("synthesize", "run box-conditioned editing jobs"),
        ("refine", "segment edited regions and gate boxes by IoU"),
        ("pair-filter", "pair features and apply the similarity filter"),
        ("train", "train the ID/OOD head"),
        ("evaluate", "compute FPR95/AUROC and render report figures"),
        ("pipeline", "run every stage in order"),
    ]:
        cmd = sub.add_parser(name, help=hint)
        _add_common(cmd)

    ablate = sub.add_parser("ablate", help="sweep one config axis and collect reports")
    _add_common(ablate)
    ablate.add_argument("--axis", required=True,
                        choices=["sample_count", "concept_count", "filter_on_off",
                                 "refiner_on_off"])
    ablate.add_argument("--grid", required=True,
                        help="JSON list of axis values, e.g. '[2000, 4000]'")

    gen_img = sub.add_parser("gen-image-world", help="emit a procedural image dataset")
    gen_img.add_argument("--out", required=True)
    gen_img.add_argument("--images", type=int, default=100)
    gen_img.add_argument("--seed", type=int, default=0)
    gen_img.add_argument("--verbose", action="store_true")

    gen_feat = sub.add_parser("gen-feature-world", help="emit synthetic feature archives")
    gen_feat.add_argument("--out", required=True)
    gen_feat.add_argument("--dim", type=int, default=16)
    gen_feat.add_argument("--n-id", type=int, default=500)
    gen_feat.add_argument("--n-ood", type=int, default=500)
    gen_feat.add_argument("--separation", type=float, default=6.0)
    gen_feat.add_argument("--contamination", type=float, default=0.0)
    gen_feat.add_argument("--seed", type=int, default=0)
    gen_feat.add_argument("--verbose", action="store_true")
    return parser


_STAGE_BY_COMMAND = {
    "imagine": pipeline.run_imagine,
    "synthesize": pipeline.run_synthesize,
    "refine": pipeline.run_refine,
    "pair-filter": pipeline.run_pair_filter,
    "train": pipeline.run_train,
}


def _dispatch(args) -> int:
    if args.command == "gen-image-world":
        path = benchmark.generate_image_world(args.images, args.seed, args.out)
        print(f"image world written: {path}")
        return EXIT_OK
    if args.command == "gen-feature-world":
        spec = benchmark.SyntheticSpec(
            feature_dim=args.dim, n_id=args.n_id, n_ood=args.n_ood,
            separation=args.separation, contamination=args.contamination, seed=args.seed,
        )
        id_path, edit_path, manifest = benchmark.generate_feature_world(spec, args.out)
        print(f"feature world written: {id_path}, {edit_path}, {manifest}")
        return EXIT_OK

    config = _load_config(args)
    if args.command in _STAGE_BY_COMMAND:
        artifact = _STAGE_BY_COMMAND[args.command](config, force=args.force)
        print(f"{args.command}: done ({artifact})")
        return EXIT_OK
    if args.command == "evaluate":
        report = pipeline.run_evaluate(config, force=args.force)
        print(f"evaluate: fpr95={report.fpr95:.4f} auroc={report.auroc:.4f} "
              f"n_id={report.n_id} n_ood={report.n_ood}")
        return EXIT_OK
    if args.command == "pipeline":
        report = pipeline.run_pipeline(config, force=args.force)
        print(f"pipeline: fpr95={report.fpr95:.4f} auroc={report.auroc:.4f} "
              f"fingerprint={report.config_fingerprint}")
        return EXIT_OK
    if args.command == "ablate":
        try:
            grid = json.loads(args.grid)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--grid is not valid JSON: {exc}") from exc
        if not isinstance(grid, list):
            raise ConfigError("--grid must be a JSON list")
        out_dir = Path(config.output_root) / "ablation"
        rows = run_ablation(args.axis, grid, config, out_dir=out_dir)
        for row in rows:
            if row.report is None:
                print(f"{args.axis}={row.axis_value}: ERROR {row.error}")
            else:
                print(f"{args.axis}={row.axis_value}: fpr95={row.report.fpr95:.4f} "
                      f"auroc={row.report.auroc:.4f}")
        print(f"ablation table: {out_dir / 'ablation.csv'}")
        return EXIT_OK
    raise ArgumentError(f"unknown command {args.command}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that slot belongs to missing
        # dependencies here, so remap.
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    _setup_logging(getattr(args, "verbose", False))
    try:
        return _dispatch(args)
    except MissingArtifactError as exc:
        print(f"error: missing dependency ({exc.stage}): {exc}", file=sys.stderr)
        return EXIT_MISSING_DEP
    except BackendError as exc:
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except _CONFIG_ERRORS as exc:
        field = getattr(exc, "field", None)
        suffix = f" (field: {field})" if field else ""
        print(f"error: {exc}{suffix}", file=sys.stderr)
        return EXIT_CONFIG
    except OodSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - guard rail
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
