"""FPR95 / AUROC metrics and evaluation reports.

Threshold convention: the operating threshold is the largest ID score value
whose true-positive rate (ID counted at score >= threshold) reaches the
target; no interpolation. AUROC is the Mann-Whitney statistic with ties
counted half, computed by sort-and-rank.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .detector import MlpModel, score_batch
from .errors import ArgumentError

POSITIVE_CLASS = "id"  # ID samples are the positives in both metrics.


@dataclass(frozen=True)
class EvalReport:
    fpr95: float
    auroc: float
    n_id: int
    n_ood: int
    threshold_used: float
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ArgumentError(f"{name} score list must be non-empty")
    return arr


def fpr_at_tpr(id_scores, ood_scores, tpr_target: float = 0.95):
    """False-positive rate at the threshold where ID TPR reaches the target.

    Returns (fpr, threshold). The sweep walks distinct ID score values in
    descending order and keeps the largest one whose TPR meets the target.
    """
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    if not (0.0 < tpr_target <= 1.0):
        raise ArgumentError(f"tpr_target must be in (0, 1], got {tpr_target}")

    values, counts = np.unique(ids, return_counts=True)  # ascending
    values, counts = values[::-1], counts[::-1]
    cumulative = np.cumsum(counts)  # |{id >= values[k]}|
    meets = cumulative / ids.size >= tpr_target
    threshold = float(values[int(np.argmax(meets))])
    fpr = float((oods >= threshold).sum() / oods.size)
    return fpr, threshold


def auroc(id_scores, ood_scores) -> float:
    """P(random ID outscores random OOD), ties counted half."""
    ids = _as_scores(id_scores, "id")
    oods = _as_scores(ood_scores, "ood")
    combined = np.concatenate([ids, oods])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size, dtype=np.float64)
    sorted_vals = combined[order]
    # Average ranks over tie groups (1-based).
    i = 0
    while i < sorted_vals.size:
        j = i
        while j < sorted_vals.size and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0
        i = j
    rank_sum = ranks[:ids.size].sum()
    u_statistic = rank_sum - ids.size * (ids.size + 1) / 2.0
    return float(u_statistic / (ids.size * oods.size))


def evaluate(model: MlpModel, id_features, ood_features,
             config_fingerprint: str = "", tpr_target: float = 0.95) -> EvalReport:
    """Score both feature sets in eval mode and assemble the report."""
    id_scores = score_batch(model, id_features)
    ood_scores = score_batch(model, ood_features)
    fpr, threshold = fpr_at_tpr(id_scores, ood_scores, tpr_target)
    return EvalReport(
        fpr95=fpr,
        auroc=auroc(id_scores, ood_scores),
        n_id=int(len(id_scores)),
        n_ood=int(len(ood_scores)),
        threshold_used=threshold,
        config_fingerprint=config_fingerprint,
    )


# --- report emission -------------------------------------------------------------

ABLATION_AXES = ("sample_count", "concept_count", "filter_on_off", "refiner_on_off")

ABLATION_COLUMNS = ("axis_value", "fpr95", "auroc", "n_id", "n_ood", "threshold", "seed")


@dataclass(frozen=True)
class AblationRow:
    axis_value: object
    report: EvalReport | None
    seed: int
    error: str = ""


def write_report_json(path, report: EvalReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr95", "auroc", "n_id", "n_ood", "threshold_used", "config_fingerprint"])
        for rep in reports:
            writer.writerow([repr(rep.fpr95), repr(rep.auroc), rep.n_id, rep.n_ood,
                             repr(rep.threshold_used), rep.config_fingerprint])


def write_ablation_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ABLATION_COLUMNS)
        for row in rows:
            if row.report is None:
                writer.writerow([row.axis_value, "", "", "", "", "", row.seed])
            else:
                writer.writerow([
                    row.axis_value,
                    repr(row.report.fpr95),
                    repr(row.report.auroc),
                    row.report.n_id,
                    row.report.n_ood,
                    repr(row.report.threshold_used),
                    row.seed,
                ])


def run_ablation(axis: str, grid, base_config, out_dir=None):
    """Sweep one config axis, run the pipeline per grid point, collect reports.

    Seeds and every other knob are held fixed across grid points. A failing
    grid point is recorded as an error row; the sweep continues.
    """
    from . import pipeline as _pipeline

    if axis not in ABLATION_AXES:
        raise ArgumentError(f"axis must be one of {ABLATION_AXES}, got {axis!r}")
    rows = []
    for value in grid:
        config = _pipeline.override_axis(base_config, axis, value)
        try:
            report = _pipeline.run_pipeline(config)
            rows.append(AblationRow(axis_value=value, report=report, seed=config.seed))
        except Exception as exc:
            rows.append(AblationRow(axis_value=value, report=None, seed=base_config.seed,
                                    error=f"{type(exc).__name__}: {exc}"))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_ablation_csv(out_dir / "ablation.csv", rows)
        from .plots import save_ablation_plot

        ok = [r for r in rows if r.report is not None]
        if ok:
            save_ablation_plot(out_dir / "ablation.png", axis, ok)
    return rows
