"""Report figures rendered alongside the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_roc_plot(path, id_scores, ood_scores, report=None):
    """ROC curve over all distinct thresholds, ID as the positive class."""
    ids = np.asarray(id_scores, dtype=np.float64)
    oods = np.asarray(ood_scores, dtype=np.float64)
    thresholds = np.unique(np.concatenate([ids, oods]))[::-1]
    tpr = [(ids >= t).mean() for t in thresholds]
    fpr = [(oods >= t).mean() for t in thresholds]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot([0] + fpr + [1], [0] + tpr + [1], lw=1.5)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
    if report is not None:
        ax.set_title(f"AUROC {report.auroc:.4f}  FPR95 {report.fpr95:.4f}")
    ax.set_xlabel("false positive rate (OOD flagged ID)")
    ax.set_ylabel("true positive rate (ID kept)")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_hist(path, id_scores, ood_scores, threshold=None):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    bins = np.linspace(0.0, 1.0, 41)
    ax.hist(id_scores, bins=bins, alpha=0.6, label="ID", density=True)
    ax.hist(ood_scores, bins=bins, alpha=0.6, label="synthetic OOD", density=True)
    if threshold is not None:
        ax.axvline(threshold, ls="--", color="black", lw=1, label="threshold")
    ax.set_xlabel("ID-ness score")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curve_plot(path, curve):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(range(len(curve)), curve, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_plot(path, axis, rows):
    """FPR95 and AUROC against the swept axis value."""
    values = [str(r.axis_value) for r in rows]
    x = np.arange(len(values))
    fpr = [r.report.fpr95 for r in rows]
    auc = [r.report.auroc for r in rows]
    fig, ax1 = plt.subplots(figsize=(6.0, 3.6))
    ax1.plot(x, fpr, marker="o", color="tab:red", label="FPR95")
    ax1.set_ylabel("FPR95", color="tab:red")
    ax1.set_xticks(x, values)
    ax1.set_xlabel(axis)
    ax2 = ax1.twinx()
    ax2.plot(x, auc, marker="s", color="tab:blue", label="AUROC")
    ax2.set_ylabel("AUROC", color="tab:blue")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
