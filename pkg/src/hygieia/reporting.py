"""Benchmark report rendering: JSON, TSV summary table, and a recall figure."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport


def summary_table(report: EvalReport) -> str:
    """Tab-separated summary, one row per K."""
    lines = ["k\trecall\thits\tn_cases"]
    for k in sorted(report.per_k):
        hits = sum(1 for h in report.per_case_hits if h["k"] == k and h["hit"])
        lines.append(f"{k}\t{report.per_k[k]:.4f}\t{hits}\t{report.n_cases}")
    return "\n".join(lines) + "\n"


def render_recall_figure(report: EvalReport, path: str | Path) -> None:
    ks = sorted(report.per_k)
    values = [report.per_k[k] for k in ks]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([f"Recall@{k}" for k in ks], values, color="#4878a8", width=0.6)
    ax.set_ylim(0, 1.0)
    ax.set_ylabel("recall")
    ax.set_title(f"{report.dataset_name} / {report.task} (n={report.n_cases})")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.2f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(report: EvalReport, json_path: str | Path, generated_at: str = "") -> dict[str, Path]:
    """Write report.json plus the TSV table and recall figure alongside it.

    Returns the paths written, keyed by artifact kind.
    """
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc["generated_at"] = generated_at
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    tsv_path = json_path.with_suffix(".tsv")
    tsv_path.write_text(summary_table(report), encoding="utf-8")

    figure_path = json_path.with_suffix(".png")
    render_recall_figure(report, figure_path)
    return {"json": json_path, "tsv": tsv_path, "figure": figure_path}
