"""Precision, recall, and detections-per-second over labeled detections.

Recall's denominator is the number of oracle positives within the evaluated
hypothesis set (the detector's own candidates), not all grasps that exist.
Undefined values (no predictions above a threshold, or no positives at all)
are reported as None, never as 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["EvalRow", "EvalReport", "evaluate", "interpolated_precision", "write_pr_csv", "write_pdps_csv", "plot_curves"]


@dataclass(frozen=True)
class EvalRow:
    threshold: float
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    dps: float | None


@dataclass
class EvalReport:
    rows: list[EvalRow]
    wall_time: float
    n_positive: int
    n_detections: int
    stage_seconds: dict[str, float]

    def best_precision_at(self, min_recall: float = 0.0) -> float | None:
        vals = [r.precision for r in self.rows if r.precision is not None and (r.recall or 0) >= min_recall]
        return max(vals) if vals else None


def evaluate(
    scores,
    labels,
    thresholds,
    wall_time: float,
    stage_seconds: dict[str, float] | None = None,
) -> EvalReport:
    """Sweep thresholds over scored, oracle-labeled detections.

    At threshold t the predictions are the detections with score > t;
    precision = TP/(TP+FP), recall = TP/(TP+FN) over the set's positives, and
    DPS = predictions / wall_time of the detect call that produced them.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if len(thresholds) > 1 and not (np.diff(thresholds) > 0).all():
        raise ValueError("thresholds must be strictly increasing")
    if wall_time <= 0:
        raise ValueError("wall_time must be positive")
    n_pos = int(labels.sum())
    rows = []
    for t in thresholds:
        predicted = scores > t
        tp = int((predicted & labels).sum())
        fp = int((predicted & ~labels).sum())
        fn = int((~predicted & labels).sum())
        tn = int((~predicted & ~labels).sum())
        precision = tp / (tp + fp) if (tp + fp) > 0 else None
        recall = tp / (tp + fn) if n_pos > 0 else None
        dps = (tp + fp) / wall_time
        rows.append(EvalRow(float(t), tp, fp, fn, tn, precision, recall, dps))
    return EvalReport(rows, wall_time, n_pos, len(scores), stage_seconds or {})


def interpolated_precision(report: EvalReport) -> list[tuple[float, float]]:
    """(recall, precision) points with standard interpolation: each precision
    is replaced by the max precision at any equal-or-higher recall, which
    makes the curve non-increasing in recall."""
    pts = [
        (r.recall, r.precision)
        for r in report.rows
        if r.recall is not None and r.precision is not None
    ]
    pts.sort(key=lambda p: p[0])
    out = []
    best = 0.0
    for recall, precision in reversed(pts):
        best = max(best, precision)
        out.append((recall, best))
    out.reverse()
    return out


def _fmt(x) -> str:
    return "" if x is None else f"{x:.9g}"


def write_pr_csv(path, report: EvalReport) -> None:
    lines = ["threshold,precision,recall,tp,fp,fn,tn"]
    for r in report.rows:
        lines.append(
            f"{r.threshold:.9g},{_fmt(r.precision)},{_fmt(r.recall)},{r.tp},{r.fp},{r.fn},{r.tn}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_pdps_csv(path, report: EvalReport) -> None:
    lines = ["threshold,precision,dps"]
    for r in report.rows:
        lines.append(f"{r.threshold:.9g},{_fmt(r.precision)},{_fmt(r.dps)}")
    Path(path).write_text("\n".join(lines) + "\n")


def plot_curves(report: EvalReport, pr_path=None, pdps_path=None) -> None:
    """Optional SVG line plots; needs matplotlib."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    if pr_path is not None:
        pts = [(r.recall, r.precision) for r in report.rows
               if r.recall is not None and r.precision is not None]
        fig, ax = plt.subplots(figsize=(5, 4))
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        ax.grid(True, alpha=0.3)
        fig.savefig(pr_path, format="svg", bbox_inches="tight")
        plt.close(fig)
    if pdps_path is not None:
        pts = [(r.dps, r.precision) for r in report.rows
               if r.dps is not None and r.precision is not None]
        fig, ax = plt.subplots(figsize=(5, 4))
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3)
        ax.set_xlabel("detections per second")
        ax.set_ylabel("precision")
        ax.set_ylim(0, 1.02)
        ax.grid(True, alpha=0.3)
        fig.savefig(pdps_path, format="svg", bbox_inches="tight")
        plt.close(fig)
