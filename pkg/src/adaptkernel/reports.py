"""Report JSON, per-epoch CSVs, sweep tables and the attention heatmap export."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .experiment import ExperimentReport

logger = logging.getLogger(__name__)

DEFAULT_HEATMAP_FEATURES = 13
DEFAULT_HEATMAP_ITERATIONS = range(1, 7)


def write_if_changed(path: Path, content: str) -> bool:
    """Write ``content`` to ``path`` unless the file already holds it.

    Returns:
        True when the file was created or rewritten.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists() and path.read_text(encoding="utf-8") == content:
        return False
    path.write_text(content, encoding="utf-8")
    return True


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def report_to_json(report: ExperimentReport) -> str:
    """Byte-stable JSON for ``report``: sorted keys, two-space indent, no wall clock."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def write_report(report: ExperimentReport, path: Path) -> bool:
    return write_if_changed(path, report_to_json(report))


def read_report(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def summary_statistics(fold_accuracies: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Mean and standard error of a repeat x fold accuracy table."""
    scores = np.array([acc for repeat in fold_accuracies for acc in repeat], dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no fold accuracies")
    stderr = float(scores.std(ddof=1) / np.sqrt(scores.size)) if scores.size > 1 else 0.0
    return float(scores.mean()), stderr


def write_timing(report: ExperimentReport, path: Path) -> bool:
    payload = {"wall_clock_seconds": report.wall_clock, "runs": len(report.runs)}
    return write_if_changed(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_loss_curves(report: ExperimentReport, path: Path) -> bool:
    rows = (
        (run.repeat, run.fold, epoch, repr(float(loss)), repr(float(train)), repr(float(test)))
        for run in report.runs
        for epoch, (loss, train, test) in enumerate(
            zip(run.train_losses, run.train_accuracies, run.test_accuracies)
        )
    )
    return write_if_changed(
        path, _csv_text(("repeat", "fold", "epoch", "train_loss", "train_acc", "test_acc"), rows)
    )


def write_attention_scores(report: ExperimentReport, path: Path) -> bool:
    """Mean final attention score per feature, one row per feature."""
    if report.scores is None:
        raise ValueError("report carries no attention scores (baseline run)")
    rows = (
        (index, feature_id, repr(float(score)))
        for index, (feature_id, score) in enumerate(zip(report.feature_ids, report.scores))
    )
    return write_if_changed(path, _csv_text(("index", "feature_id", "score"), rows))


def write_attention_history(report: ExperimentReport, path: Path) -> bool:
    missing = [run for run in report.runs if run.score_history is None]
    if missing or not report.runs:
        raise ValueError("attention history was not recorded for this report")
    rows = (
        (run.repeat, run.fold, epoch, report.feature_ids[j], repr(float(score)))
        for run in report.runs
        for epoch, scores in enumerate(run.score_history)
        for j, score in enumerate(scores)
    )
    return write_if_changed(
        path, _csv_text(("repeat", "fold", "epoch", "feature_id", "score"), rows)
    )


def write_sweep_table(reports: Sequence[ExperimentReport], path: Path) -> bool:
    rows = (
        (report.config.wl_iterations, repr(report.mean), repr(report.stderr))
        for report in reports
    )
    return write_if_changed(path, _csv_text(("wl_iterations", "mean", "stderr"), rows))


def attention_heatmap(
    reports_by_iteration: Mapping[int, ExperimentReport],
    first_k: int = DEFAULT_HEATMAP_FEATURES,
    iterations: Iterable[int] = DEFAULT_HEATMAP_ITERATIONS,
) -> np.ndarray:
    """Mean final attention of the first ``first_k`` features for each WL iteration.

    Row ``r`` belongs to the ``r``-th requested iteration. ``first_k`` is clipped
    to the narrowest feature set among the requested reports.

    Raises:
        ValueError: An iteration has no report or its report has no attention scores.
    """
    iterations = list(iterations)
    selected = []
    for i in iterations:
        report = reports_by_iteration.get(i)
        if report is None:
            raise ValueError(f"no run artifact for WL iteration {i}")
        if report.scores is None:
            raise ValueError(f"run for WL iteration {i} has no attention scores")
        selected.append(report.scores)
    if not selected:
        return np.empty((0, 0))
    width = min(len(scores) for scores in selected)
    if first_k > width:
        logger.warning("only %d features available; heatmap clipped from %d", width, first_k)
        first_k = width
    return np.array([scores[:first_k] for scores in selected])


def export_attention_heatmap(
    reports_by_iteration: Mapping[int, ExperimentReport],
    path: Path,
    first_k: int = DEFAULT_HEATMAP_FEATURES,
    iterations: Iterable[int] = DEFAULT_HEATMAP_ITERATIONS,
) -> bool:
    """Write the heatmap as ``wl_iterations,feature_index,score`` rows."""
    iterations = list(iterations)
    matrix = attention_heatmap(reports_by_iteration, first_k, iterations)
    rows = (
        (i, j, repr(float(score)))
        for i, scores in zip(iterations, matrix)
        for j, score in enumerate(scores)
    )
    return write_if_changed(path, _csv_text(("wl_iterations", "feature_index", "score"), rows))


def write_experiment_outputs(report: ExperimentReport, output_dir: Path) -> list[Path]:
    """Write every artifact of one experiment under ``output_dir``.

    Returns:
        Paths that were created or changed.
    """
    writers = [
        (output_dir / "report.json", write_report),
        (output_dir / "loss_curves.csv", write_loss_curves),
        (output_dir / "timing.json", write_timing),
    ]
    if report.scores is not None:
        writers.append((output_dir / "attention.csv", write_attention_scores))
    if report.config.record_attention and report.runs:
        writers.append((output_dir / "attention_history.csv", write_attention_history))
    changed = [path for path, writer in writers if writer(report, path)]
    logger.info("wrote %d file(s) under %s", len(changed), output_dir)
    return changed
