"""Scoring: per-class accuracy tables and confusion matrices.

Acc for class c is per-class recall, 100 * correct_c / count_c; the "Ave."
column is the unweighted (macro) mean over classes that have test samples.
Classes without samples are excluded from the average and flagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .gcn import GcnModel, forward

ACC_DEFINITION = (
    "Acc[c] = 100 * confusion[c][c] / count[c] (per-class recall); "
    "Ave. = unweighted mean of Acc over classes with count > 0"
)

REPORT_FORMAT = "evaluation-report"
REPORT_VERSION = 1


@dataclass
class EvaluationReport:
    class_names: list[str]
    per_class_acc: np.ndarray   # percent; NaN for classes without samples
    macro_average: float        # percent
    confusion: np.ndarray       # (C, C) int64, rows = true, columns = predicted
    counts: np.ndarray          # (C,) int64 true-label counts
    zero_count_classes: list[int]
    config: dict

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def evaluate(model: GcnModel, snapshots, class_names: list[str] | None = None,
             config: dict | None = None) -> EvaluationReport:
    """Score a model on labeled snapshots.

    Deterministic: the same model and snapshot list always produce an
    identical report.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("cannot evaluate an empty snapshot list")
    c = model.num_classes
    if class_names is None:
        class_names = [f"class_{i}" for i in range(c)]
    if len(class_names) != c:
        raise ValueError(f"{len(class_names)} class names for {c} model classes")
    confusion = np.zeros((c, c), dtype=np.int64)
    for snap in snapshots:
        if not 0 <= snap.label < c:
            raise ValueError(f"label {snap.label} out of range for {c} classes")
        logits, _ = forward(model, snap)
        confusion[snap.label, int(np.argmax(logits))] += 1
    counts = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(counts > 0, 100.0 * np.diag(confusion) / counts, np.nan)
    scored = counts > 0
    macro = float(per_class[scored].mean())
    return EvaluationReport(
        class_names=list(class_names),
        per_class_acc=per_class,
        macro_average=macro,
        confusion=confusion,
        counts=counts,
        zero_count_classes=[int(i) for i in np.flatnonzero(~scored)],
        config=dict(config or {}),
    )


def format_report(report: EvaluationReport) -> str:
    """Render the aligned text table (per-class columns plus Ave.)."""
    lines = [
        "process monitoring evaluation report",
        f"artifact version: {__version__}",
        ACC_DEFINITION,
    ]
    if report.config:
        lines.append("config: " + json.dumps(report.config, sort_keys=True))
    lines.append("")

    headers = list(report.class_names) + ["Ave."]
    acc_cells = [
        "n/a" if np.isnan(a) else f"{a:.2f}" for a in report.per_class_acc
    ] + [f"{report.macro_average:.2f}"]
    count_cells = [str(int(n)) for n in report.counts] + [str(int(report.counts.sum()))]
    widths = [
        max(len(h), len(a), len(n)) for h, a, n in zip(headers, acc_cells, count_cells)
    ]
    label_width = max(len(s) for s in ("Class", "Acc", "Count"))

    def row(label: str, cells: list[str]) -> str:
        return "  ".join(
            [label.ljust(label_width)] + [c.rjust(w) for c, w in zip(cells, widths)]
        )

    lines.append(row("Class", headers))
    lines.append(row("Acc", acc_cells))
    lines.append(row("Count", count_cells))
    if report.zero_count_classes:
        flagged = ", ".join(report.class_names[i] for i in report.zero_count_classes)
        lines.append(f"classes without samples (excluded from Ave.): {flagged}")
    lines.append("")
    lines.append("confusion matrix (rows = true, columns = predicted)")
    name_width = max(max(len(n) for n in report.class_names), 4)
    cell_width = max(len(str(int(report.confusion.max(initial=0)))), 4)
    header = " ".join(
        [" " * name_width] + [n[:cell_width].rjust(cell_width) for n in report.class_names]
    )
    lines.append(header)
    for i, name in enumerate(report.class_names):
        cells = " ".join(str(int(v)).rjust(cell_width) for v in report.confusion[i])
        lines.append(f"{name.ljust(name_width)} {cells}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "artifact_version": __version__,
        "acc_definition": ACC_DEFINITION,
        "class_names": report.class_names,
        "per_class_acc": [None if np.isnan(a) else float(a) for a in report.per_class_acc],
        "macro_average": report.macro_average,
        "confusion": [[int(v) for v in row] for row in report.confusion],
        "counts": [int(v) for v in report.counts],
        "zero_count_classes": report.zero_count_classes,
        "config": report.config,
    }


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def class_scaling_experiment(model_factory, settings, config: dict | None = None
                             ) -> tuple[list[EvaluationReport], dict]:
    """Train and score nested class subsets of increasing size.

    ``settings`` is a sequence of (train_snapshots, test_snapshots,
    class_names) triples with strictly increasing, nested class sets;
    ``model_factory(train_snapshots, num_classes)`` must return a trained
    model.  Returns one report per setting plus a trend summary.  The
    direction of the accuracy trend is reported, never asserted (it is an
    empirical observation, not an invariant).
    """
    settings = list(settings)
    if len(settings) < 2:
        raise ValueError("class-scaling needs at least 2 class-count settings")
    previous_names: set[str] | None = None
    for train_snaps, test_snaps, names in settings:
        if previous_names is not None:
            if len(names) <= len(previous_names):
                raise ValueError("class counts must be strictly increasing")
            if not previous_names.issubset(names):
                raise ValueError("class sets must be nested")
        previous_names = set(names)
    reports: list[EvaluationReport] = []
    for train_snaps, test_snaps, names in settings:
        model = model_factory(train_snaps, len(names))
        echo = dict(config or {})
        echo["class_count"] = len(names)
        reports.append(evaluate(model, test_snaps, names, config=echo))
    macros = [r.macro_average for r in reports]
    diffs = np.diff(macros)
    if (diffs < 0).all():
        trend = "decreasing"
    elif (diffs > 0).all():
        trend = "increasing"
    elif (diffs == 0).all():
        trend = "constant"
    else:
        trend = "mixed"
    summary = {
        "class_counts": [len(names) for _, _, names in settings],
        "macro_averages": macros,
        "trend": trend,
    }
    return reports, summary
