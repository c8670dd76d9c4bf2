"""Evaluation: weighted F1, per-class tables, confusion matrices,
ablation tables, and report rendering.

Zero denominators follow the usual convention: precision, recall and F1
are 0 when undefined. Fine-grain label sets are reduced to per-class
binary tasks and averaged by class support.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    """Scores for one (task, split) evaluation run.

    created_at is carried for logging only and is excluded from
    serialized artifacts so identical runs stay byte-identical.
    """

    task: str
    split: str
    weighted_f1: float
    per_class: list[ClassMetrics]
    confusion: list[list[int]]
    classes: list[str]
    run_meta: dict = field(default_factory=dict)
    created_at: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "split": self.split,
            "weighted_f1": self.weighted_f1,
            "classes": [
                {
                    "name": m.name,
                    "p": m.precision,
                    "r": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for m in self.per_class
            ],
            "confusion": self.confusion,
            "config_hash": self.run_meta.get("config_hash", ""),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, sort_keys=True, indent=2)


def _binary_prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def weighted_f1(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    """Support-weighted mean of per-class F1 over single-label vectors."""
    if len(y_true) != len(y_pred):
        raise DataError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise DataError("cannot score an empty label vector")
    total = 0.0
    n = len(y_true)
    for cls in sorted(set(y_true) | set(y_pred)):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        support = tp + fn
        _, _, f1 = _binary_prf(tp, fp, fn)
        total += (support / n) * f1
    return total


def confusion(
    y_true: Sequence[str], y_pred: Sequence[str], classes: Sequence[str]
) -> np.ndarray:
    """Count matrix with true classes as rows, predictions as columns."""
    index = {cls: i for i, cls in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise DataError(f"unknown true label {t!r}")
        if p not in index:
            raise DataError(f"unknown predicted label {p!r}")
        matrix[index[t], index[p]] += 1
    return matrix


def _as_set(labels) -> frozenset:
    if isinstance(labels, (set, frozenset)):
        return frozenset(labels)
    return frozenset({labels})


def per_class_report(
    y_true: Sequence, y_pred: Sequence, classes: Sequence[str]
) -> list[ClassMetrics]:
    """Per-class precision/recall/F1/support plus a weighted-average row.

    Accepts label sets (fine-grain) or single labels (coarse); each class
    is scored as its own binary task.
    """
    if len(y_true) != len(y_pred):
        raise DataError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    true_sets = [_as_set(t) for t in y_true]
    pred_sets = [_as_set(p) for p in y_pred]
    rows = []
    weighted = np.zeros(3)
    total_support = 0
    for cls in classes:
        tp = sum(1 for t, p in zip(true_sets, pred_sets) if cls in t and cls in p)
        fp = sum(1 for t, p in zip(true_sets, pred_sets) if cls not in t and cls in p)
        fn = sum(1 for t, p in zip(true_sets, pred_sets) if cls in t and cls not in p)
        support = tp + fn
        precision, recall, f1 = _binary_prf(tp, fp, fn)
        rows.append(ClassMetrics(cls, precision, recall, f1, support))
        weighted += support * np.array([precision, recall, f1])
        total_support += support
    if total_support:
        weighted /= total_support
    rows.append(ClassMetrics("weighted_avg", *(float(v) for v in weighted), total_support))
    return rows


def multilabel_weighted_f1(y_true: Sequence, y_pred: Sequence, classes: Sequence[str]) -> float:
    rows = per_class_report(y_true, y_pred, classes)
    return rows[-1].f1


def pooled_confusion(y_true: Sequence, y_pred: Sequence, classes: Sequence[str]) -> np.ndarray:
    """2x2 positive/negative matrix pooled over per-class binary tasks;
    the single-matrix stand-in for multi-label runs."""
    true_sets = [_as_set(t) for t in y_true]
    pred_sets = [_as_set(p) for p in y_pred]
    matrix = np.zeros((2, 2), dtype=np.int64)
    for cls in classes:
        for t, p in zip(true_sets, pred_sets):
            matrix[0 if cls in t else 1, 0 if cls in p else 1] += 1
    return matrix


def render_report_text(report: EvalReport) -> str:
    lines = [
        f"task: {report.task}   split: {report.split}",
        f"weighted F1: {report.weighted_f1:.4f}",
        "",
        f"{'class':<14} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}",
    ]
    for m in report.per_class:
        lines.append(
            f"{m.name:<14} {m.precision:9.4f} {m.recall:9.4f} {m.f1:9.4f} {m.support:9d}"
        )
    lines.append("")
    lines.append("confusion (rows = true, cols = predicted):")
    header = " ".join(f"{c:>12}" for c in report.classes)
    lines.append(f"{'':<14}{header}")
    for cls, row in zip(report.classes, report.confusion):
        cells = " ".join(f"{v:>12d}" for v in row)
        lines.append(f"{cls:<14}{cells}")
    if report.run_meta.get("config_hash"):
        lines.append("")
        lines.append(f"config_hash: {report.run_meta['config_hash']}")
    return "\n".join(lines) + "\n"


def ablation_table(runs: Sequence[tuple[str, EvalReport]], baseline_tag: str = "none") -> dict:
    """Rows sorted by feature-set tag with deltas vs the no-metadata
    baseline run."""
    if len(runs) < 2:
        raise DataError("ablation table needs at least 2 runs")
    by_tag = {tag: report for tag, report in runs}
    if baseline_tag not in by_tag:
        raise DataError(f"ablation runs lack the baseline tag {baseline_tag!r}")
    base = by_tag[baseline_tag].weighted_f1
    rows = []
    for tag in sorted(by_tag):
        score = by_tag[tag].weighted_f1
        rows.append({"tag": tag, "weighted_f1": score, "delta": score - base})
    return {"baseline": baseline_tag, "rows": rows}


def render_ablation_text(tables: Mapping[str, dict]) -> str:
    lines = []
    for grain, table in tables.items():
        lines.append(f"ablation ({grain}), delta vs {table['baseline']!r}:")
        lines.append(f"{'tag':<14} {'weighted_f1':>12} {'delta':>9}")
        for row in table["rows"]:
            lines.append(f"{row['tag']:<14} {row['weighted_f1']:12.4f} {row['delta']:+9.4f}")
        lines.append("")
    return "\n".join(lines)
