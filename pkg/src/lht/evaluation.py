"""Accuracy, per-class, mistake-severity, and confusion-matrix reporting.

Decoding is argmax with ties broken by the lowest class index.  For the
``vanilla`` baseline the coarse levels are decoded by backtracking the fine
argmax through the parent maps, so its level-k accuracy is exactly the
accuracy of the backtracked fine decisions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor
from .data import Dataset
from .errors import HierarchyMismatch
from .hierarchy import LabelHierarchy
from .model import LhtModel

__all__ = [
    "MetricsReport",
    "evaluate",
    "predictions",
    "mistake_severity",
    "per_class_delta",
    "report_json",
    "per_class_csv",
    "per_class_delta_csv",
]


@dataclass(frozen=True)
class MetricsReport:
    """Per-level and aggregate metrics for one model on one dataset."""

    level_sizes: tuple[int, ...]
    hierarchy_sha256: str
    n_samples: int
    acc: tuple[float, ...]                         # fraction correct per level, finest first
    avg_acc: float                                 # unweighted mean of acc over levels
    per_class_acc: tuple[tuple[float, ...], ...]   # [level][class]; 0.0 for absent classes
    per_class_count: tuple[tuple[int, ...], ...]   # [level][class] sample counts
    severity_hist: tuple[int, ...]                 # index h-1 counts fine mistakes of severity h
    severity_mean: float                           # 0.0 when there are no mistakes
    confusion: tuple[tuple[tuple[int, ...], ...], ...]  # [level][true][pred]


def predictions(model: LhtModel, dataset: Dataset, *, batch_size: int = 512) -> np.ndarray:
    """Decoded class indices, shape [n, K], finest level first."""
    if model.hierarchy.sha256() != dataset.hierarchy.sha256():
        raise HierarchyMismatch("model and dataset use different hierarchies")
    levels = model.hierarchy.num_levels
    chunks = []
    table = model.hierarchy.chain_table()
    for start in range(0, len(dataset), batch_size):
        chain = model.forward(Tensor(dataset.features[start : start + batch_size]))
        if model.mode == "vanilla":
            fine = np.argmax(chain.probs[0].data, axis=1)
            chunks.append(table[fine])
        else:
            cols = [np.argmax(chain.probs[k].data, axis=1) for k in range(levels)]
            chunks.append(np.stack(cols, axis=1))
    return np.vstack(chunks)


def evaluate(model: LhtModel, dataset: Dataset, *, batch_size: int = 512) -> MetricsReport:
    """Score a model on a dataset; deterministic for fixed inputs."""
    preds = predictions(model, dataset, batch_size=batch_size)
    return build_report(dataset.hierarchy, preds, dataset.labels)


def build_report(hierarchy: LabelHierarchy, preds: np.ndarray, labels: np.ndarray) -> MetricsReport:
    levels = hierarchy.num_levels
    sizes = hierarchy.level_sizes
    n = len(labels)
    accs = []
    per_class_acc = []
    per_class_count = []
    confusion = []
    for k in range(levels):
        p, t = preds[:, k], labels[:, k]
        accs.append(float(np.mean(p == t)) if n else 0.0)
        counts = np.bincount(t, minlength=sizes[k])
        hits = np.bincount(t[p == t], minlength=sizes[k])
        with np.errstate(invalid="ignore"):
            acc_c = np.where(counts > 0, hits / np.maximum(counts, 1), 0.0)
        per_class_acc.append(tuple(float(v) for v in acc_c))
        per_class_count.append(tuple(int(v) for v in counts))
        matrix = np.zeros((sizes[k], sizes[k]), dtype=np.int64)
        np.add.at(matrix, (t, p), 1)
        confusion.append(tuple(tuple(int(v) for v in row) for row in matrix))
    hist, mean = mistake_severity(hierarchy, labels[:, 0], preds[:, 0])
    return MetricsReport(
        level_sizes=sizes,
        hierarchy_sha256=hierarchy.sha256(),
        n_samples=n,
        acc=tuple(accs),
        avg_acc=float(np.mean(accs)) if accs else 0.0,
        per_class_acc=tuple(per_class_acc),
        per_class_count=tuple(per_class_count),
        severity_hist=hist,
        severity_mean=mean,
        confusion=tuple(confusion),
    )


def mistake_severity(
    hierarchy: LabelHierarchy,
    true_fine: np.ndarray,
    pred_fine: np.ndarray,
) -> tuple[tuple[int, ...], float]:
    """Histogram and mean of the ancestor height at which mistakes reconcile.

    Severity h means true and predicted fine classes first share an ancestor
    h levels up (h = 1: same parent); h = K means they stay apart even at the
    coarsest level.  Correct predictions contribute nothing; with no mistakes
    the histogram is all zeros and the mean is 0.0.
    """
    true_fine = np.asarray(true_fine, dtype=np.int64)
    pred_fine = np.asarray(pred_fine, dtype=np.int64)
    levels = hierarchy.num_levels
    wrong = true_fine != pred_fine
    t, p = true_fine[wrong], pred_fine[wrong]
    severity = np.full(len(t), levels, dtype=np.int64)
    unresolved = np.ones(len(t), dtype=bool)
    for height in range(1, levels):
        anc = hierarchy.ancestors(height + 1)
        joined = unresolved & (anc[t] == anc[p])
        severity[joined] = height
        unresolved &= ~joined
    hist = np.bincount(severity, minlength=levels + 1)[1:]
    mean = float(severity.mean()) if len(severity) else 0.0
    return tuple(int(v) for v in hist), mean


def per_class_delta(a: MetricsReport, b: MetricsReport) -> tuple[tuple[float, ...], ...]:
    """Per-class accuracy differences a - b, per level.

    Both reports must come from the same hierarchy and dataset (checked via
    the hierarchy hash and the per-class sample counts).
    """
    if a.hierarchy_sha256 != b.hierarchy_sha256:
        raise HierarchyMismatch("reports were built against different hierarchies")
    if a.n_samples != b.n_samples or a.per_class_count != b.per_class_count:
        raise HierarchyMismatch("reports cover different datasets")
    return tuple(
        tuple(va - vb for va, vb in zip(level_a, level_b))
        for level_a, level_b in zip(a.per_class_acc, b.per_class_acc)
    )


# -- serialization -----------------------------------------------------------------

def report_json(report: MetricsReport) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


def per_class_csv(report: MetricsReport) -> str:
    lines = ["level,class,count,accuracy"]
    for k, (accs, counts) in enumerate(zip(report.per_class_acc, report.per_class_count), start=1):
        for c, (acc, count) in enumerate(zip(accs, counts)):
            lines.append(f"{k},{c},{count},{acc!r}")
    return "\n".join(lines) + "\n"


def per_class_delta_csv(a: MetricsReport, b: MetricsReport) -> str:
    deltas = per_class_delta(a, b)
    lines = ["level,class,delta"]
    for k, level in enumerate(deltas, start=1):
        for c, delta in enumerate(level):
            lines.append(f"{k},{c},{delta!r}")
    return "\n".join(lines) + "\n"
