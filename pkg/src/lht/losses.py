"""Hierarchical cross-entropy, the transition confusion penalty, and their blend.

The cross-entropy term sums -log p over every sample and every level.  The
confusion term is, per sample and per transition matrix, the column-averaged
negative entropy of the matrix; pushing it down drives the columns toward
uniform, countering over-confident coarse predictions.  The combined loss is
CE + lambda * confusion, with totals summed over the batch and per-level means
reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Tensor
from .errors import (
    InconsistentChain,
    IndexOutOfRange,
    ModeMismatch,
    NegativeLambda,
    ShapeMismatch,
)
from .model import PredictionChain

__all__ = [
    "DEFAULT_LAMBDA",
    "LossBreakdown",
    "hierarchical_ce",
    "confusion_loss",
    "total_loss",
    "batch_losses",
]

DEFAULT_LAMBDA = 2.0


@dataclass(frozen=True)
class LossBreakdown:
    """Per-batch loss report; totals are sums over samples."""

    ce_per_level: tuple[float, ...]  # batch means, finest level first
    ce_total: float                  # cross-entropy summed over samples and levels
    conf_total: float                # confusion penalty summed over samples
    lam: float
    total: float                     # ce_total + lam * conf_total


def _validated_labels(chain: PredictionChain, labels) -> np.ndarray:
    """Normalize labels to an [N, K] int array of hierarchy-consistent chains."""
    hier = chain.hierarchy
    levels = hier.num_levels
    arr = np.asarray(labels, dtype=np.int64)
    if not chain.batched and arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape != (chain.batch_size, levels):
        raise ShapeMismatch(
            f"expected labels of shape ({chain.batch_size}, {levels}), got {np.shape(labels)}"
        )
    for k in range(levels):
        col = arr[:, k]
        size = hier.level_sizes[k]
        if col.min(initial=0) < 0 or col.max(initial=0) >= size:
            raise IndexOutOfRange(f"level {k + 1} labels outside [0, {size})")
    expected = hier.chain_table()[arr[:, 0]]
    if not np.array_equal(expected, arr):
        bad = int(np.nonzero(np.any(expected != arr, axis=1))[0][0])
        raise InconsistentChain(
            f"label chain {tuple(int(v) for v in arr[bad])} does not follow the hierarchy, "
            f"expected {tuple(int(v) for v in expected[bad])}"
        )
    return arr


def hierarchical_ce(chain: PredictionChain, labels) -> tuple[Tensor, tuple[Tensor, ...]]:
    """Cross-entropy summed over levels and samples, plus per-level sums.

    Returns differentiable scalars so gradients flow back through the whole
    prediction chain.
    """
    arr = _validated_labels(chain, labels)
    per_level = []
    for k, probs in enumerate(chain.probs, start=1):
        if chain.batched:
            per_sample = ops.cross_entropy_rows(probs, arr[:, k - 1])
            per_level.append(ops.reduce_sum(per_sample))
        else:
            onehot = np.zeros(chain.hierarchy.level_sizes[k - 1])
            onehot[arr[0, k - 1]] = 1.0
            per_level.append(ops.cross_entropy(probs, onehot))
    total = per_level[0]
    for term in per_level[1:]:
        total = ops.add(total, term)
    return total, tuple(per_level)


def confusion_loss(chain: PredictionChain) -> Tensor:
    """Column-averaged negative entropy of every transition matrix, summed.

    Each matrix contributes (1/cols) * sum over entries of t*log(t); the
    minimum, reached only by all-uniform columns, is -sum(log rows) per
    sample, and one-hot columns contribute exactly 0.
    """
    if not chain.transitions:
        raise ModeMismatch(f"mode {chain.mode!r} produces no transition matrices to regularize")
    total = None
    for record in chain.transitions:
        term = ops.scale(ops.xlogx_sum(record.flat), 1.0 / record.cols)
        total = term if total is None else ops.add(total, term)
    return total


def total_loss(
    ce: float,
    conf: float,
    lam: float = DEFAULT_LAMBDA,
    *,
    ce_per_level: tuple[float, ...] = (),
) -> LossBreakdown:
    """Combine reported cross-entropy and confusion totals into one record."""
    lam = float(lam)
    if lam < 0:
        raise NegativeLambda(f"lambda must be nonnegative, got {lam}")
    return LossBreakdown(
        ce_per_level=tuple(float(v) for v in ce_per_level),
        ce_total=float(ce),
        conf_total=float(conf),
        lam=lam,
        total=float(ce) + lam * float(conf),
    )


def batch_losses(
    chain: PredictionChain,
    labels,
    lam: float = DEFAULT_LAMBDA,
    *,
    use_confusion: bool | None = None,
    optimize_levels: tuple[int, ...] | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """The differentiable training objective plus the full loss report.

    The objective is mean-reduced over the batch so learning rates are
    batch-size-stable.  ``optimize_levels`` defaults to level 1 only for the
    ``vanilla`` baseline and to all levels otherwise; ``use_confusion``
    defaults to whether any transition matrix is learned, which leaves the
    constant parent-indicator matrices unregularized.  The report always
    covers all levels and, when transitions exist, the confusion term.
    """
    lam = float(lam)
    if lam < 0:
        raise NegativeLambda(f"lambda must be nonnegative, got {lam}")
    ce_total_t, per_level_t = hierarchical_ce(chain, labels)
    n = chain.batch_size
    conf_t = confusion_loss(chain) if chain.transitions else None
    if use_confusion is None:
        use_confusion = any(record.learned for record in chain.transitions)
    if optimize_levels is None:
        levels = chain.hierarchy.num_levels
        optimize_levels = (1,) if chain.mode == "vanilla" else tuple(range(1, levels + 1))
    for k in optimize_levels:
        if not 1 <= k <= len(per_level_t):
            raise IndexOutOfRange(f"cannot optimize level {k} of {len(per_level_t)}")
    objective = None
    for k in optimize_levels:
        term = per_level_t[k - 1]
        objective = term if objective is None else ops.add(objective, term)
    if use_confusion:
        if conf_t is None:
            raise ModeMismatch(f"mode {chain.mode!r} has no confusion term to optimize")
        objective = ops.add(objective, ops.scale(conf_t, lam))
    objective = ops.scale(objective, 1.0 / n)
    breakdown = total_loss(
        ce_total_t.item(),
        conf_t.item() if conf_t is not None else 0.0,
        lam,
        ce_per_level=tuple(t.item() / n for t in per_level_t),
    )
    return objective, breakdown
