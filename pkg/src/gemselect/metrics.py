"""Clustering and variable-selection evaluation metrics.

All set sizes are counted in exact integer arithmetic; conversion to
percentages is left to report formatting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class SelectionTruth:
    """Ground truth for variable selection on a d-feature dataset.

    `informative` is the set of truly informative feature indices,
    `selected` the set the model kept. Indices are 0-based.
    """

    d: int
    informative: frozenset[int]
    selected: frozenset[int]

    def __post_init__(self):
        for name in ("informative", "selected"):
            idx = getattr(self, name)
            object.__setattr__(self, name, frozenset(int(j) for j in idx))
            if any(j < 0 or j >= self.d for j in getattr(self, name)):
                raise ValueError(f"{name} indices out of range for d={self.d}")


def ari(labels, preds) -> float:
    """Adjusted Rand index between two partitions of the same samples.

    Uses the contingency-table closed form. When the correction
    denominator is zero (e.g. both partitions are a single cluster) the
    index is 1.0 if the partitions are identical as partitions and 0.0
    otherwise.
    """
    labels = np.asarray(labels).ravel()
    preds = np.asarray(preds).ravel()
    if labels.shape != preds.shape:
        raise ShapeError(
            f"label vectors differ in length: {labels.shape[0]} vs {preds.shape[0]}"
        )
    n = labels.shape[0]
    if n == 0:
        raise ShapeError("ARI needs at least one sample")

    _, li = np.unique(labels, return_inverse=True)
    _, pi = np.unique(preds, return_inverse=True)
    table = np.zeros((li.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (li, pi), 1)

    def comb2(x):
        return x * (x - 1) // 2

    sum_cells = int(comb2(table).sum())
    sum_rows = int(comb2(table.sum(axis=1)).sum())
    sum_cols = int(comb2(table.sum(axis=0)).sum())
    total = comb2(n)

    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    maximum = (sum_rows + sum_cols) / 2.0
    if maximum == expected:
        # Degenerate correction: identical-as-partitions means every row of
        # the contingency table has a single nonzero cell and vice versa.
        identical = (np.count_nonzero(table, axis=1) <= 1).all() and (
            np.count_nonzero(table, axis=0) <= 1
        ).all()
        return 1.0 if identical else 0.0
    return (sum_cells - expected) / (maximum - expected)


def vser(truth: SelectionTruth) -> float:
    """Variable selection error rate: |selected symm-diff informative| / d."""
    return len(truth.selected ^ truth.informative) / truth.d


def cvr(truth: SelectionTruth) -> float:
    """Correct variable rate: fraction of informative variables selected."""
    if not truth.informative:
        raise ValueError("correct variable rate is undefined without informative variables")
    return len(truth.selected & truth.informative) / len(truth.informative)


def majority_map(labels, preds):
    """Map each predicted cluster to its modal true class.

    Ties go to the lower class value. Clusters that never occur in
    `preds` are simply absent from the mapping.
    """
    labels = np.asarray(labels).ravel()
    preds = np.asarray(preds).ravel()
    if labels.shape != preds.shape:
        raise ShapeError(
            f"label vectors differ in length: {labels.shape[0]} vs {preds.shape[0]}"
        )
    mapped = np.empty_like(preds)
    for cluster in np.unique(preds):
        mask = preds == cluster
        counts = Counter(labels[mask].tolist())
        top = max(counts.values())
        mapped[mask] = min(c for c, v in counts.items() if v == top)
    return mapped
