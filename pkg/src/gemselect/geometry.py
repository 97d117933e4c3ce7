"""Pairwise affinities: kernel Gram matrices and distance matrices.

Affinities can be restricted to an active feature subset, which is how
the dynamic training regime re-anchors the geometry after eliminations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateGeometryError, NumericError, ShapeError

KERNELS = ("linear",)
METRICS = ("euclidean",)


@dataclass(frozen=True)
class AffinitySpec:
    """Which affinity to compute and on which feature subset.

    kind: "kernel" or "metric"; name: "linear" or "euclidean".
    active: ordered tuple of 0-based feature indices, or None for all.
    """

    kind: str = "kernel"
    name: str = "linear"
    active: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind == "kernel":
            if self.name not in KERNELS:
                raise ValueError(f"unknown kernel {self.name!r}")
        elif self.kind == "metric":
            if self.name not in METRICS:
                raise ValueError(f"unknown metric {self.name!r}")
        else:
            raise ValueError(f"affinity kind must be 'kernel' or 'metric', got {self.kind!r}")
        if self.active is not None:
            act = tuple(int(j) for j in self.active)
            if len(set(act)) != len(act):
                raise ValueError("active feature set contains duplicates")
            object.__setattr__(self, "active", act)


@dataclass(frozen=True)
class AffinityMatrix:
    """An N x N symmetric affinity with its provenance.

    tag is "gram" for kernel matrices and "distance" for metrics;
    active records the feature subset the affinity was computed on.
    """

    matrix: np.ndarray
    tag: str
    active: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def submatrix(self, idx) -> "AffinityMatrix":
        """Restrict to a sample subset (used for minibatches)."""
        idx = np.asarray(idx)
        return AffinityMatrix(self.matrix[np.ix_(idx, idx)], self.tag, self.active)


def pairwise_affinity(X: np.ndarray, spec: AffinitySpec) -> AffinityMatrix:
    """Compute the pairwise affinity of the rows of X under `spec`.

    The linear kernel is the dot product, the euclidean metric the l2
    norm of the difference, both evaluated on the restriction of each
    sample to the active feature set.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D sample matrix, got ndim={X.ndim}")
    if not np.isfinite(X).all():
        raise NumericError("sample matrix contains non-finite values")
    if spec.active is not None:
        if len(spec.active) == 0:
            raise DegenerateGeometryError("affinity requested on an empty feature set")
        if max(spec.active) >= X.shape[1]:
            raise ShapeError(
                f"active feature index {max(spec.active)} out of range for d={X.shape[1]}"
            )
        X = X[:, list(spec.active)]

    if spec.kind == "kernel":
        G = X @ X.T
        # enforce exact symmetry so downstream quadratic forms are clean
        G = (G + G.T) / 2.0
        return AffinityMatrix(G, "gram", spec.active)
    D = cdist(X, X, metric="euclidean")
    np.fill_diagonal(D, 0.0)
    return AffinityMatrix(D, "distance", spec.active)
