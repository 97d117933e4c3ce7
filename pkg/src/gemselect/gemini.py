"""Geometry-aware mutual-information objectives over soft assignments.

Cluster-conditional distributions are represented as reweighted
empirical measures over the batch (columns alpha_k of normalized
responsibilities) and the data distribution as the uniform measure, so
every objective is a function of the assignment matrix tau and one
pairwise affinity:

    MMD  (one-vs-all):  sum_k pi_k * sqrt((alpha_k - u)' G (alpha_k - u))
    MMD  (one-vs-one):  sum_{k != l} pi_k pi_l * sqrt((a_k - a_l)' G (a_k - a_l))
    Wass (one-vs-all):  sum_k pi_k * OT(alpha_k, u; D)
    Wass (one-vs-one):  sum_{k != l} pi_k pi_l * OT(alpha_k, alpha_l; D)

Gradients with respect to tau are analytic; the Wasserstein ones use
the centered dual potentials as marginal sensitivities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .geometry import AffinityMatrix
from .ot import OtSolverConfig, ot_distance_batch

# quadratic forms below this are treated as exactly zero (sqrt kink)
_Q_KINK = 1e-12


@dataclass(frozen=True)
class GeminiSpec:
    """Objective family, comparison mode and OT solver settings."""

    family: str = "mmd"  # "mmd" | "wasserstein"
    mode: str = "ovo"  # "ova" | "ovo"
    ot: OtSolverConfig = field(default_factory=OtSolverConfig)
    empty_cluster_rel: float = 1e-12

    def __post_init__(self):
        if self.family not in ("mmd", "wasserstein"):
            raise ValueError(f"unknown objective family {self.family!r}")
        if self.mode not in ("ova", "ovo"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.empty_cluster_rel <= 1e-3:
            raise ValueError("empty-cluster threshold must lie in (0, 1e-3]")

    @property
    def affinity_kind(self) -> str:
        return "kernel" if self.family == "mmd" else "metric"


@dataclass
class ClusterWeights:
    """Cluster proportions pi and normalized within-cluster weights.

    alpha column k holds the empirical weights of cluster k over the
    batch; clusters whose mass falls below the relative threshold are
    flagged empty and their alpha column is set uniform (the pi factor
    annihilates them downstream).
    """

    pi: np.ndarray  # K
    alpha: np.ndarray  # N x K
    empty: np.ndarray  # K bool

    @property
    def pi_effective(self) -> np.ndarray:
        return np.where(self.empty, 0.0, self.pi)


def cluster_weights(tau: np.ndarray, empty_cluster_rel: float = 1e-12) -> ClusterWeights:
    tau = np.asarray(tau, dtype=np.float64)
    n = tau.shape[0]
    mass = tau.sum(axis=0)
    pi = mass / n
    empty = mass <= empty_cluster_rel * n
    safe = np.where(empty, 1.0, mass)
    alpha = np.where(empty[None, :], 1.0 / n, tau / safe[None, :])
    return ClusterWeights(pi, alpha, empty)


def _require_tag(affinity: AffinityMatrix, tag: str) -> None:
    if affinity.tag != tag:
        raise ValueError(f"objective needs a {tag!r} affinity, got {affinity.tag!r}")


def _clamped_sqrt(q, floor):
    """sqrt of quadratic forms with the PSD tolerance clamp.

    Values in [floor, 0) are rounded up to zero; anything below floor
    signals a non-PSD gram matrix.
    """
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < floor):
        raise NumericError(
            f"negative quadratic form {q.min():.3e} below PSD tolerance {floor:.3e}"
        )
    q = np.maximum(q, 0.0)
    root = np.sqrt(q)
    with np.errstate(divide="ignore"):
        inv = np.where(q > _Q_KINK, 1.0 / root, 0.0)
    return q, root, inv


def _mmd_core(cw: ClusterWeights, gram: np.ndarray, mode: str, want_grad: bool):
    n, k = cw.alpha.shape
    floor = -1e-8 * float(np.trace(gram))
    A = cw.alpha
    GA = gram @ A  # N x K
    B = A.T @ GA  # K x K
    pi = cw.pi_effective

    if mode == "ova":
        Gu = gram.mean(axis=1)  # G @ u
        aGu = A.T @ Gu  # K
        uGu = float(Gu.mean())
        q = np.diag(B) - 2.0 * aGu + uGu
        q, root, inv = _clamped_sqrt(q, floor)
        value = float(pi @ root)
        if not want_grad:
            return value, None
        # d value / d tau_ik = (1/n) [ sqrt(q_k) + (g_k[i] - g_k . alpha_k)/sqrt(q_k) ]
        g_dot_alpha = np.diag(B) - aGu
        grad = (root[None, :] + ((GA - Gu[:, None]) - g_dot_alpha[None, :]) * inv[None, :]) / n
        grad = grad * (~cw.empty)[None, :]
        return value, grad

    # one-vs-one: Q_kl = (a_k - a_l)' G (a_k - a_l)
    diag = np.diag(B)
    Q = diag[:, None] + diag[None, :] - 2.0 * B
    np.fill_diagonal(Q, 0.0)
    Q, root, inv = _clamped_sqrt(Q, floor)
    np.fill_diagonal(root, 0.0)
    np.fill_diagonal(inv, 0.0)
    value = float(pi @ root @ pi)
    if not want_grad:
        return value, None
    # d value / d tau_im = (2/n) sum_{l != m} pi_l [ sqrt(Q_ml)
    #                       + (GA_im - GA_il - B_mm + B_ml)/sqrt(Q_ml) ]
    R = inv * pi[None, :]  # R[m, l] = pi_l / sqrt(Q_ml)
    rowsum = R.sum(axis=1)
    const = diag * rowsum - np.sum(R * B, axis=1)
    grad = (2.0 / n) * (
        (root @ pi)[None, :] + GA * rowsum[None, :] - GA @ R.T - const[None, :]
    )
    grad = grad * (~cw.empty)[None, :]
    return value, grad


def mmd_gemini(tau, gram: AffinityMatrix, mode: str, empty_cluster_rel: float = 1e-12) -> float:
    """MMD-based objective value for a row-stochastic tau."""
    _require_tag(gram, "gram")
    cw = cluster_weights(tau, empty_cluster_rel)
    value, _ = _mmd_core(cw, gram.matrix, mode, want_grad=False)
    return value


def _wasserstein_core(
    cw: ClusterWeights,
    dist: np.ndarray,
    mode: str,
    solver: OtSolverConfig,
    want_grad: bool,
    warm=None,
):
    n, k = cw.alpha.shape
    A = cw.alpha
    pi = cw.pi_effective

    if mode == "ova":
        W1 = A.T  # K x N
        W2 = np.full((k, n), 1.0 / n)
        values, F, G, _ = ot_distance_batch(W1, W2, dist, solver, warm=warm)
        value = float(pi @ values)
        if not want_grad:
            return value, None, (F, G)
        # d value / d tau_im = (1/n) [ v_m + f_m[i] - f_m . alpha_m ]
        inner = np.sum(F * W1, axis=1)
        grad = (values[None, :] + F.T - inner[None, :]) / n
        grad = grad * (~cw.empty)[None, :]
        return value, grad, (F, G)

    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    if not pairs:
        zero = np.zeros_like(A) if want_grad else None
        return 0.0, zero, None
    W1 = np.stack([A[:, a] for a, _ in pairs])
    W2 = np.stack([A[:, b] for _, b in pairs])
    values, F, G, _ = ot_distance_batch(W1, W2, dist, solver, warm=warm)
    vmat = np.zeros((k, k))
    for p, (a, b) in enumerate(pairs):
        vmat[a, b] = vmat[b, a] = values[p]
    value = float(pi @ vmat @ pi)
    if not want_grad:
        return value, None, (F, G)
    # d value / d tau_im = (2/n) sum_{l != m} pi_l [ v_ml + pot_ml[i] - pot_ml . alpha_m ]
    # where pot_ml is the potential attached to alpha_m in pair (m, l).
    grad = np.zeros((n, k))
    for p, (a, b) in enumerate(pairs):
        grad[:, a] += pi[b] * (values[p] + F[p] - float(F[p] @ A[:, a]))
        grad[:, b] += pi[a] * (values[p] + G[p] - float(G[p] @ A[:, b]))
    grad *= 2.0 / n
    grad = grad * (~cw.empty)[None, :]
    return value, grad, (F, G)


def wasserstein_gemini(
    tau,
    dist: AffinityMatrix,
    mode: str,
    solver: OtSolverConfig | None = None,
    empty_cluster_rel: float = 1e-12,
) -> float:
    """Wasserstein-based objective value for a row-stochastic tau."""
    _require_tag(dist, "distance")
    solver = solver or OtSolverConfig()
    cw = cluster_weights(tau, empty_cluster_rel)
    value, _, _ = _wasserstein_core(cw, dist.matrix, mode, solver, want_grad=False)
    return value


def gemini_value(tau, affinity: AffinityMatrix, spec: GeminiSpec, warm=None) -> float:
    value, _, _ = _dispatch(tau, affinity, spec, want_grad=False, warm=warm)
    return value


def gemini_value_and_grad(tau, affinity: AffinityMatrix, spec: GeminiSpec, warm=None):
    """Objective value, gradient w.r.t. tau, and reusable OT warm start."""
    return _dispatch(tau, affinity, spec, want_grad=True, warm=warm)


def gemini_grad(tau, affinity: AffinityMatrix, spec: GeminiSpec) -> np.ndarray:
    _, grad, _ = _dispatch(tau, affinity, spec, want_grad=True)
    return grad


def _dispatch(tau, affinity, spec, want_grad, warm=None):
    tau = np.asarray(tau, dtype=np.float64)
    cw = cluster_weights(tau, spec.empty_cluster_rel)
    if spec.family == "mmd":
        _require_tag(affinity, "gram")
        value, grad = _mmd_core(cw, affinity.matrix, spec.mode, want_grad)
        return value, grad, None
    _require_tag(affinity, "distance")
    return _wasserstein_core(cw, affinity.matrix, spec.mode, spec.ot, want_grad, warm=warm)
