"""Discrete optimal transport between reweighted empirical measures.

Two solvers back the Wasserstein objectives: an exact linear-program
route (scipy HiGHS, used for tests and small problems) and an
entropically regularized fixed point (the training default). Both
return dual potentials, which downstream code uses as the sensitivity
of the transport value to the marginal weights.

The entropic engine runs the kernel-scaling form with log-domain
absorption, so iterations are two matvecs; when the cost/regularization
ratio is extreme enough to underflow the kernel it falls back to plain
log-domain updates. Several problems sharing one cost matrix are solved
as a batch. The entropic value convention is the converged dual
objective <f, w1> + <g, w2> with reference measure w1 (x) w2; it
decreases to the exact value as the regularization shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ShapeError, SolverError

# kernel-scaling is numerically safe while max(cost)/eps stays moderate
_LOG_FALLBACK_RATIO = 500.0
_ABSORB_AT = 200.0  # |log scaling| triggering absorption


@dataclass(frozen=True)
class OtSolverConfig:
    """Solver selection and entropic settings.

    The regularization is relative: epsilon = epsilon_scale * mean(cost).
    """

    method: str = "entropic"  # "entropic" | "exact"
    epsilon_scale: float = 0.05
    max_iter: int = 50000
    tol: float = 1e-5

    def __post_init__(self):
        if self.method not in ("entropic", "exact"):
            raise ValueError(f"unknown OT method {self.method!r}")
        if self.method == "entropic" and self.epsilon_scale <= 0:
            raise ValueError("entropic regularization must be positive")


@dataclass
class OtResult:
    value: float
    f: np.ndarray
    g: np.ndarray
    residual: float
    iterations: int


def _check_marginal(w, n, name):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ShapeError(f"{name} has shape {w.shape}, expected ({n},)")
    if (w < 0).any():
        raise ValueError(f"{name} has negative entries")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def exact_ot(w1, w2, cost) -> OtResult:
    """Exact transport value and dual potentials via linear programming."""
    n, m = cost.shape
    rows = sparse.kron(sparse.eye(n, format="csr"), np.ones((1, m)), format="csr")
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m, format="csr"), format="csr")
    A = sparse.vstack([rows, cols], format="csr")
    b = np.concatenate([w1, w2])
    res = linprog(cost.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"exact OT solve failed: {res.message}")
    duals = np.asarray(res.eqlin.marginals, dtype=np.float64)
    f, g = duals[:n].copy(), duals[n:].copy()
    shift = float(f @ w1)
    return OtResult(float(res.fun), f - shift, g + shift, 0.0, 0)


def _logsumexp(mat, axis):
    mx = np.max(mat, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(mat - safe), axis=axis)) + np.squeeze(safe, axis=axis)
    return out


def _log_weights(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


def _sinkhorn_logdomain(logw1, logw2, cost, eps, max_iter, tol, w1, f0):
    """Plain log-domain updates on reference-form potentials; slow but
    immune to kernel underflow. Shapes are batched: P x N. Returns the
    combined row exponent log(w1) + f/eps plus gamma (g/eps)."""
    cs = cost[None] / eps
    phi = f0 / eps
    residual = np.full(phi.shape[0], np.inf)
    for it in range(1, max_iter + 1):
        gamma = -_logsumexp(logw1[:, :, None] + phi[:, :, None] - cs, axis=1)
        phi_new = -_logsumexp(logw2[:, None, :] + gamma[:, None, :] - cs, axis=2)
        with np.errstate(over="ignore"):
            residual = np.sum(w1 * np.abs(np.expm1(phi - phi_new)), axis=1)
        phi = phi_new
        if np.all(residual < tol):
            return logw1 + phi, residual, it
    raise SolverError(
        f"entropic OT did not reach tolerance {tol:g} in {max_iter} iterations",
        residual=float(np.max(residual)),
    )


def _build_kernel(A, B, cost, eps):
    expo = (A[:, :, None] + B[:, None, :] - cost[None]) / eps
    return np.exp(np.minimum(expo, 700.0))


def _sinkhorn_scaling(logw1, logw2, cost, eps, max_iter, tol, W1, W2, f0, g0):
    """Stabilized kernel-scaling iterations with absorption.

    Returns raw (possibly -inf at zero-mass atoms) potentials; callers
    finish with the c-transform completion below.
    """
    A = f0.copy()
    B = g0.copy()
    K = _build_kernel(A, B, cost, eps)
    u = np.ones_like(W1)
    v = np.ones_like(W2)
    residual = np.full(W1.shape[0], np.inf)
    converged = False
    it = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        Kv = np.einsum("pij,pj->pi", K, v)
        for it in range(1, max_iter + 1):
            u = W1 / Kv
            u[W1 == 0.0] = 0.0
            v = W2 / np.einsum("pij,pi->pj", K, u)
            v[W2 == 0.0] = 0.0
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                return None  # kernel degenerated; caller retries in log domain
            Kv = np.einsum("pij,pj->pi", K, v)
            # rows after the column-exactifying v update
            residual = np.sum(np.abs(u * Kv - W1), axis=1)
            if np.all(residual < tol):
                converged = True
                break
            lu = np.abs(np.log(np.where(u > 0, u, 1.0))).max() if u.size else 0.0
            lv = np.abs(np.log(np.where(v > 0, v, 1.0))).max() if v.size else 0.0
            if max(lu, lv) > _ABSORB_AT:
                A = A + eps * np.log(np.where(u > 0, u, 1.0)) + np.where(u > 0, 0.0, -np.inf)
                B = B + eps * np.log(np.where(v > 0, v, 1.0)) + np.where(v > 0, 0.0, -np.inf)
                K = _build_kernel(
                    np.where(np.isfinite(A), A, -1e30),
                    np.where(np.isfinite(B), B, -1e30),
                    cost,
                    eps,
                )
                u = np.ones_like(u)
                v = np.ones_like(v)
                Kv = np.einsum("pij,pj->pi", K, v)
    if not converged:
        raise SolverError(
            f"entropic OT did not reach tolerance {tol:g} in {max_iter} iterations",
            residual=float(np.max(residual)),
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        row_exponent = (A + eps * np.log(u)) / eps  # log(w1) + f/eps, -inf at dead atoms
    row_exponent[np.isnan(row_exponent)] = -np.inf
    return row_exponent, residual, it


def _complete_potentials(row_exponent, logw2, cost, eps):
    """One pair of c-transforms from the combined row exponent
    log(w1) + f/eps: yields reference-form potentials that are finite
    everywhere (including zero-mass atoms) with exact row marginals."""
    cs = cost[None] / eps
    g_fin = -eps * _logsumexp(row_exponent[:, :, None] - cs, axis=1)
    f_fin = -eps * _logsumexp(logw2[:, None, :] + (g_fin[:, None, :] / eps) - cs, axis=2)
    return f_fin, g_fin


def _entropic_batch(W1, W2, cost, eps, max_iter, tol, warm=None):
    """Batched entropic solve. `warm` carries reference-form potentials
    (F, G) from a previous solve of a nearby problem."""
    logw1 = _log_weights(W1)
    logw2 = _log_weights(W2)
    if warm is None:
        F0 = np.zeros_like(W1)
        G0 = np.zeros_like(W2)
    else:
        F0 = np.asarray(warm[0], dtype=np.float64)
        G0 = np.asarray(warm[1], dtype=np.float64)
    out = None
    if float(cost.max()) / eps <= _LOG_FALLBACK_RATIO:
        # scaling form folds the weights into the potentials
        out = _sinkhorn_scaling(
            logw1, logw2, cost, eps, max_iter, tol, W1, W2,
            F0 + eps * logw1, G0 + eps * logw2,
        )
    if out is None:
        out = _sinkhorn_logdomain(logw1, logw2, cost, eps, max_iter, tol, W1, F0)
    row_exponent, residual, iterations = out
    f, g = _complete_potentials(row_exponent, logw2, cost, eps)
    shift = np.sum(f * W1, axis=1, keepdims=True)
    f = f - shift
    g = g + shift
    values = np.sum(f * W1, axis=1) + np.sum(g * W2, axis=1)
    return values, f, g, residual, iterations


def ot_distance(w1, w2, cost, solver: OtSolverConfig, warm=None) -> OtResult:
    """Transport value and centered dual potentials between two weight
    vectors over the same support, with `cost` the pairwise ground cost."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ShapeError("cost must be a matrix")
    w1 = _check_marginal(w1, cost.shape[0], "w1")
    w2 = _check_marginal(w2, cost.shape[1], "w2")
    if solver.method == "exact":
        return exact_ot(w1, w2, cost)
    eps = solver.epsilon_scale * float(np.mean(cost))
    if eps == 0.0:
        # all-zero cost: any coupling is optimal at zero cost
        return OtResult(0.0, np.zeros_like(w1), np.zeros_like(w2), 0.0, 0)
    if warm is not None:
        warm = (np.asarray(warm[0])[None], np.asarray(warm[1])[None])
    values, f, g, residual, iterations = _entropic_batch(
        w1[None], w2[None], cost, eps, solver.max_iter, solver.tol, warm
    )
    return OtResult(float(values[0]), f[0], g[0], float(residual[0]), iterations)


def ot_distance_batch(W1, W2, cost, solver: OtSolverConfig, warm=None):
    """Solve P transport problems sharing one cost matrix.

    W1, W2 are P x N weight arrays. Returns (values, F, G, iterations)
    with potentials centered per problem.
    """
    cost = np.asarray(cost, dtype=np.float64)
    W1 = np.asarray(W1, dtype=np.float64)
    W2 = np.asarray(W2, dtype=np.float64)
    if solver.method == "exact":
        results = [exact_ot(W1[p], W2[p], cost) for p in range(W1.shape[0])]
        values = np.array([r.value for r in results])
        F = np.stack([r.f for r in results])
        G = np.stack([r.g for r in results])
        return values, F, G, 0
    eps = solver.epsilon_scale * float(np.mean(cost))
    if eps == 0.0:
        return np.zeros(W1.shape[0]), np.zeros_like(W1), np.zeros_like(W2), 0
    values, F, G, _, iterations = _entropic_batch(
        W1, W2, cost, eps, solver.max_iter, solver.tol, warm
    )
    return values, F, G, iterations
