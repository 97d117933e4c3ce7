"""Group-lasso penalty and the hierarchical proximal operator.

Per feature j the operator solves

    min_{v,u}  1/2 ||v - b||^2 + 1/2 ||u - a||^2 + t ||v||_2
    s.t.       ||u||_inf <= M ||v||_2

where b is the skip column, a the first-layer column reading feature j,
t the step-scaled penalty and M the hierarchy coefficient. Eliminated
features come out with bitwise-zero parameters, so the active set is a
plain nonzero test with no epsilon.
"""

from __future__ import annotations

import numpy as np


def group_penalty(S: np.ndarray) -> float:
    """Sum of column l2 norms of the skip matrix."""
    return float(np.linalg.norm(S, axis=0).sum())


def prox_objective(b, a, v, u, threshold) -> float:
    """Value of the per-feature prox objective at (v, u)."""
    b, a, v, u = (np.asarray(x, dtype=np.float64) for x in (b, a, v, u))
    return float(
        0.5 * np.sum((v - b) ** 2)
        + 0.5 * np.sum((u - a) ** 2)
        + threshold * np.linalg.norm(v)
    )


def _cap_profile(cap, bnorm, abs_a, threshold, M):
    """Prox objective as a function of the cap t = M * ||v||_2 (M > 0)."""
    s = cap / M
    return (
        0.5 * (bnorm - s) ** 2
        + threshold * s
        + 0.5 * np.sum(np.maximum(abs_a - cap, 0.0) ** 2)
    )


def _select_cap(bnorm, abs_a_desc, threshold, M):
    """Cap value for one feature from the sorted segment scan.

    For each candidate count m of uncapped leading entries, the segment
    stationary point is

        w_m = M / (1 + m M^2) * max(||b|| + M * sum_{i<=m} |a|_(i) - t, 0)

    and the first m whose w_m lands inside its own segment wins. Exact
    breakpoint minimizers can leave every segment invalid in floating
    point; then the best clipped candidate is taken instead.
    """
    h = abs_a_desc.shape[0]
    csum = np.concatenate(([0.0], np.cumsum(abs_a_desc)))
    m = np.arange(h + 1)
    wm = (M / (1.0 + m * M * M)) * np.maximum(bnorm + M * csum - threshold, 0.0)
    upper = np.concatenate(([np.inf], abs_a_desc))
    lower = np.concatenate((abs_a_desc, [0.0]))
    valid = (upper >= wm) & (wm >= lower)
    if valid.any():
        return wm[int(np.argmax(valid))]
    cands = np.clip(wm, lower, np.minimum(upper, np.finfo(np.float64).max))
    vals = [_cap_profile(c, bnorm, abs_a_desc, threshold, M) for c in cands]
    return cands[int(np.argmin(vals))]


def hier_prox(b, a, threshold, hierarchy):
    """Proximal update of one (skip column, first-layer column) pair.

    Returns (v, u). With hierarchy == 0 the constraint forces u = 0 and
    v is the l2 soft threshold of b. A zero skip column is never
    resurrected: if ||b|| == 0 the output keeps v = 0 and caps u at the
    segment-scan value, so an eliminated feature stays eliminated.
    """
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if threshold < 0 or hierarchy < 0:
        raise ValueError("threshold and hierarchy coefficient must be nonnegative")
    bnorm = float(np.linalg.norm(b))

    if hierarchy == 0.0:
        u = np.zeros_like(a)
        if bnorm <= threshold:
            return np.zeros_like(b), u
        return b * (1.0 - threshold / bnorm), u

    abs_a = np.abs(a)
    order = np.argsort(-abs_a, kind="stable")
    w = float(_select_cap(bnorm, abs_a[order], threshold, hierarchy))
    if w <= 0.0:
        return np.zeros_like(b), np.zeros_like(a)
    if bnorm > 0.0:
        v = b * (w / (hierarchy * bnorm))
        # cap at the realized bound so feasibility holds exactly
        cap = hierarchy * float(np.linalg.norm(v))
    else:
        v = np.zeros_like(b)
        cap = w
    return v, np.sign(a) * np.minimum(abs_a, cap)


def hier_prox_columns(B, A, threshold, hierarchy):
    """Vectorized hier_prox over all feature columns.

    B is the K x d skip matrix, A the h x d first-layer weight matrix.
    Returns the updated (B, A) pair; eliminated columns are exactly zero.
    """
    B = np.asarray(B, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    K, d = B.shape
    h = A.shape[0]
    bnorm = np.linalg.norm(B, axis=0)

    if hierarchy == 0.0:
        scale = np.zeros(d)
        pos = bnorm > threshold
        scale[pos] = 1.0 - threshold / bnorm[pos]
        return B * scale[None, :], np.zeros_like(A)

    abs_a = np.abs(A)
    asort = -np.sort(-abs_a, axis=0)
    csum = np.vstack([np.zeros(d), np.cumsum(asort, axis=0)])
    m = np.arange(h + 1)[:, None]
    wm = (hierarchy / (1.0 + m * hierarchy * hierarchy)) * np.maximum(
        bnorm[None, :] + hierarchy * csum - threshold, 0.0
    )
    upper = np.vstack([np.full((1, d), np.inf), asort])
    lower = np.vstack([asort, np.zeros((1, d))])
    valid = (upper >= wm) & (wm >= lower)
    has_valid = valid.any(axis=0)
    w = wm[np.argmax(valid, axis=0), np.arange(d)]
    for j in np.where(~has_valid)[0]:
        w[j] = _select_cap(bnorm[j], asort[:, j], threshold, hierarchy)

    B_new = np.zeros_like(B)
    A_new = np.zeros_like(A)
    alive = w > 0.0
    withdir = alive & (bnorm > 0.0)
    B_new[:, withdir] = B[:, withdir] * (
        w[withdir] / (hierarchy * bnorm[withdir])
    )[None, :]
    cap = np.where(withdir, hierarchy * np.linalg.norm(B_new, axis=0), w)
    cols = alive
    A_new[:, cols] = np.sign(A[:, cols]) * np.minimum(abs_a[:, cols], cap[None, cols])
    return B_new, A_new


def apply_prox(model, threshold, hierarchy=None):
    """Apply hier_prox feature-wise to a skip-connected model in place.

    Afterwards every first-layer column obeys the hierarchy bound and
    eliminated features are bitwise zero in both the skip matrix and the
    first layer.
    """
    M = model.hierarchy if hierarchy is None else hierarchy
    B, A = hier_prox_columns(model.skip, model.mlp[0].weight, threshold, M)
    model.skip = B
    model.mlp[0].weight = A
    return model


def active_set(model) -> tuple[int, ...]:
    """Indices of features with a nonzero skip column (exact-zero test)."""
    return tuple(int(j) for j in np.flatnonzero(np.any(model.skip != 0.0, axis=0)))
