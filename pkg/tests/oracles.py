"""Independent reference implementations used only by the test suite.

Everything here is deliberately written with a different algorithm (or
plain loops) than the package code it checks, so agreement is evidence
rather than tautology.
"""

from __future__ import annotations

import numpy as np


def pair_agreement_ari(labels, preds) -> float:
    """ARI from explicit pair counting over all sample pairs."""
    labels = np.asarray(labels).ravel()
    preds = np.asarray(preds).ravel()
    n = len(labels)
    n11 = n10 = n01 = n00 = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_l = labels[i] == labels[j]
            same_p = preds[i] == preds[j]
            if same_l and same_p:
                n11 += 1
            elif same_l:
                n10 += 1
            elif same_p:
                n01 += 1
            else:
                n00 += 1
    num = 2 * (n11 * n00 - n10 * n01)
    den = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00)
    if den == 0:
        return 1.0 if n10 == 0 and n01 == 0 else 0.0
    return num / den


def naive_mmd(tau, gram, mode, empty_rel=1e-12) -> float:
    """Direct loop evaluation of the MMD objectives."""
    tau = np.asarray(tau, dtype=np.float64)
    gram = np.asarray(gram, dtype=np.float64)
    n, k = tau.shape
    mass = tau.sum(axis=0)
    pi = mass / n
    alive = mass > empty_rel * n

    def quad(w):
        q = 0.0
        for i in range(n):
            for j in range(n):
                q += w[i] * w[j] * gram[i, j]
        return max(q, 0.0)

    value = 0.0
    if mode == "ova":
        u = np.full(n, 1.0 / n)
        for a in range(k):
            if not alive[a]:
                continue
            value += pi[a] * np.sqrt(quad(tau[:, a] / mass[a] - u))
    else:
        for a in range(k):
            for b in range(k):
                if a == b or not (alive[a] and alive[b]):
                    continue
                value += pi[a] * pi[b] * np.sqrt(quad(tau[:, a] / mass[a] - tau[:, b] / mass[b]))
    return value


def transport_ssp(w1, w2, cost, tol=1e-13):
    """Exact transportation value by successive shortest augmenting
    paths on the bipartite residual graph (Bellman-Ford inside)."""
    w1 = np.asarray(w1, dtype=np.float64).copy()
    w2 = np.asarray(w2, dtype=np.float64).copy()
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    flow = np.zeros((n, m))
    supply = w1.copy()
    demand = w2.copy()

    while supply.sum() > tol:
        # nodes: sources 0..n-1, sinks n..n+m-1
        dist = np.full(n + m, np.inf)
        parent = [None] * (n + m)
        for i in range(n):
            if supply[i] > tol:
                dist[i] = 0.0
        for _ in range(n + m):
            changed = False
            for i in range(n):
                if not np.isfinite(dist[i]):
                    continue
                for j in range(m):
                    if dist[i] + cost[i, j] < dist[n + j] - 1e-15:
                        dist[n + j] = dist[i] + cost[i, j]
                        parent[n + j] = i
                        changed = True
            for j in range(m):
                if not np.isfinite(dist[n + j]):
                    continue
                for i in range(n):
                    if flow[i, j] > tol and dist[n + j] - cost[i, j] < dist[i] - 1e-15:
                        dist[i] = dist[n + j] - cost[i, j]
                        parent[i] = n + j
                        changed = True
            if not changed:
                break
        sinks = [j for j in range(m) if demand[j] > tol]
        t = min(sinks, key=lambda j: dist[n + j])
        # walk back collecting the path and its bottleneck
        path = []
        node = n + t
        while parent[node] is not None:
            path.append((parent[node], node))
            node = parent[node]
        amount = min(supply[node], demand[t])
        for u, v in path:
            if u >= n:  # backward arc, limited by existing flow
                amount = min(amount, flow[v, u - n])
        for u, v in path:
            if u < n:
                flow[u, v - n] += amount
            else:
                flow[v, u - n] -= amount
        supply[node] -= amount
        demand[t] -= amount
    return float((flow * cost).sum())


def prox_profile_objective(b, a, threshold, hierarchy, iters=300):
    """Best prox objective by golden-section search over the 1-D convex
    profile in s = ||v||; the inner (v, u) are closed form given s."""
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    abs_a = np.abs(a)

    def phi(s):
        cap = hierarchy * s
        return (
            0.5 * (bnorm - s) ** 2
            + threshold * s
            + 0.5 * np.sum(np.maximum(abs_a - cap, 0.0) ** 2)
        )

    hi = bnorm + 1.0
    if hierarchy > 0 and abs_a.size:
        hi = max(hi, abs_a.max() / hierarchy + 1.0)
    lo = 0.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = phi(x1), phi(x2)
    for _ in range(iters):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = phi(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = phi(x2)
    return min(phi(lo), phi(hi), f1, f2, phi(0.0))


def straight_line_forward(model, x):
    """Forward pass of one sample via explicit loops (no broadcasting)."""
    h = [float(v) for v in x]
    for layer in model.mlp:
        out = []
        rows, cols = layer.weight.shape
        for r in range(rows):
            acc = float(layer.bias[r])
            for c in range(cols):
                acc += float(layer.weight[r, c]) * h[c]
            out.append(acc)
        if layer.activation == "relu":
            out = [max(v, 0.0) for v in out]
        h = out
    skip = []
    for r in range(model.skip.shape[0]):
        acc = 0.0
        for c in range(model.skip.shape[1]):
            acc += float(model.skip[r, c]) * float(x[c])
        skip.append(acc)
    return np.array([hv + sv for hv, sv in zip(h, skip)])


def central_diff(fun, x0, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return grad
