"""Slow, independent reference implementations used to cross-check the fast paths.

Nothing here shares code with the production solvers beyond the data model.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

LN2 = math.log(2.0)


def _project(y, h, cost, budget):
    # argmin_z sum h/2 (z - y)^2  s.t. z >= 0, cost.z = budget, by bisection on the multiplier
    def total(nu):
        return float(np.dot(cost, np.maximum(y - nu * cost / h, 0.0)))

    lo, hi = -1.0, 1.0
    while total(lo) < budget:
        lo *= 2.0
    while total(hi) > budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) > budget:
            lo = mid
        else:
            hi = mid
    return np.maximum(y - 0.5 * (lo + hi) * cost / h, 0.0)


def convex_oracle(a, base, cost, budget, iters=300):
    """Minimize ``sum a 2^(-2(base + x))`` over ``x >= 0``, ``cost.x = budget``.

    Diagonally scaled projected gradient with Armijo backtracking. Returns
    ``(x, objective)``.
    """
    a = np.asarray(a, float)
    base = np.broadcast_to(np.asarray(base, float), a.shape)
    cost = np.broadcast_to(np.asarray(cost, float), a.shape)

    def f(x):
        return float(np.sum(a * np.exp2(-2.0 * (base + x))))

    if budget <= 0:
        return np.zeros_like(a), f(np.zeros_like(a))
    x = np.full(a.shape, budget / cost.sum())
    fx = f(x)
    for _ in range(iters):
        e = a * np.exp2(-2.0 * (base + x))
        g = -2.0 * LN2 * e
        h = 4.0 * LN2 * LN2 * e + 1e-12
        z = _project(x - g / h, h, cost, budget)
        step = z - x
        slope = float(np.dot(g, step))
        if slope > -1e-18:
            break
        t = 1.0
        while f(x + t * step) > fx + 1e-4 * t * slope and t > 1e-12:
            t *= 0.5
        x = x + t * step
        fx = f(x)
    return x, fx


def lcu_enumeration_oracle(instance, cache_rows=None):
    """Exact LC-U expected distortion by enumerating every demand, each
    subproblem solved by :func:`convex_oracle`."""
    K, N = instance.K, instance.N
    var = instance.variances
    q = instance.demand_matrix
    if cache_rows is None:
        cache_rows = np.vstack(
            [convex_oracle(q[k] * var, 0.0, 1.0, instance.cache_sizes[k])[0] for k in range(K)]
        )
    total = 0.0
    for d in itertools.product(range(N), repeat=K):
        w = float(np.prod([q[k, d[k]] for k in range(K)]))
        if w == 0:
            continue
        _, obj = convex_oracle(var[list(d)], cache_rows[np.arange(K), list(d)], 1.0, instance.rate_budget)
        total += w * obj / K
    return total


# -- bounds ----------------------------------------------------------------------


def psi1_literal(d, design):
    """Per-demand label term written as the literal triple sum over segments,
    subset sizes and subsets."""
    K = design.K
    pc = design.pc
    lengths = [design.omega[k, d[k]] for k in range(K)]
    chi = sorted(range(K), key=lambda k: (lengths[k], k))
    total = 0.0
    for i in range(K):
        width = lengths[chi[i]] - (lengths[chi[i - 1]] if i else 0.0)
        tail = chi[i:]
        for ell in range(1, len(tail) + 1):
            for S in itertools.combinations(tail, ell):
                best = 0.0
                for k in S:
                    n = d[k]
                    lam = 1.0 - pc[k, n]
                    for u in tail:
                        if u == k:
                            continue
                        lam *= pc[u, n] if u in S else 1.0 - pc[u, n]
                    best = max(best, lam)
                total += width * best
    return total


def expected_psi1_enumeration(q, design):
    """Exact demand average of the per-demand label term."""
    from .bounds import psi1_demand

    K, N = design.K, design.N
    out = 0.0
    for d in itertools.product(range(N), repeat=K):
        w = float(np.prod([q[k, d[k]] for k in range(K)]))
        if w:
            out += w * psi1_demand(np.array(d), design)[0]
    return out


def gamma_enumeration(S, tail, design, q):
    """Argmax probabilities of the label term over all sub-demands of ``S``,
    ties to the smallest receiver index. Returns a dict ``(k, n) -> prob``."""
    pc = design.pc
    out = {}
    for f in itertools.product(range(design.N), repeat=len(S)):
        w = float(np.prod([q[k, n] for k, n in zip(S, f)]))
        best, arg = -1.0, None
        for k, n in sorted(zip(S, f)):
            lam = 1.0 - pc[k, n]
            for u in tail:
                if u != k:
                    lam *= pc[u, n] if u in S else 1.0 - pc[u, n]
            if lam > best:
                best, arg = lam, (k, n)
        out[arg] = out.get(arg, 0.0) + w
    return out


def theorem3_gamma_enumeration(qt, lam, ell):
    """Argmax probabilities over ``ell`` iid file draws (ties to the lowest position)."""
    m = len(qt)
    g = np.zeros(m)
    for f in itertools.product(range(m), repeat=ell):
        w = float(np.prod([qt[j] for j in f]))
        j = min(f, key=lambda t: (-lam[t], t))
        g[j] += w
    return g


def uncoded_expected_rate(q, design):
    """Exact demand average of the uncoded term when its max/min run over all receivers."""
    K, N = design.K, design.N
    M = design.cache_alloc
    out = 0.0
    for d in itertools.product(range(N), repeat=K):
        w = float(np.prod([q[k, d[k]] for k in range(K)]))
        for n in set(d):
            out += w * (design.omega[:, n].max() - M[:, n].min())
    return out


# -- colouring ---------------------------------------------------------------------


def chromatic_coloring(adj) -> np.ndarray:
    """Minimum colouring of a small graph given as a boolean matrix, by backtracking."""
    adj = np.asarray(adj, bool)
    V = adj.shape[0]
    if V == 0:
        return np.empty(0, dtype=np.int64)
    order = sorted(range(V), key=lambda v: -adj[v].sum())
    nbrs = [np.flatnonzero(adj[v]) for v in range(V)]

    def attempt(k):
        col = [-1] * V

        def go(j, top):
            if j == V:
                return True
            v = order[j]
            used = {col[u] for u in nbrs[v] if col[u] >= 0}
            # colours are interchangeable: never open more than one new colour
            for c in range(min(k, top + 1)):
                if c not in used:
                    col[v] = c
                    if go(j + 1, max(top, c + 1)):
                        return True
            col[v] = -1
            return False

        return col if go(0, 0) else None

    for k in range(1, V + 1):
        col = attempt(k)
        if col is not None:
            return np.array(col, dtype=np.int64)
    raise AssertionError("unreachable")


def chromatic_number(adj) -> int:
    col = chromatic_coloring(adj)
    return int(col.max()) + 1 if col.size else 0
