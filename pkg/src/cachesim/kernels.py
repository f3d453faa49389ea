"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The ``*_nb`` functions are loop kernels compiled with numba; the ``*_np``
functions are vectorized numpy equivalents. The un-suffixed public names
dispatch on :data:`cachesim._accel.USE_NUMBA`. Both flavours must return
identical results up to floating point reassociation; the test-suite checks
them against each other.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

TWO_LN2 = 2.0 * np.log(2.0)

__all__ = [
    "waterfill",
    "waterfill_batch",
    "lcu_demand_distortions",
    "label_zip_colors",
    "subset_max_sum",
    "trf_psi1_scalar",
    "trf_grid",
]


# --------------------------------------------------------------------------
# reverse water-filling
#
# minimize  sum_n a_n 2^{-2 (base_n + x_n)}
# s.t.      sum_n cost_n x_n = budget,  x_n >= 0
#
# KKT: x_n = (h_n - L)^+ / 2 with h_n = log2(2 ln2 a_n / cost_n) - 2 base_n and
# L = log2(water level). The active set is found exactly by sorting h.
# --------------------------------------------------------------------------


@njit
def waterfill_nb(a, base, cost, budget):
    n = a.shape[0]
    h = np.empty(n)
    for i in range(n):
        if a[i] > 0.0:
            h[i] = np.log2(TWO_LN2 * a[i] / cost[i]) - 2.0 * base[i]
        else:
            h[i] = -np.inf
    order = np.argsort(-h, kind="mergesort")
    x = np.zeros(n)
    if budget <= 0.0:
        return x, h[order[0]]
    csum_ch = 0.0
    csum_c = 0.0
    level = -np.inf
    for j in range(n):
        i = order[j]
        if h[i] == -np.inf:
            break
        csum_ch += cost[i] * h[i]
        csum_c += cost[i]
        level = (csum_ch - 2.0 * budget) / csum_c
        nxt = h[order[j + 1]] if j + 1 < n else -np.inf
        if level >= nxt:
            break
    for i in range(n):
        if h[i] > level:
            x[i] = 0.5 * (h[i] - level)
    return x, level


@njit
def waterfill_batch_nb(A, Base, Cost, budgets):
    B, n = A.shape
    X = np.empty((B, n))
    levels = np.empty(B)
    for r in range(B):
        x, lev = waterfill_nb(A[r], Base[r], Cost[r], budgets[r])
        X[r] = x
        levels[r] = lev
    return X, levels


def waterfill_batch_np(A, Base, Cost, budgets):
    A = np.asarray(A, dtype=float)
    B, n = A.shape
    with np.errstate(divide="ignore"):
        H = np.where(A > 0, np.log2(TWO_LN2 * A / Cost) - 2.0 * Base, -np.inf)
    order = np.argsort(-H, axis=1, kind="stable")
    Hs = np.take_along_axis(H, order, axis=1)
    Cs = np.take_along_axis(np.broadcast_to(Cost, A.shape), order, axis=1)
    finite = np.isfinite(Hs)
    ch = np.cumsum(np.where(finite, Cs * Hs, 0.0), axis=1)
    cc = np.cumsum(np.where(finite, Cs, 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = (ch - 2.0 * budgets[:, None]) / cc
    nxt = np.concatenate([Hs[:, 1:], np.full((B, 1), -np.inf)], axis=1)
    ok = finite & (L >= nxt)
    j = np.argmax(ok, axis=1)
    rows = np.arange(B)
    level = np.where(ok[rows, j], L[rows, j], -np.inf)
    level = np.where(budgets > 0, level, Hs[:, 0])
    X = np.where(H > level[:, None], 0.5 * (H - level[:, None]), 0.0)
    X[budgets <= 0] = 0.0
    return X, level


def waterfill_np(a, base, cost, budget):
    X, level = waterfill_batch_np(
        np.asarray(a, float)[None, :],
        np.asarray(base, float)[None, :],
        np.asarray(cost, float)[None, :],
        np.array([float(budget)]),
    )
    return X[0], level[0]


# --------------------------------------------------------------------------
# LC-U delivery over a batch of demands
# --------------------------------------------------------------------------


@njit
def lcu_demand_distortions_nb(demands, cache_alloc, variances, budget):
    B, K = demands.shape
    out = np.empty(B)
    a = np.empty(K)
    base = np.empty(K)
    cost = np.ones(K)
    for r in range(B):
        for k in range(K):
            n = demands[r, k]
            a[k] = variances[n]
            base[k] = cache_alloc[k, n]
        x, _ = waterfill_nb(a, base, cost, budget)
        acc = 0.0
        for k in range(K):
            acc += a[k] * 2.0 ** (-2.0 * (base[k] + x[k]))
        out[r] = acc / K
    return out


def lcu_demand_distortions_np(demands, cache_alloc, variances, budget):
    B, K = demands.shape
    A = variances[demands]
    Base = cache_alloc[np.arange(K)[None, :], demands]
    X, _ = waterfill_batch_np(A, Base, np.ones_like(A), np.full(B, float(budget)))
    return np.mean(A * 2.0 ** (-2.0 * (Base + X)), axis=1)


# --------------------------------------------------------------------------
# label-grouped (GCC1) colouring: vertices sharing a key are zipped, one
# vertex per requester per colour, in ascending vertex order.
# --------------------------------------------------------------------------


@njit
def label_zip_colors_nb(keys, beta):
    V = keys.shape[0]
    colors = np.empty(V, dtype=np.int64)
    if V == 0:
        return colors, 0
    # one quicksort on (label, requester) packed into an int64, then ascending
    # vertex order restored inside each run; labels use at most 57 bits here
    comp = (keys << 6) | beta
    order = np.argsort(comp)
    s = 0
    for j in range(1, V + 1):
        if j == V or comp[order[j]] != comp[order[s]]:
            if j - s > 1:
                order[s:j] = np.sort(order[s:j])
            s = j
    base = 0
    group_width = 0
    rank = 0
    for j in range(V):
        v = order[j]
        if j == 0:
            rank = 0
        else:
            u = order[j - 1]
            if keys[v] != keys[u]:
                base += group_width
                group_width = 0
                rank = 0
            elif beta[v] != beta[u]:
                rank = 0
            else:
                rank += 1
        colors[v] = base + rank
        if rank + 1 > group_width:
            group_width = rank + 1
    return colors, base + group_width


def label_zip_colors_np(keys, beta):
    keys = np.asarray(keys, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.int64)
    V = keys.shape[0]
    if V == 0:
        return np.empty(0, dtype=np.int64), 0
    order = np.lexsort((np.arange(V), beta, keys))
    k_s, b_s = keys[order], beta[order]
    new_run = np.ones(V, dtype=bool)
    new_run[1:] = (k_s[1:] != k_s[:-1]) | (b_s[1:] != b_s[:-1])
    run_start = np.maximum.accumulate(np.where(new_run, np.arange(V), 0))
    rank = np.arange(V) - run_start
    new_key = np.ones(V, dtype=bool)
    new_key[1:] = k_s[1:] != k_s[:-1]
    key_id = np.cumsum(new_key) - 1
    width = np.zeros(key_id[-1] + 1, dtype=np.int64)
    np.maximum.at(width, key_id, rank + 1)
    base = np.concatenate([[0], np.cumsum(width)[:-1]])
    colors = np.empty(V, dtype=np.int64)
    colors[order] = base[key_id] + rank
    return colors, int(width.sum())


# --------------------------------------------------------------------------
# per-segment subset sum of the coded-multicast bound:
#   sum over nonempty S of max_{k in S} (1-P[k,k]) prod_{u in S\k} P[u,k]
#                                       prod_{u notin S} (1-P[u,k])
# where P[u, k] is the cache probability at member u of the file wanted by k.
# --------------------------------------------------------------------------


@njit
def subset_max_sum_nb(P):
    m = P.shape[0]
    total = 0.0
    for S in range(1, 1 << m):
        best = 0.0
        for k in range(m):
            if (S >> k) & 1:
                v = 1.0 - P[k, k]
                for u in range(m):
                    if u == k:
                        continue
                    if (S >> u) & 1:
                        v *= P[u, k]
                    else:
                        v *= 1.0 - P[u, k]
                if v > best:
                    best = v
        total += best
    return total


def subset_max_sum_np(P, chunk=4096):
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    eye = np.eye(m, dtype=bool)
    total = 0.0
    for start in range(1, 1 << m, chunk):
        S = np.arange(start, min(start + chunk, 1 << m))
        bits = ((S[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
        take_pc = bits[:, :, None] & ~eye[None, :, :]
        F = np.where(take_pc, P[None, :, :], 1.0 - P[None, :, :])
        lam = np.prod(F, axis=1)
        lam = np.where(bits, lam, 0.0)
        total += lam.max(axis=1).sum()
    return total


# --------------------------------------------------------------------------
# TRF design search
# --------------------------------------------------------------------------


@njit
def trf_psi1_scalar(M, n_tilde, r1, r2, g_tilde, K):
    # R1 (M + N R1) / M * (1 - (N R1 / (M + N R1))^(K G)), written through the
    # cache probability pc = M / (M + N R1) as R1 (1 - (1 - pc)^(K G)) / pc
    kg = K * g_tilde
    if M < 1e-9:
        first = kg * r1
    elif r1 <= 0.0 or kg <= 0.0:
        first = 0.0
    else:
        pc = M / (M + n_tilde * r1)
        first = r1 * -math.expm1(kg * math.log1p(-pc)) / pc
    return first + K * (1.0 - g_tilde) * r2


@njit
def trf_grid_nb(a, cost, in_g1, M, n_tilde, K, g_tilde, c1, c2, R, r1_values, r2_values):
    n = a.shape[0]
    n1 = r1_values.shape[0]
    n2 = r2_values.shape[0]
    D = np.full((n1, n2), np.inf)
    used = np.empty((n1, n2))
    m_tilde = M / n_tilde
    base = np.empty(n)
    for i in range(n1):
        r1 = r1_values[i]
        for j in range(n2):
            r2 = r2_values[j]
            u = min(trf_psi1_scalar(M, n_tilde, r1, r2, g_tilde, K), c1 * r1 + c2 * r2)
            used[i, j] = u
            if u > R:
                continue
            for t in range(n):
                base[t] = m_tilde + r1 if in_g1[t] else r2
            x, _ = waterfill_nb(a, base, cost, R - u)
            acc = 0.0
            for t in range(n):
                acc += a[t] * 2.0 ** (-2.0 * (base[t] + x[t]))
            D[i, j] = acc
    return D, used


def trf_psi1_np(M, n_tilde, r1, r2, g_tilde, K):
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    kg = K * g_tilde
    if M < 1e-9:
        first = kg * r1
    elif kg <= 0.0:
        first = np.zeros_like(r1)
    else:
        pc = M / (M + n_tilde * r1)
        with np.errstate(divide="ignore", invalid="ignore"):
            first = np.where(r1 > 0, r1 * -np.expm1(kg * np.log1p(-pc)) / pc, 0.0)
    return first + K * (1.0 - g_tilde) * r2


def trf_grid_np(a, cost, in_g1, M, n_tilde, K, g_tilde, c1, c2, R, r1_values, r2_values):
    R1, R2 = np.meshgrid(r1_values, r2_values, indexing="ij")
    used = np.minimum(trf_psi1_np(M, n_tilde, R1, R2, g_tilde, K), c1 * R1 + c2 * R2)
    D = np.full(R1.shape, np.inf)
    ok = used <= R
    if ok.any():
        r1, r2, u = R1[ok], R2[ok], used[ok]
        Base = np.where(in_g1[None, :], M / n_tilde + r1[:, None], r2[:, None])
        A = np.broadcast_to(a, Base.shape)
        X, _ = waterfill_batch_np(A, Base, np.broadcast_to(cost, Base.shape), R - u)
        D[ok] = np.sum(A * 2.0 ** (-2.0 * (Base + X)), axis=1)
    return D, used


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

_IMPL = {
    True: dict(
        waterfill=waterfill_nb,
        waterfill_batch=waterfill_batch_nb,
        lcu=lcu_demand_distortions_nb,
        zip=label_zip_colors_nb,
        subset=subset_max_sum_nb,
        trf=trf_grid_nb,
    ),
    False: dict(
        waterfill=waterfill_np,
        waterfill_batch=waterfill_batch_np,
        lcu=lcu_demand_distortions_np,
        zip=label_zip_colors_np,
        subset=subset_max_sum_np,
        trf=trf_grid_np,
    ),
}[USE_NUMBA]


def _f(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def waterfill(a, base, cost, budget):
    """Single reverse water-filling problem; returns ``(x, log2_level)``."""
    a = _f(a)
    return _IMPL["waterfill"](
        a, _f(np.broadcast_to(base, a.shape)), _f(np.broadcast_to(cost, a.shape)), float(budget)
    )


def waterfill_batch(A, Base, Cost, budgets):
    """Row-wise water-filling. ``Base``, ``Cost`` and ``budgets`` broadcast."""
    A = _f(A)
    return _IMPL["waterfill_batch"](
        A,
        _f(np.broadcast_to(Base, A.shape)),
        _f(np.broadcast_to(Cost, A.shape)),
        _f(np.broadcast_to(budgets, A.shape[:1])),
    )


def lcu_demand_distortions(demands, cache_alloc, variances, budget):
    return _IMPL["lcu"](
        np.ascontiguousarray(demands, dtype=np.int64), _f(cache_alloc), _f(variances), float(budget)
    )


def label_zip_colors(keys, beta):
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    beta = np.ascontiguousarray(beta, dtype=np.int64)
    if keys.size and int(keys.max()) >= 1 << 57:
        return label_zip_colors_np(keys, beta)  # too wide for the packed sort key
    return _IMPL["zip"](keys, beta)


def subset_max_sum(P):
    return float(_IMPL["subset"](_f(P)))


def trf_grid(a, cost, in_g1, M, n_tilde, K, g_tilde, c1, c2, R, r1_values, r2_values):
    return _IMPL["trf"](
        _f(a),
        _f(cost),
        np.ascontiguousarray(in_g1, dtype=np.bool_),
        float(M),
        float(n_tilde),
        float(K),
        float(g_tilde),
        float(c1),
        float(c2),
        float(R),
        _f(r1_values),
        _f(r2_values),
    )
