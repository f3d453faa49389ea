"""Closed-form upper bounds on the coded multicast rate of random fractional
caching with greedy constrained coloring delivery.

Indices are 0-based. A design stores, per receiver ``k`` and file ``n``, the
caching distribution ``p[k, n]``, the cache size ``mu[k]`` and the storing
range ``omega[k, n]`` (the deliverable prefix length, bits/sample).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EnumerationCapError, InfeasibleDesignError, InvalidArgumentError

__all__ = [
    "CacheDesign",
    "BoundResult",
    "EXACT_SUBSET_CAP",
    "receiver_order",
    "lambda_i",
    "psi1_demand",
    "psi2_demand",
    "theorem1_bound",
    "gamma_i",
    "theorem2_expected_bound",
    "corollary1_bound",
    "corollary1_worst_case",
    "theorem3_expected_bound",
    "trf_psi1",
    "round_k_tilde",
]

EXACT_SUBSET_CAP = 16
_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CacheDesign:
    """Caching distributions, cache sizes and storing ranges of a network.

    Parameters
    ----------
    p : array_like, shape (K, N)
        Fraction of receiver ``k``'s cache given to file ``n``. Rows sum to at
        most 1 (a receiver may leave part of its cache unused).
    mu : array_like, shape (K,)
        Cache sizes.
    omega : array_like, shape (K, N)
        Storing ranges. Must be at least the cached amount ``p * mu``.
    """

    p: np.ndarray
    mu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float)).copy()
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float)).copy()
        if p.shape != omega.shape or mu.shape != (p.shape[0],):
            raise InvalidArgumentError("p and omega must be (K, N) and mu (K,)")
        if np.any(p < 0) or np.any(mu < 0) or np.any(omega < 0):
            raise InvalidArgumentError("p, mu and omega must be nonnegative")
        if np.any(p.sum(axis=1) > 1 + _TOL):
            raise InvalidArgumentError("caching distribution rows must sum to at most 1")
        cached = p * mu[:, None]
        if np.any(cached > omega * (1 + _TOL) + _TOL):
            k, n = np.argwhere(cached > omega * (1 + _TOL) + _TOL)[0]
            raise InfeasibleDesignError(
                f"receiver {k} caches {cached[k, n]:.6g} of file {n}, storing range is {omega[k, n]:.6g}"
            )
        for a in (p, mu, omega):
            a.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def symmetric(cls, K, p, mu, omega) -> "CacheDesign":
        """Every receiver shares the same ``p`` (N,), ``mu`` and ``omega`` (N,)."""
        p = np.asarray(p, dtype=float)
        omega = np.broadcast_to(np.asarray(omega, dtype=float), p.shape)
        return cls(np.tile(p, (K, 1)), np.full(K, float(mu)), np.tile(omega, (K, 1)))

    @classmethod
    def file_symmetric(cls, p_k, mu, omega_k, N) -> "CacheDesign":
        """Lift per-receiver ``p_k`` (per file), ``mu_k`` and ``omega_k`` to all ``N`` files."""
        p_k = np.asarray(p_k, dtype=float)
        omega_k = np.asarray(omega_k, dtype=float)
        return cls(np.repeat(p_k[:, None], N, axis=1), mu, np.repeat(omega_k[:, None], N, axis=1))

    @property
    def K(self) -> int:
        return self.p.shape[0]

    @property
    def N(self) -> int:
        return self.p.shape[1]

    @property
    def cache_alloc(self) -> np.ndarray:
        """Cached amount per (receiver, file), ``p * mu``."""
        return self.p * self.mu[:, None]

    @property
    def coded_rates(self) -> np.ndarray:
        return self.omega - self.cache_alloc

    @property
    def pc(self) -> np.ndarray:
        """Per-packet cache probability; 0 where the storing range is empty."""
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(self.omega > 0, (self.p * self.mu[:, None]) / self.omega, 0.0)
        return np.minimum(out, 1.0)


@dataclass(frozen=True)
class BoundResult:
    psi1: float
    psi2: float
    method: str = "exact"
    mc_stderr: float | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def bound(self) -> float:
        return min(self.psi1, self.psi2)

    def __float__(self):
        return float(self.bound)


def receiver_order(lengths) -> np.ndarray:
    """Ascending order of ``lengths``, ties by index."""
    return np.argsort(np.asarray(lengths, dtype=float), kind="stable")


def _check_demand(d, design):
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (design.K,) or np.any(d < 0) or np.any(d >= design.N):
        raise InvalidArgumentError("demand must hold one file index in [0, N) per receiver")
    return d


def lambda_i(K_ell, k, n, i, design: CacheDesign, order) -> float:
    """Probability a packet of file ``n`` wanted by ``k`` is cached exactly by ``K_ell - {k}``
    among the receivers ``order[i:]``."""
    tail = [int(u) for u in np.asarray(order)[i:]]
    K_ell = {int(u) for u in K_ell}
    if k not in K_ell or not K_ell <= set(tail):
        raise InvalidArgumentError("need k in K_ell and K_ell within the segment's receivers")
    pc = design.pc
    v = 1.0 - pc[k, n]
    for u in tail:
        if u == k:
            continue
        v *= pc[u, n] if u in K_ell else 1.0 - pc[u, n]
    return float(v)


def _subset_sum_mc(P, trials, rng):
    # sum over nonempty S of g(S) = (2^m - 1) E[g(S)], S uniform on nonempty subsets
    m = P.shape[0]
    bits = rng.random((trials, m)) < 0.5
    empty = ~bits.any(axis=1)
    while empty.any():
        bits[empty] = rng.random((int(empty.sum()), m)) < 0.5
        empty = ~bits.any(axis=1)
    eye = np.eye(m, dtype=bool)
    vals = np.empty(trials)
    for t in range(trials):
        S = bits[t]
        F = np.where(S[:, None] & ~eye, P, 1.0 - P)
        lam = np.prod(F, axis=0)
        vals[t] = np.max(np.where(S, lam, 0.0))
    scale = 2.0**m - 1.0
    return scale * vals.mean(), scale * vals.std(ddof=1) / math.sqrt(trials)


def psi1_demand(d, design: CacheDesign, exact_cap=EXACT_SUBSET_CAP, sample_trials=None, seed=0):
    """Label-counting term of the per-demand bound.

    Returns ``(value, stderr)``; ``stderr`` is 0 for exact evaluation. Beyond
    ``exact_cap`` receivers, the subset sum is estimated from
    ``sample_trials`` random subsets per segment, or
    :class:`EnumerationCapError` is raised when sampling is not requested.
    """
    d = _check_demand(d, design)
    K = design.K
    if K > exact_cap and not sample_trials:
        raise EnumerationCapError(
            f"K={K} exceeds the exact subset cap {exact_cap}; pass sample_trials or use the symmetric bound"
        )
    pc = design.pc
    lengths = design.omega[np.arange(K), d]
    chi = receiver_order(lengths)
    total, var = 0.0, 0.0
    prev = 0.0
    rng = np.random.default_rng([seed, 1])
    for i in range(K):
        width = lengths[chi[i]] - prev
        prev = lengths[chi[i]]
        if width <= 0:
            continue
        tail = chi[i:]
        P = pc[tail[:, None], d[tail][None, :]]
        if K > exact_cap:
            s, se = _subset_sum_mc(P, int(sample_trials), rng)
            var += (width * se) ** 2
        else:
            s = kernels.subset_max_sum(P)
        total += width * s
    return total, math.sqrt(var)


def psi2_demand(d, design: CacheDesign) -> float:
    """Uncoded (one stream per requested file) term of the per-demand bound."""
    d = _check_demand(d, design)
    M = design.cache_alloc
    total = 0.0
    for n in np.unique(d):
        ks = np.flatnonzero(d == n)
        total += design.omega[ks, n].max() - M[ks, n].min()
    return float(total)


def theorem1_bound(d, design: CacheDesign, **kw) -> BoundResult:
    """Per-demand rate bound ``min(psi1, psi2)``."""
    psi1, se = psi1_demand(d, design, **kw)
    method = "monte_carlo" if design.K > kw.get("exact_cap", EXACT_SUBSET_CAP) else "exact"
    return BoundResult(psi1, psi2_demand(d, design), method, se if method != "exact" else None)


# -- expected bounds ---------------------------------------------------------


def _argmax_probs(V, Q):
    """Probability that ``(k, n)`` attains ``max_k V[k, f_k]`` with ``f_k ~ Q[k]`` independent.

    Ties go to the smallest receiver row; within a row only one file is drawn.
    """
    m = V.shape[0]
    G = np.empty_like(V)
    for k in range(m):
        v = V[k][:, None]
        g = Q[k].copy()
        for j in range(m):
            if j == k:
                continue
            if j < k:
                g = g * (Q[j][None, :] * (V[j][None, :] < v)).sum(axis=1)
            else:
                g = g * (Q[j][None, :] * (V[j][None, :] <= v)).sum(axis=1)
        G[k] = g
    return G


def _lambda_matrix(S, tail, pc):
    # V[a, n] = lambda for receiver S[a] requesting file n
    others = [u for u in tail if u not in S]
    V = np.empty((len(S), pc.shape[1]))
    for a, k in enumerate(S):
        v = 1.0 - pc[k]
        for u in S:
            if u != k:
                v = v * pc[u]
        for u in others:
            v = v * (1.0 - pc[u])
        V[a] = v
    return V


def gamma_i(K_ell, k, n, i, design: CacheDesign, q, order) -> float:
    """Probability that receiver ``k`` requesting file ``n`` maximizes ``lambda_i`` over ``K_ell``.

    ``q`` is the (K, N) demand matrix; files of receivers in ``K_ell`` are
    independent draws from their rows. Ties go to the smaller receiver index,
    so the probabilities over ``(k, n)`` sum to one.
    """
    S = sorted(int(u) for u in K_ell)
    tail = [int(u) for u in np.asarray(order)[i:]]
    if k not in S or not set(S) <= set(tail):
        raise InvalidArgumentError("need k in K_ell and K_ell within the segment's receivers")
    q = np.asarray(q, dtype=float)
    V = _lambda_matrix(S, tail, design.pc)
    G = _argmax_probs(V, q[S])
    return float(G[S.index(k), n])


def theorem2_expected_bound(q, design: CacheDesign, exact_cap=EXACT_SUBSET_CAP, sample_trials=2000, seed=0) -> BoundResult:
    """Demand-averaged bound for heterogeneous receivers.

    The label term uses the relaxed per-receiver lengths ``max_n omega[k, n]``;
    within each receiver subset the expected maximum is computed exactly.
    Beyond ``exact_cap`` receivers the subset sum is sampled.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != design.p.shape:
        raise InvalidArgumentError("demand matrix must be (K, N)")
    K = design.K
    pc = design.pc
    star = design.omega.max(axis=1)
    chi = receiver_order(star)
    total, var = 0.0, 0.0
    prev = 0.0
    rng = np.random.default_rng([seed, 2])
    for i in range(K):
        width = star[chi[i]] - prev
        prev = star[chi[i]]
        if width <= 0:
            continue
        tail = sorted(int(u) for u in chi[i:])
        m = len(tail)

        def emax(S):
            V = _lambda_matrix(S, tail, pc)
            return float((V * _argmax_probs(V, q[S])).sum())

        if K <= exact_cap:
            s = 0.0
            for ell in range(1, m + 1):
                for S in itertools.combinations(tail, ell):
                    s += emax(list(S))
        else:
            vals = np.empty(sample_trials)
            for t in range(sample_trials):
                pick = rng.random(m) < 0.5
                while not pick.any():
                    pick = rng.random(m) < 0.5
                vals[t] = emax([u for u, b in zip(tail, pick) if b])
            s = (2.0**m - 1) * vals.mean()
            var += (width * (2.0**m - 1) * vals.std(ddof=1) / math.sqrt(sample_trials)) ** 2
        total += width * s
    reach = 1.0 - np.prod(1.0 - q, axis=0)
    psi2 = float(np.sum(reach * (design.omega.max(axis=0) - design.cache_alloc.min(axis=0))))
    exact = K <= exact_cap
    return BoundResult(total, psi2, "exact" if exact else "monte_carlo", None if exact else math.sqrt(var))


def corollary1_bound(d, p_k, mu, omega_k, N) -> BoundResult:
    """Per-demand bound when every receiver treats all files alike.

    ``p_k`` is the per-file caching fraction and ``omega_k`` the common
    storing range of receiver ``k``.
    """
    p_k = np.asarray(p_k, dtype=float)
    mu = np.asarray(mu, dtype=float)
    omega_k = np.asarray(omega_k, dtype=float)
    K = p_k.size
    if mu.shape != (K,) or omega_k.shape != (K,):
        raise InvalidArgumentError("p_k, mu and omega_k need one entry per receiver")
    if np.any(p_k * N > 1 + _TOL):
        raise InvalidArgumentError("per-file fraction times N must not exceed 1")
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (K,) or np.any(d < 0) or np.any(d >= N):
        raise InvalidArgumentError("demand must hold one file index in [0, N) per receiver")
    cached = p_k * mu
    if np.any(cached > omega_k * (1 + _TOL) + _TOL):
        raise InfeasibleDesignError("cached amount exceeds the storing range")
    with np.errstate(divide="ignore", invalid="ignore"):
        pc = np.minimum(np.where(omega_k > 0, cached / omega_k, 0.0), 1.0)
    chi = receiver_order(omega_k)
    psi1 = 0.0
    prev = 0.0
    for i in range(K):
        width = omega_k[chi[i]] - prev
        prev = omega_k[chi[i]]
        if width <= 0:
            continue
        tail = chi[i:]
        # the cache probability does not depend on the file
        P = np.repeat(pc[tail][:, None], tail.size, axis=1)
        psi1 += width * kernels.subset_max_sum(P)
    psi2 = 0.0
    for n in np.unique(d):
        ks = np.flatnonzero(d == n)
        psi2 += omega_k[ks].max() - cached[ks].min()
    return BoundResult(psi1, float(psi2))


def corollary1_worst_case(p_k, mu, omega_k, N, cap=10**5):
    """Largest per-demand bound over all ``N**K`` demands, with the maximizing demand."""
    K = len(p_k)
    if N**K > cap:
        raise EnumerationCapError(f"N**K = {N**K} demands exceeds the cap {cap}")
    best, arg = -1.0, None
    for d in itertools.product(range(N), repeat=K):
        b = corollary1_bound(d, p_k, mu, omega_k, N).bound
        if b > best:
            best, arg = b, np.array(d)
    return best, arg


def round_k_tilde(k_tilde: float) -> int:
    """Nearest integer, at least 1 when positive (half rounds up)."""
    if k_tilde <= 0:
        return 0
    return max(1, int(math.floor(k_tilde + 0.5 + 1e-9)))


def theorem3_expected_bound(q, mu, p, omega, K) -> BoundResult:
    """Demand-averaged bound for ``K`` symmetric receivers.

    Parameters
    ----------
    q, p, omega : array_like, shape (N,)
        Shared demand distribution, caching distribution and storing ranges.
    mu : float
        Common cache size.
    K : int
        Number of receivers.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    omega = np.broadcast_to(np.asarray(omega, dtype=float), q.shape)
    N = q.size
    if p.shape != (N,):
        raise InvalidArgumentError("p must have one entry per file")
    if np.any(p * mu > omega * (1 + _TOL) + _TOL):
        raise InfeasibleDesignError("cached amount exceeds the storing range")
    with np.errstate(divide="ignore", invalid="ignore"):
        pc = np.minimum(np.where(omega > 0, p * mu / omega, 0.0), 1.0)
    zeta = receiver_order(omega)
    psi1 = 0.0
    prev = 0.0
    k_raw, k_used = [], []
    for i in range(N):
        width = omega[zeta[i]] - prev
        prev = omega[zeta[i]]
        if width <= 0:
            continue
        tail = zeta[i:]
        mass = q[tail].sum()
        kt = K * mass
        kr = round_k_tilde(kt)
        k_raw.append(float(kt))
        k_used.append(kr)
        if kr == 0:
            continue
        qt = q[tail] / mass
        pt = pc[tail]
        s = 0.0
        for ell in range(1, kr + 1):
            lam = pt ** (ell - 1) * (1.0 - pt) ** (kr - ell + 1)
            # rank by lambda desc, index asc; the max of ell iid draws is n iff
            # all draws rank at or below n and at least one is n
            rank = np.lexsort((tail, -lam))
            below = np.cumsum(qt[rank][::-1])[::-1]
            gam = np.empty_like(qt)
            gam[rank] = below**ell - np.maximum(below - qt[rank], 0.0) ** ell
            s += math.comb(kr, ell) * float(np.dot(gam, lam))
        psi1 += width * s
    psi2 = float(np.sum((1.0 - (1.0 - q) ** K) * (omega - p * mu)))
    return BoundResult(psi1, psi2, diagnostics={"K_tilde": k_raw, "K_tilde_rounded": k_used})


def trf_psi1(M, N_tilde, R1, R2, G_tilde, K) -> float:
    """Jensen-simplified label term for truncated uniform caching.

    Uses the first-order limit ``K G R1`` for the cached group when ``M < 1e-9``.
    """
    if M < 0 or N_tilde < 1 or R1 < 0 or R2 < 0 or not -1e-12 <= G_tilde <= 1 + 1e-12:
        raise InvalidArgumentError("need M, R1, R2 >= 0, N_tilde >= 1 and G_tilde in [0, 1]")
    G_tilde = min(max(G_tilde, 0.0), 1.0)
    return float(kernels.trf_psi1_scalar(float(M), float(N_tilde), float(R1), float(R2), float(G_tilde), float(K)))
