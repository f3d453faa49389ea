"""Cross-checks of the fast paths against the slow oracles.

Each check returns a :class:`CheckResult`. The pieces under test can be
swapped out through keyword arguments, which is how the mutation smoke
tests confirm that a check is able to fail.
"""

from __future__ import annotations

import itertools
from typing import Callable, NamedTuple

import numpy as np

from . import oracles
from .bounds import (
    CacheDesign,
    corollary1_bound,
    lambda_i,
    psi1_demand,
    receiver_order,
    theorem1_bound,
    theorem2_expected_bound,
    theorem3_expected_bound,
)
from .ccm import multicast_cost, uncoded_residual_waterfill, uniform_constraint
from .lcu import lcu_cache_allocation, lcu_delivery_rates, lcu_cache_allocations
from .model import NetworkInstance
from .rfgcc import (
    EXHAUSTIVE_MAX_VERTICES,
    SimParams,
    build_conflict_graph,
    coloring_is_valid,
    gcc_delivery,
    packet_demand,
    random_fill_caches,
    verify_decodable,
)

__all__ = ["CheckResult", "CHECKS", "run_all", "psi1_from_lambda"]


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


def _random_instance(rng, K_max=6, N_max=8):
    K = int(rng.integers(1, K_max + 1))
    N = int(rng.integers(1, N_max + 1))
    q = rng.dirichlet(np.ones(N), size=K)
    var = rng.uniform(0.2, 3.0, N)
    M = rng.uniform(0.0, 4.0, K)
    return NetworkInstance.build(M, q, var, float(rng.uniform(0.0, 5.0)))


def _random_design(rng, K, N, uniform_ranges=False):
    p = rng.dirichlet(np.ones(N), size=K) * rng.uniform(0.5, 1.0, (K, 1))
    mu = rng.uniform(0.5, 3.0, K)
    if uniform_ranges:
        omega = np.repeat(rng.uniform(0.5, 2.0, (K, 1)), N, axis=1)
    else:
        omega = rng.uniform(0.5, 2.0, (K, N))
    omega = np.maximum(omega, p * mu[:, None])
    if uniform_ranges:
        omega = np.repeat(omega.max(axis=1, keepdims=True), N, axis=1)
    return CacheDesign(p, mu, omega)


def check_lcu_cache(n=100, seed=11, tol=1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        inst = _random_instance(rng)
        for r in inst.receivers:
            a = r.demand * inst.variances
            x, _ = lcu_cache_allocation(r, inst.files)
            _, ref = oracles.convex_oracle(a, 0.0, 1.0, r.cache_size)
            worst = max(worst, abs(float(np.sum(a * np.exp2(-2 * x))) - ref))
    return CheckResult("lcu cache vs convex oracle", bool(worst <= tol), f"max abs diff {worst:.2e}")


def check_lcu_delivery(n=100, seed=12, tol=1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        inst = _random_instance(rng)
        cache = lcu_cache_allocations(inst)
        d = rng.integers(0, inst.N, inst.K)
        base = cache.allocations[np.arange(inst.K), d]
        a = inst.variances[d]
        x = lcu_delivery_rates(d, cache, inst.rate_budget, inst.files).rates
        _, ref = oracles.convex_oracle(a, base, 1.0, inst.rate_budget)
        worst = max(worst, abs(float(np.sum(a * np.exp2(-2 * (base + x)))) - ref))
    return CheckResult("lcu delivery vs convex oracle", bool(worst <= tol), f"max abs diff {worst:.2e}")


def psi1_from_lambda(d, design: CacheDesign, lam: Callable = lambda_i) -> float:
    """Label term assembled from a ``lambda_i``-style function by brute force."""
    K = design.K
    lengths = design.omega[np.arange(K), d]
    order = receiver_order(lengths)
    total, prev = 0.0, 0.0
    for i in range(K):
        width = lengths[order[i]] - prev
        prev = lengths[order[i]]
        tail = [int(u) for u in order[i:]]
        for ell in range(1, len(tail) + 1):
            for S in itertools.combinations(tail, ell):
                total += width * max(lam(S, k, int(d[k]), i, design, order) for k in S)
    return total


def check_psi1_enumeration(n=60, seed=13, tol=1e-9, lam: Callable = lambda_i) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K, N = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        des = _random_design(rng, K, N)
        d = rng.integers(0, N, K)
        ref = oracles.psi1_literal(d, des)
        worst = max(worst, abs(psi1_from_lambda(d, des, lam) - ref), abs(psi1_demand(d, des)[0] - ref))
    return CheckResult("label term vs literal enumeration", bool(worst <= tol), f"max abs diff {worst:.2e}")


def check_expected_bound(n=30, seed=14, tol=1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, viol = 0.0, 0
    for t in range(n):
        K, N = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        q = rng.dirichlet(np.ones(N), size=K)
        uni = t % 2 == 0
        des = _random_design(rng, K, N, uniform_ranges=uni)
        got = theorem2_expected_bound(q, des).psi1
        ref = oracles.expected_psi1_enumeration(q, des)
        if uni:
            worst = max(worst, abs(got - ref))
        elif got < ref - tol * max(1.0, ref):
            viol += 1
    ok = bool(worst <= tol and viol == 0)
    return CheckResult("expected label term vs demand enumeration", ok, f"max abs diff {worst:.2e}, {viol} dominance violations")


def check_symmetric_gamma(n=40, seed=15, tol=1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m, ell = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        qt = rng.dirichlet(np.ones(m))
        lam = rng.choice([0.1, 0.3, 0.5], m)  # ties on purpose
        ref = oracles.theorem3_gamma_enumeration(qt, lam, ell)
        rank = np.lexsort((np.arange(m), -lam))
        below = np.cumsum(qt[rank][::-1])[::-1]
        g = np.empty(m)
        g[rank] = below**ell - np.maximum(below - qt[rank], 0.0) ** ell
        worst = max(worst, float(np.abs(g - ref).max()))
    return CheckResult("symmetric argmax probabilities vs enumeration", bool(worst <= tol), f"max abs diff {worst:.2e}")


def check_coloring(n=300, seed=16, coloring_fn: Callable | None = None) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad_valid = bad_dec = bad_chi = checked = 0
    for t in range(n):
        K, N = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        des = _random_design(rng, K, N)
        params = SimParams(float(rng.choice([2.0, 3.0, 5.0, 10.0])), 1.0, seed=int(rng.integers(1 << 30)))
        C = random_fill_caches(des, params, t)
        Q = packet_demand(C, rng.integers(0, N, K))
        if coloring_fn is None:
            dl = gcc_delivery(C, Q, params)
            graph, col = dl.graph, dl.coloring
        else:
            graph = build_conflict_graph(C, Q)
            col = coloring_fn(graph)
        if not coloring_is_valid(graph, col):
            bad_valid += 1
        if not verify_decodable(C, Q, graph, col):
            bad_dec += 1
        if 0 < graph.n_vertices <= EXHAUSTIVE_MAX_VERTICES:
            checked += 1
            if col.n_colors < oracles.chromatic_number(graph.adjacency_matrix()):
                bad_chi += 1
    ok = bad_valid == bad_dec == bad_chi == 0
    return CheckResult(
        "coloring validity and decodability",
        ok,
        f"{bad_valid} invalid, {bad_dec} undecodable, {bad_chi} below chromatic number ({checked} small graphs)",
    )


def check_corollary(n=40, seed=17) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        K, N = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        pk = rng.uniform(0.1, 1.0, K) / N
        mu = rng.uniform(0.5, 3.0, K)
        om = np.maximum(rng.uniform(0.5, 2.0, K), pk * mu)
        d = rng.integers(0, N, K)
        a = corollary1_bound(d, pk, mu, om, N)
        b = theorem1_bound(d, CacheDesign.file_symmetric(pk, mu, om, N))
        worst = max(worst, abs(a.psi1 - b.psi1), abs(a.psi2 - b.psi2))
    return CheckResult("file-symmetric bound vs general bound", bool(worst == 0.0), f"max abs diff {worst:.2e}")


def check_uniform_identity(seed=18, tol=1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        K, N = int(rng.integers(1, 25)), int(rng.integers(1, 60))
        Mt, Rt = rng.uniform(0.01, 3.0, 2)
        q = np.full(N, 1.0 / N)
        b = theorem3_expected_bound(q, N * Mt, q, Mt + Rt, K)
        ref = float(uniform_constraint(Mt, Rt, K, N))
        worst = max(worst, abs(b.bound - ref) / max(ref, 1e-300))
    return CheckResult("symmetric bound vs uniform-design constraint", bool(worst <= tol), f"max rel diff {worst:.2e}")


def check_uncoded_waterfill(n=50, seed=19, tol=1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        N, K = int(rng.integers(1, 8)), int(rng.integers(1, 10))
        q = rng.dirichlet(np.ones(N))
        var = rng.uniform(0.5, 2.0, N)
        base = rng.uniform(0.0, 1.0, N)
        res = float(rng.uniform(0.0, 3.0))
        x = uncoded_residual_waterfill(var, base, q, K, res)
        _, ref = oracles.convex_oracle(q * var, base, multicast_cost(q, K), res)
        worst = max(worst, abs(float(np.sum(q * var * np.exp2(-2 * (base + x)))) - ref))
    return CheckResult("uncoded layer vs convex oracle", bool(worst <= tol), f"max abs diff {worst:.2e}")


CHECKS = (
    check_lcu_cache,
    check_lcu_delivery,
    check_psi1_enumeration,
    check_expected_bound,
    check_symmetric_gamma,
    check_coloring,
    check_corollary,
    check_uniform_identity,
    check_uncoded_waterfill,
)


def run_all(checks=CHECKS) -> list:
    out = []
    for c in checks:
        try:
            out.append(c())
        except Exception as e:  # a crash is a failure, not an abort
            out.append(CheckResult(c.__name__, False, f"raised {type(e).__name__}: {e}"))
    return out

