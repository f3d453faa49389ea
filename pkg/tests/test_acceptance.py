"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also repeated in the pytest
terminal summary) and asserts the criterion at its stated tolerance.
"""

import itertools
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from cachesim import (
    CacheDesign,
    NetworkInstance,
    SimParams,
    corollary1_bound,
    draw_variances,
    lcu_cache_allocation,
    lcu_cache_allocations,
    lcu_delivery_rates,
    lcu_expected_distortion,
    simulate,
    solve_trf,
    solve_uniform,
    theorem1_bound,
    theorem2_expected_bound,
    theorem3_expected_bound,
)
from cachesim.ccm import uniform_constraint
from cachesim.config import load_config
from cachesim.experiments import ccm_curve, lcu_curve
from cachesim.oracles import chromatic_number, convex_oracle, expected_psi1_enumeration
from cachesim.rfgcc import (
    EXHAUSTIVE_MAX_VERTICES,
    build_conflict_graph,
    coloring_is_valid,
    gcc1_coloring,
    gcc2_coloring,
    gcc_delivery,
    packet_demand,
    random_fill_caches,
    verify_decodable,
)


def test_c1_symmetric_gain(report):
    cfg = load_config({
        "network": {"K": 20, "M": [50, 70]},
        "library": {"N": 100, "variances": {"kind": "constant", "value": 1.5}},
        "demand": {"alpha": 0.0},
        "budget": {"R": [10]},
        "lcu": {"trials": 256},
    })
    t0 = time.perf_counter()
    _, lcu = lcu_curve(cfg)
    _, ccm = ccm_curve(cfg)
    elapsed = time.perf_counter() - t0
    r50 = lcu[0][3] / ccm[0][3]
    r70 = lcu[1][3] / ccm[1][3]
    ok50 = r50 >= 9.5 * 0.85
    ok70 = 14 * 0.8 <= r70 <= 14 * 1.2
    ok = ok50 and ok70 and elapsed < 120
    report(1, ok, f"gain at M=50 {r50:.3f} (need >= 8.075), at M=70 {r70:.3f} (need 11.2..16.8), {elapsed:.1f}s")
    assert ok


def test_c2_zipf_gain(report):
    ratios = {2.0: [], 8.0: []}
    for seed in range(5):
        v = draw_variances({"low": 0.7, "high": 1.6, "seed": seed, "n": 100})
        for R in ratios:
            inst = NetworkInstance.symmetric(20, 100, 50.0, R, alpha=0.6, variances=v)
            lcu = lcu_expected_distortion(inst, trials=4000, seed=seed).value
            ratios[R].append(lcu / solve_trf(inst).expected_distortion)
    g2, g8 = np.mean(ratios[2.0]), np.mean(ratios[8.0])
    ok = abs(g2 - 2.1) <= 0.25 * 2.1 and abs(g8 - 5.4) <= 0.25 * 5.4
    report(2, ok, f"mean gain at R=2 {g2:.3f} (need 1.575..2.625), at R=8 {g8:.3f} (need 4.05..6.75), 5 seeds")
    assert ok


def test_c3_lcu_oracle(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        K, N = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        inst = NetworkInstance.build(
            rng.uniform(0, 4, K), rng.dirichlet(np.ones(N), K), rng.uniform(0.2, 3, N), float(rng.uniform(0, 5))
        )
        for r in inst.receivers:
            a = r.demand * inst.variances
            x, _ = lcu_cache_allocation(r, inst.files)
            worst = max(worst, abs(np.sum(a * 2 ** (-2 * x)) - convex_oracle(a, 0.0, 1.0, r.cache_size)[1]))
        cache = lcu_cache_allocations(inst)
        d = rng.integers(0, N, K)
        base = cache.allocations[np.arange(K), d]
        a = inst.variances[d]
        x = lcu_delivery_rates(d, cache, inst.rate_budget, inst.files).rates
        ref = convex_oracle(a, base, 1.0, inst.rate_budget)[1]
        worst = max(worst, abs(np.sum(a * 2 ** (-2 * (base + x))) - ref))
    ok = worst <= 1e-6
    report(3, ok, f"max objective gap to the convex oracle {worst:.2e} over 100 instances (need <= 1e-6)")
    assert ok


def test_c4_coloring(report):
    rng = np.random.default_rng(77)
    ratios = np.array([2, 3, 5, 10, 30, 100, 1000])
    weights = np.array([30, 20, 15, 15, 10, 7, 3], dtype=float)
    weights /= weights.sum()
    bad = small = 0
    for t in range(10_000):
        K, N = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        ratio = float(rng.choice(ratios, p=weights))
        p = rng.dirichlet(np.ones(N), K) * rng.uniform(0.3, 1, (K, 1))
        mu = rng.uniform(0.1, 2, K)
        scale = 1.0 if ratio < 100 else 0.1  # keep the big graphs affordable
        om = np.maximum(rng.uniform(0.2, 1.5, (K, N)), p * mu[:, None]) * scale
        des = CacheDesign(p * scale, mu, om)
        prm = SimParams(ratio, 1.0, seed=t)
        C = random_fill_caches(des, prm, t)
        Q = packet_demand(C, rng.integers(0, N, K))
        dl = gcc_delivery(C, Q, prm)
        g = dl.graph
        c1, c2 = gcc1_coloring(g, check=False), gcc2_coloring(g)
        ok_t = (
            coloring_is_valid(g, dl.coloring)
            and coloring_is_valid(g, c1)
            and coloring_is_valid(g, c2)
            and verify_decodable(C, Q, g, dl.coloring)
        )
        if 0 < g.n_vertices <= EXHAUSTIVE_MAX_VERTICES:
            small += 1
            ok_t = ok_t and dl.coloring.n_colors >= chromatic_number(g.adjacency_matrix())
        bad += not ok_t
    ok = bad == 0 and small > 0
    report(4, ok, f"{bad} failing trials of 10000 ({small} graphs checked against the chromatic number)")
    assert ok


def test_c5_dominance_and_concentration(report):
    design = CacheDesign.file_symmetric(np.full(4, 0.25), [1.0, 2.0, 3.0, 4.0], [1.0, 1.5, 2.0, 2.5], 4)
    d = [0, 1, 2, 3]
    bound = theorem1_bound(d, design).bound
    parts, ok = [], True
    gap4 = None
    for ratio in (100, 1000, 10_000):
        res = simulate(design, SimParams(ratio, 1.0, seed=0), 30, demand=d)
        rates = np.array([r.rate for r in res])
        mean, se = rates.mean(), rates.std(ddof=1) / np.sqrt(rates.size)
        dom = mean <= bound and all(r.decodable for r in res)
        ok = ok and dom
        parts.append(f"tau/T={ratio}: mean-bound {mean - bound:+.4f} (se {se:.4f})")
        if ratio == 10_000:
            gap4 = abs(mean - bound)
    ok = ok and gap4 <= 0.05
    report(5, ok, f"bound {bound:.4f}; " + "; ".join(parts) + f"; gap at 1e4 {gap4:.4f} (need <= 0.05)")
    assert ok


def test_c6_expectation_consistency(report):
    rng = np.random.default_rng(6)
    worst, viol = 0.0, 0
    for t in range(120):
        K, N = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        q = rng.dirichlet(np.ones(N), K)
        p = rng.dirichlet(np.ones(N), K) * rng.uniform(0.5, 1, (K, 1))
        mu = rng.uniform(0.5, 3, K)
        om = np.maximum(rng.uniform(0.5, 2, (K, N)), p * mu[:, None])
        if t % 2 == 0:
            om = np.repeat(om.max(axis=1, keepdims=True), N, axis=1)
        des = CacheDesign(p, mu, om)
        got = theorem2_expected_bound(q, des).psi1
        ref = expected_psi1_enumeration(q, des)
        if t % 2 == 0:
            worst = max(worst, abs(got - ref))
        elif got < ref - 1e-12:
            viol += 1
    ok = worst <= 1e-9 and viol == 0
    report(6, ok, f"uniform ranges max diff {worst:.2e} (need <= 1e-9); mixed ranges {viol} violations of >=")
    assert ok


def test_c7_specializations(report):
    rng = np.random.default_rng(7)
    mism = 0
    for _ in range(200):
        K, N = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        pk = rng.uniform(0, 1, K) / N
        mu = rng.uniform(0.5, 3, K)
        om = np.maximum(rng.uniform(0.5, 2, K), pk * mu)
        d = rng.integers(0, N, K)
        a = corollary1_bound(d, pk, mu, om, N)
        b = theorem1_bound(d, CacheDesign.file_symmetric(pk, mu, om, N))
        mism += (a.psi1 != b.psi1) or (a.psi2 != b.psi2)
    worst = 0.0
    for K, N, M, R in [(20, 100, 50, 10), (20, 100, 70, 10), (4, 6, 3, 1.5), (10, 3, 0.5, 4)]:
        u = solve_uniform(K, N, 1.5, M, R)
        q = np.full(N, 1 / N)
        b = theorem3_expected_bound(q, N * u.M_tilde, q, u.M_tilde + u.R_tilde, K)
        worst = max(worst, abs(b.bound - float(uniform_constraint(u.M_tilde, u.R_tilde, K, N))), abs(b.bound - R))
    ok = mism == 0 and worst <= 1e-6
    report(7, ok, f"{mism} mismatches of 200 lifted demands (need exact); symmetric-vs-uniform max diff {worst:.2e}")
    assert ok


def test_c8_determinism(tmp_path, report):
    cfg = {
        "network": {"K": 20, "M": [20, 50]},
        "library": {"N": 100, "variances": {"kind": "uniform", "low": 0.7, "high": 1.6}},
        "demand": {"alpha": 0.6},
        "budget": {"R": [2, 8]},
        "seed": 11,
        "lcu": {"trials": 500},
        "sim": {"tau": 20, "T": 1, "trials": 12, "demand": [0, 1, 2],
                "design": {"p": [[0.5, 0.5, 0]] * 3, "mu": [1, 1, 1], "omega": [[1, 1, 1]] * 3}},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    sim_cfg = dict(cfg, network={"K": 3, "M": [1]}, library={"N": 3}, demand={"alpha": 0.0})
    sim_path = tmp_path / "s.json"
    sim_path.write_text(json.dumps(sim_cfg))
    digests = {}
    for cmd, p in (("ccm-curve", path), ("lcu-curve", path), ("simulate", sim_path)):
        outs = []
        for threads in (1, 4, 8):
            out = tmp_path / f"{cmd}-{threads}.csv"
            subprocess.run(
                [sys.executable, "-m", "cachesim.cli", cmd, "--config", str(p), "--out", str(out),
                 "--threads", str(threads)],
                check=True,
            )
            outs.append(out.read_bytes())
        digests[cmd] = len(set(outs)) == 1
    ok = all(digests.values())
    report(8, ok, "byte-identical CSV at 1/4/8 threads: " + ", ".join(f"{k} {'yes' if v else 'no'}" for k, v in digests.items()))
    assert ok
