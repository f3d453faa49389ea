import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cachesim import (
    CacheDesign,
    EnumerationCapError,
    InfeasibleDesignError,
    corollary1_bound,
    gamma_i,
    lambda_i,
    theorem1_bound,
    theorem2_expected_bound,
    theorem3_expected_bound,
    trf_psi1,
)
from cachesim.bounds import corollary1_worst_case, psi1_demand, psi2_demand, receiver_order, round_k_tilde
from cachesim.model import zipf_demand
from cachesim.oracles import (
    expected_psi1_enumeration,
    gamma_enumeration,
    psi1_literal,
    theorem3_gamma_enumeration,
    uncoded_expected_rate,
)


def _pc_design(pc):
    # one file, unit ranges: the cached fraction equals mu
    pc = np.asarray(pc, float)
    return CacheDesign(np.ones((pc.size, 1)), pc, np.ones((pc.size, 1)))


def _random_design(r, K, N, uniform=False):
    p = r.dirichlet(np.ones(N), size=K) * r.uniform(0.5, 1, (K, 1))
    mu = r.uniform(0.5, 3, K)
    om = np.maximum(r.uniform(0.5, 2, (K, N)), p * mu[:, None])
    if uniform:
        om = np.repeat(om.max(axis=1, keepdims=True), N, axis=1)
    return CacheDesign(p, mu, om)


def test_design_rejects_overfull_cache():
    with pytest.raises(InfeasibleDesignError):
        CacheDesign(np.array([[1.0]]), np.array([2.0]), np.array([[1.0]]))


def test_lambda_empty_products():
    des = _pc_design([0, 0, 0])
    order = receiver_order([1, 1, 1])
    assert lambda_i([1], 1, 0, 0, des, order) == 1.0
    assert lambda_i([0, 2], 0, 0, 0, des, order) == 0.0


def test_lambda_direct_product():
    des = _pc_design([0.5, 0.25, 0.1])
    assert lambda_i([0, 1], 0, 0, 0, des, [0, 1, 2]) == pytest.approx(0.5 * 0.25 * 0.9)


def test_psi1_single_receiver_is_miss_rate():
    des = CacheDesign(np.array([[0.5, 0.5]]), np.array([1.0]), np.array([[2.0, 2.0]]))
    assert psi1_demand([1], des)[0] == pytest.approx(2.0 - 0.5)


def test_psi1_without_caching_sums_ranges():
    des = CacheDesign(np.zeros((3, 3)), np.ones(3), np.array([[1.0, 2, 3]] * 3))
    assert psi1_demand([0, 1, 2], des)[0] == pytest.approx(6.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_psi1_matches_literal_triple_loop(K, N, seed):
    r = np.random.default_rng(seed)
    des = _random_design(r, K, N)
    d = r.integers(0, N, K)
    assert psi1_demand(d, des)[0] == pytest.approx(psi1_literal(d, des), abs=1e-12)


def test_psi1_cap_and_sampling():
    r = np.random.default_rng(0)
    des = _random_design(r, 18, 2)
    d = r.integers(0, 2, 18)
    with pytest.raises(EnumerationCapError):
        psi1_demand(d, des)
    small = _random_design(r, 10, 2)
    d10 = r.integers(0, 2, 10)
    exact = psi1_demand(d10, small)[0]
    est, se = psi1_demand(d10, small, exact_cap=4, sample_trials=4000)
    assert se > 0 and abs(est - exact) <= 5 * se


def test_psi2_cases():
    one = CacheDesign(np.array([[0.25, 0.75]]), np.array([2.0]), np.array([[1.0, 2.0]]))
    assert psi2_demand([0], one) == pytest.approx(1.0 - 0.5)
    same = CacheDesign(np.full((3, 2), 0.5), np.ones(3), np.ones((3, 2)))
    assert psi2_demand([0, 0, 0], same) == pytest.approx(0.5)
    het = CacheDesign(np.full((2, 2), 0.5), np.array([1.0, 2.0]), np.array([[1.0, 2.0], [1.5, 3.0]]))
    assert psi2_demand([1, 1], het) == pytest.approx(3.0 - 0.5)
    assert psi2_demand([0, 1], het) == pytest.approx((1.0 - 0.5) + (3.0 - 1.0))


def test_theorem1_small_cases():
    des = CacheDesign(np.array([[1.0]]), np.array([0.4]), np.array([[1.0]]))
    b = theorem1_bound([0], des)
    assert b.psi1 == pytest.approx(0.6) and b.psi2 == pytest.approx(0.6) and float(b) == pytest.approx(0.6)
    zero = CacheDesign(np.zeros((3, 1)), np.ones(3), np.full((3, 1), 2.0))
    b = theorem1_bound([0, 0, 0], zero)
    assert b.psi2 == pytest.approx(2.0) and b.psi1 == pytest.approx(6.0) and b.bound == pytest.approx(2.0)


def test_gamma_singleton_is_demand_probability():
    r = np.random.default_rng(1)
    des = _random_design(r, 3, 3)
    q = r.dirichlet(np.ones(3), size=3)
    order = receiver_order(des.omega.max(axis=1))
    for n in range(3):
        assert gamma_i([order[1]], int(order[1]), n, 1, des, q, order) == pytest.approx(q[order[1], n])


def test_gamma_symmetry():
    des = CacheDesign(np.full((2, 2), 0.5), np.ones(2), np.ones((2, 2)))
    q = np.full((2, 2), 0.5)
    vals = [gamma_i([0, 1], k, n, 0, des, q, [0, 1]) for k in range(2) for n in range(2)]
    assert sum(vals) == pytest.approx(1.0)
    # ties go to the smaller receiver index, so receiver 0 takes every tie
    assert vals == pytest.approx([0.5, 0.5, 0.0, 0.0])


def test_gamma_matches_enumeration():
    r = np.random.default_rng(2)
    for _ in range(10):
        des = _random_design(r, 3, 3)
        q = r.dirichlet(np.ones(3), size=3)
        order = [0, 1, 2]
        ref = gamma_enumeration((0, 2), order, des, q)
        for k in (0, 2):
            for n in range(3):
                assert gamma_i([0, 2], k, n, 0, des, q, order) == pytest.approx(ref.get((k, n), 0.0), abs=1e-14)


def test_theorem2_single_receiver():
    des = CacheDesign(np.array([[0.5, 0.5]]), np.array([1.0]), np.array([[1.0, 2.0]]))
    q = np.array([[0.3, 0.7]])
    b = theorem2_expected_bound(q, des)
    direct = 0.3 * (1.0 - 0.5) + 0.7 * (2.0 - 0.5)
    assert b.psi2 == pytest.approx(direct)
    assert b.psi1 >= direct - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_theorem2_exact_with_uniform_ranges(K, N, seed):
    r = np.random.default_rng(seed)
    des = _random_design(r, K, N, uniform=True)
    q = r.dirichlet(np.ones(N), size=K)
    b = theorem2_expected_bound(q, des)
    assert b.psi1 == pytest.approx(expected_psi1_enumeration(q, des), abs=1e-9)
    assert b.psi2 == pytest.approx(uncoded_expected_rate(q, des), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_theorem2_dominates_with_mixed_ranges(K, N, seed):
    r = np.random.default_rng(seed)
    des = _random_design(r, K, N)
    q = r.dirichlet(np.ones(N), size=K)
    assert theorem2_expected_bound(q, des).psi1 >= expected_psi1_enumeration(q, des) - 1e-12


def test_theorem2_uncoded_term_uses_requester_range():
    # the expected uncoded term is bounded by the all-receiver max/min version
    r = np.random.default_rng(5)
    des = _random_design(r, 3, 3)
    q = r.dirichlet(np.ones(3), size=3)
    assert theorem2_expected_bound(q, des).psi2 <= uncoded_expected_rate(q, des) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_corollary_equals_lifted_general_bound(K, N, seed):
    r = np.random.default_rng(seed)
    pk = r.uniform(0, 1, K) / N
    mu = r.uniform(0.5, 3, K)
    om = np.maximum(r.uniform(0.5, 2, K), pk * mu)
    d = r.integers(0, N, K)
    a = corollary1_bound(d, pk, mu, om, N)
    b = theorem1_bound(d, CacheDesign.file_symmetric(pk, mu, om, N))
    assert a.psi1 == b.psi1 and a.psi2 == b.psi2


def test_corollary_single_receiver():
    b = corollary1_bound([0], [0.5], [1.0], [2.0], 2)
    assert b.bound == pytest.approx(2.0 - 0.5)


def test_corollary_worst_case_by_enumeration():
    pk, mu, om = np.array([0.2, 0.3, 0.1]), np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.5, 2.0])
    best, argd = corollary1_worst_case(pk, mu, om, 3)
    ref = max(corollary1_bound(d, pk, mu, om, 3).bound for d in itertools.product(range(3), repeat=3))
    assert best == pytest.approx(ref)
    assert corollary1_bound(argd, pk, mu, om, 3).bound == pytest.approx(best)


def test_k_tilde_rounding():
    assert [round_k_tilde(x) for x in (0.0, 0.04, 0.5, 1.49, 1.5, 2.51)] == [0, 1, 1, 1, 2, 3]


def test_theorem3_single_file():
    b = theorem3_expected_bound([1.0], 2.0, [1.0], [3.0], 5)
    assert b.psi2 == pytest.approx(3.0 - 2.0)


def test_theorem3_no_caching_closed_form():
    N, K, om = 7, 4, 1.3
    q = np.full(N, 1 / N)
    b = theorem3_expected_bound(q, 0.0, q, om, K)
    assert b.psi2 == pytest.approx(N * (1 - (1 - 1 / N) ** K) * om)


def test_theorem3_gamma_closed_form():
    r = np.random.default_rng(3)
    for _ in range(20):
        m, ell = int(r.integers(1, 5)), int(r.integers(1, 4))
        qt = r.dirichlet(np.ones(m))
        lam = r.choice([0.2, 0.4], m)
        rank = np.lexsort((np.arange(m), -lam))
        below = np.cumsum(qt[rank][::-1])[::-1]
        g = np.empty(m)
        g[rank] = below**ell - np.maximum(below - qt[rank], 0) ** ell
        assert np.allclose(g, theorem3_gamma_enumeration(qt, lam, ell), atol=1e-14)


def test_theorem3_equal_ranges_is_exact_average():
    K, q, mu = 4, zipf_demand(3, 0.6), 1.5
    p = np.full(3, 1 / 3)
    des = CacheDesign(np.tile(p, (K, 1)), np.full(K, mu), np.ones((K, 3)))
    b = theorem3_expected_bound(q, mu, p, 1.0, K)
    assert b.psi1 == pytest.approx(expected_psi1_enumeration(np.tile(q, (K, 1)), des), abs=1e-12)


def test_theorem3_mixed_ranges_close_to_average():
    # the reduction to an integer receiver count is approximate once ranges differ
    K, q, mu = 4, zipf_demand(3, 0.6), 2.0
    p, om = np.array([0.4, 0.3, 0.3]), np.array([1.0, 1.5, 2.0])
    des = CacheDesign(np.tile(p, (K, 1)), np.full(K, mu), np.tile(om, (K, 1)))
    exact = expected_psi1_enumeration(np.tile(q, (K, 1)), des)
    assert theorem3_expected_bound(q, mu, p, om, K).psi1 == pytest.approx(exact, rel=0.05)


def test_trf_limits():
    assert trf_psi1(30, 10, 0.0, 0.4, 0.7, 5) == pytest.approx(5 * 0.3 * 0.4)
    full = trf_psi1(30, 10, 0.6, 123.0, 1.0, 5)
    assert full == pytest.approx(trf_psi1(30, 10, 0.6, 0.0, 1.0, 5))


def test_trf_printed_formula():
    M, Nt, R1, R2, G, K = 50, 40, 0.5, 0.2, 0.8, 20
    first = R1 * (M + Nt * R1) / M * (1 - (Nt * R1 / (M + Nt * R1)) ** (K * G))
    assert trf_psi1(M, Nt, R1, R2, G, K) == pytest.approx(first + K * (1 - G) * R2, rel=1e-12)


def test_trf_small_cache_branch():
    assert trf_psi1(1e-12, 3, 1.0, 0.0, 1.0, 20) == pytest.approx(20.0)


def test_more_cache_never_raises_the_bound():
    r = np.random.default_rng(31)
    for _ in range(300):
        K, N = int(r.integers(1, 5)), int(r.integers(1, 4))
        p = r.dirichlet(np.ones(N), K) * r.uniform(0.5, 1, (K, 1))
        mu = r.uniform(0.2, 1.5, K)
        om = r.uniform(1.6, 3, (K, N))
        d = r.integers(0, N, K)
        bigger = mu.copy()
        bigger[int(r.integers(K))] *= 1.05
        assert theorem1_bound(d, CacheDesign(p, bigger, om)).bound <= theorem1_bound(d, CacheDesign(p, mu, om)).bound + 1e-12


def test_symmetric_label_term_vs_jensen_form_is_close():
    # the Jensen-simplified closed form is an approximation, not a one-sided bound
    q = np.full(50, 1 / 50)
    p = np.full(50, 1 / 50)
    b = theorem3_expected_bound(q, 20.0, p, 0.4 + 1.0, 10)
    assert b.psi1 == pytest.approx(trf_psi1(20.0, 50, 1.0, 0.0, 1.0, 10), rel=1e-12)
