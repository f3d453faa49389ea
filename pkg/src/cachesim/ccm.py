"""Design optimizers for cooperative cache-aided coded multicast (CC-CM).

Two families are searched: a uniform design for fully symmetric networks
(every file cached alike) and truncated random fractional (TRF) caching for
symmetric receivers, where only a top group of files is cached. Any budget
left after the coded layers is spent on demand-independent uncoded layers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bounds import theorem3_expected_bound, trf_psi1
from .errors import InfeasibleDesignError, InvalidArgumentError
from .model import NetworkInstance, TradeoffPoint

__all__ = [
    "UniformDesign",
    "TrfDesign",
    "uniform_coded_rate",
    "uniform_constraint",
    "solve_uniform",
    "solve_trf",
    "trf_rate_used",
    "uncoded_residual_waterfill",
    "multicast_cost",
    "ccm_distortion_curve",
    "check_trf_feasible",
]

UNIFORM_GRID = 2001
TRF_GRID = 41
TRF_REFINE = 9
TRF_REFINEMENTS = 2


def multicast_cost(q, K) -> np.ndarray:
    """Probability that at least one of ``K`` receivers asks for each file."""
    with np.errstate(divide="ignore"):
        return -np.expm1(K * np.log1p(-np.asarray(q, dtype=float)))


# -- uniform design ------------------------------------------------------------


def uniform_coded_rate(M_tilde, R_tilde, K):
    """Label term for uniform caching of every file, ``R (1 - (1-pc)^K) / pc``.

    Tends to ``K R`` as the cached share goes to zero.
    """
    Mt = np.asarray(M_tilde, dtype=float)
    Rt = np.asarray(R_tilde, dtype=float)
    tot = Mt + Rt
    with np.errstate(divide="ignore", invalid="ignore"):
        pc = np.where(tot > 0, Mt / tot, 0.0)
        f = np.where(pc > 1e-12, -np.expm1(K * np.log1p(-pc)) / pc, K - 0.5 * K * (K - 1) * pc)
    out = Rt * f
    return float(out) if out.ndim == 0 else out


def uniform_constraint(M_tilde, R_tilde, K, N):
    """Expected coded rate of the uniform design: min of the label and uncoded terms."""
    reach = N * float(multicast_cost(1.0 / N, K))
    return np.minimum(uniform_coded_rate(M_tilde, R_tilde, K), reach * np.asarray(R_tilde, dtype=float))


@dataclass(frozen=True)
class UniformDesign:
    M_tilde: float
    R_tilde: float
    expected_distortion: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def pc(self) -> float:
        tot = self.M_tilde + self.R_tilde
        return self.M_tilde / tot if tot > 0 else 0.0


def _tight_r(Mt, K, N, R, iters=200):
    """Largest R_tilde with constraint <= R for each M_tilde (vectorized bisection)."""
    Mt = np.atleast_1d(np.asarray(Mt, dtype=float))
    lo = np.zeros_like(Mt)
    # the constraint is at least R_tilde (each term >= R_tilde when K >= 1)
    hi = np.full_like(Mt, max(R, 1e-300) * 1.0)
    while True:
        grow = uniform_constraint(Mt, hi, K, N) < R
        if not grow.any():
            break
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        over = uniform_constraint(Mt, mid, K, N) > R
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
            break
    return lo


def _solve_uniform_range(K, N, sigma2, Mt_max, R, grid):
    if R <= 0:
        return Mt_max, 0.0
    Mt = np.linspace(0.0, Mt_max, grid) if Mt_max > 0 else np.zeros(1)
    Rt = _tight_r(Mt, K, N, R)
    j = int(np.argmax(Mt + Rt))
    best_m, best_r = float(Mt[j]), float(Rt[j])
    if Mt_max > 0 and grid > 1:
        # polish inside the bracketing grid cells by golden section on M_tilde + R_tilde
        step = Mt_max / (grid - 1)
        a, b = max(0.0, best_m - step), min(Mt_max, best_m + step)
        g = (math.sqrt(5) - 1) / 2
        f = lambda m: float(m + _tight_r(m, K, N, R)[0])  # noqa: E731
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(80):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        for m in (c, d):
            r = float(_tight_r(m, K, N, R)[0])
            if m + r > best_m + best_r:
                best_m, best_r = float(m), r
    return best_m, best_r


def solve_uniform(K, N, sigma2, M, R, grid=UNIFORM_GRID, cache_rule="per-file") -> UniformDesign:
    """Best uniform design for ``K`` receivers, ``N`` equally popular files of variance ``sigma2``.

    Maximizes ``M_tilde + R_tilde`` subject to the expected coded rate equal
    to ``R``. ``cache_rule="per-file"`` stores ``M_tilde`` of each of the
    ``N`` files, so ``M_tilde <= M / N``; ``"total"`` only asks
    ``M_tilde <= M``. The value under the other rule is kept in the
    diagnostics.
    """
    if min(K, N) < 1 or sigma2 <= 0 or M < 0 or R < 0:
        raise InvalidArgumentError("need K, N >= 1, sigma2 > 0 and M, R >= 0")
    if cache_rule not in ("per-file", "total"):
        raise InvalidArgumentError("cache_rule must be 'per-file' or 'total'")
    limits = {"per-file": M / N, "total": float(M)}
    sols = {rule: _solve_uniform_range(K, N, sigma2, lim, R, grid) for rule, lim in limits.items()}
    Mt, Rt = sols[cache_rule]
    other = "total" if cache_rule == "per-file" else "per-file"
    om, orr = sols[other]
    diag = {
        "cache_rule": cache_rule,
        "coded_rate": float(uniform_constraint(Mt, Rt, K, N)),
        "constraint_residual": float(uniform_constraint(Mt, Rt, K, N) - R),
        f"distortion_{other}": float(sigma2 * 2.0 ** (-2.0 * (om + orr))),
        f"M_tilde_{other}": float(om),
        f"R_tilde_{other}": float(orr),
    }
    return UniformDesign(float(Mt), float(Rt), float(sigma2 * 2.0 ** (-2.0 * (Mt + Rt))), diag)


# -- TRF design -----------------------------------------------------------------


@dataclass(frozen=True)
class TrfDesign:
    N_tilde: int
    M_tilde: float
    R1: float
    R2: float
    G_tilde: float
    group1: np.ndarray  # file indices of the cached group
    uncoded_rates: np.ndarray  # per file
    coded_rate: float
    expected_distortion: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def uncoded_rate(self) -> float:
        return float(self.diagnostics.get("uncoded_rate", 0.0))


def uncoded_residual_waterfill(variances, base_rates, q, K, residual) -> np.ndarray:
    """Demand-independent uncoded layer per file.

    Minimizes ``sum q var 2^(-2(base + x))`` with each file's layer paid once
    per transmission, i.e. at cost ``1 - (1-q)^K``, spending exactly ``residual``.
    """
    if residual < 0:
        raise InvalidArgumentError("residual budget must be nonnegative")
    a = np.asarray(q, dtype=float) * np.asarray(variances, dtype=float)
    cost = multicast_cost(q, K)
    if residual == 0:
        return np.zeros_like(a)
    pos = cost > 0
    x = np.zeros_like(a)
    x[pos], _ = kernels.waterfill(a[pos], np.asarray(base_rates, dtype=float)[pos], cost[pos], residual)
    return x


def _groups(q, variances, n_tilde):
    order = np.lexsort((np.arange(q.size), -(q * variances)))
    return order[:n_tilde], order[n_tilde:]


def trf_rate_used(M, n_tilde, R1, R2, q, g1, K):
    """Expected coded rate of a TRF design: min of the closed form and the uncoded-stream term."""
    in_g1 = np.zeros(q.size, dtype=bool)
    in_g1[g1] = True
    c = multicast_cost(q, K)
    G = float(q[in_g1].sum())
    return min(trf_psi1(M, n_tilde, R1, R2, min(G, 1.0), K), float(c[in_g1].sum() * R1 + c[~in_g1].sum() * R2))


def _r_max(f, R):
    """Largest x with f(x) <= R for f nondecreasing, f(0) = 0."""
    hi = max(R, 1e-12)
    while f(hi) <= R:
        hi *= 2.0
        if hi > 1e12:
            return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= R:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return lo


def _search_n_tilde(n_tilde, q, var, K, M, R, grid, refine, refinements):
    N = q.size
    g1, g2 = _groups(q, var, n_tilde)
    in_g1 = np.zeros(N, dtype=bool)
    in_g1[g1] = True
    G = min(float(q[g1].sum()), 1.0)
    c = multicast_cost(q, K)
    c1, c2 = float(c[g1].sum()), float(c[g2].sum())
    a = q * var
    r1_hi = _r_max(lambda x: min(trf_psi1(M, n_tilde, x, 0.0, G, K), c1 * x), R)
    if g2.size:
        r2_hi = R / max(min(K * (1.0 - G), c2), 1e-300)
    else:
        r2_hi = 0.0
    r1s = np.linspace(0.0, r1_hi, grid)
    r2s = np.linspace(0.0, r2_hi, grid if g2.size else 1)
    D, _ = kernels.trf_grid(a, c, in_g1, M, n_tilde, K, G, c1, c2, R, r1s, r2s)
    i, j = np.unravel_index(int(np.argmin(D)), D.shape)
    best = (float(D[i, j]), float(r1s[i]), float(r2s[j]))
    s1 = r1s[1] - r1s[0] if r1s.size > 1 else 0.0
    s2 = r2s[1] - r2s[0] if r2s.size > 1 else 0.0
    for _ in range(refinements):
        r1s = np.clip(np.linspace(best[1] - s1, best[1] + s1, refine), 0.0, r1_hi)
        r2s = np.clip(np.linspace(best[2] - s2, best[2] + s2, refine), 0.0, r2_hi) if s2 else np.array([best[2]])
        D, _ = kernels.trf_grid(a, c, in_g1, M, n_tilde, K, G, c1, c2, R, r1s, r2s)
        i, j = np.unravel_index(int(np.argmin(D)), D.shape)
        if D[i, j] < best[0]:
            best = (float(D[i, j]), float(r1s[i]), float(r2s[j]))
        s1 *= 2.0 / (refine - 1)
        s2 *= 2.0 / (refine - 1)
    # the coded layers usually bind: also try R1 pushed to the budget for the chosen R2
    r2 = best[2]
    r1t = _r_max(lambda x: min(trf_psi1(M, n_tilde, x, r2, G, K), c1 * x + c2 * r2), R)
    if min(trf_psi1(M, n_tilde, r1t, r2, G, K), c1 * r1t + c2 * r2) <= R:
        D, _ = kernels.trf_grid(a, c, in_g1, M, n_tilde, K, G, c1, c2, R, np.array([r1t]), np.array([r2]))
        if D[0, 0] < best[0]:
            best = (float(D[0, 0]), float(r1t), r2)
    return best + (g1, G)


def check_trf_feasible(design: TrfDesign, q, K, M, R, tol=1e-6) -> float:
    """Constraint residual recomputed from the bound evaluators; raises if above ``tol``."""
    q = np.asarray(q, dtype=float)
    N = q.size
    in_g1 = np.zeros(N, dtype=bool)
    in_g1[design.group1] = True
    p = np.where(in_g1, 1.0 / design.N_tilde, 0.0)
    omega = np.where(in_g1, design.M_tilde + design.R1, design.R2)
    psi2 = theorem3_expected_bound(q, M, p, omega, K).psi2 if N <= 5000 else None
    if psi2 is None:  # pragma: no cover
        psi2 = float(np.sum(multicast_cost(q, K) * (omega - p * M)))
    coded = min(trf_psi1(M, design.N_tilde, design.R1, design.R2, design.G_tilde, K), psi2)
    used = coded + float(np.dot(multicast_cost(q, K), design.uncoded_rates))
    resid = used - R
    if resid > tol:
        raise InfeasibleDesignError(f"design exceeds the rate budget by {resid:.3g}")
    return resid


def solve_trf(instance: NetworkInstance, R=None, n_tilde_values=None, grid=TRF_GRID,
              refine=TRF_REFINE, refinements=TRF_REFINEMENTS, threads=1) -> TrfDesign:
    """Best TRF design for a network of symmetric receivers.

    For every cut-off ``N_tilde`` the ``N_tilde`` files with the largest
    ``q * var`` are cached uniformly; the coded rates ``(R1, R2)`` of the two
    groups are searched on a refining grid, and leftover budget goes to the
    uncoded layers. Ties between cut-offs go to the smaller one.
    """
    if not instance.symmetric_receivers:
        raise InvalidArgumentError("TRF optimization needs receivers with equal caches and demand")
    R = instance.rate_budget if R is None else float(R)
    if R < 0:
        raise InvalidArgumentError("rate budget must be nonnegative")
    q = instance.demand_matrix[0].copy()
    var = instance.variances.copy()
    K, N = instance.K, instance.N
    M = float(instance.cache_sizes[0])
    cands = list(range(1, N + 1)) if n_tilde_values is None else sorted({int(x) for x in n_tilde_values})
    if not cands or cands[0] < 1 or cands[-1] > N:
        raise InvalidArgumentError("cut-off values must lie in 1..N")

    def run(nt):
        return _search_n_tilde(nt, q, var, K, M, R, grid, refine, refinements)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, cands))
    else:
        results = [run(nt) for nt in cands]
    k_best = min(range(len(cands)), key=lambda t: (results[t][0], t))
    nt = cands[k_best]
    _, r1, r2, g1, G = results[k_best]
    in_g1 = np.zeros(N, dtype=bool)
    in_g1[g1] = True
    base = np.where(in_g1, M / nt + r1, r2)
    coded = trf_rate_used(M, nt, r1, r2, q, g1, K)
    residual = max(R - coded, 0.0)
    x = uncoded_residual_waterfill(var, base, q, K, residual)
    D = float(np.sum(q * var * np.exp2(-2.0 * (base + x))))
    unc = float(np.dot(multicast_cost(q, K), x))
    design = TrfDesign(
        nt, M / nt, r1, r2, G, np.sort(g1), x, coded, D,
        {"uncoded_rate": unc, "n_tilde_values": len(cands)},
    )
    check_trf_feasible(design, q, K, M, R)
    return design


def ccm_distortion_curve(instance: NetworkInstance, M_values, R_values, threads=1, **kw) -> list:
    """CC-CM trade-off points over a grid of cache sizes and budgets, ``R`` outer, ``M`` inner.

    Fully symmetric networks (equal variances and uniform demand) use the
    uniform design; other symmetric-receiver networks use TRF.
    """
    if not instance.symmetric_receivers:
        raise InvalidArgumentError("CC-CM curves need symmetric receivers")
    q = instance.demand_matrix[0]
    var = instance.variances
    uniform = bool(np.allclose(q, q[0], rtol=0, atol=1e-15) and np.all(var == var[0]))
    out = []
    for R in R_values:
        for M in M_values:
            if uniform:
                u = solve_uniform(instance.K, instance.N, float(var[0]), float(M), float(R), **kw)
                diag = dict(u.diagnostics)
                diag.update(coded_rate=float(uniform_constraint(u.M_tilde, u.R_tilde, instance.K, instance.N)),
                            uncoded_rate=0.0, N_tilde=instance.N, R1=u.R_tilde, R2=0.0, design="uniform")
                out.append(TradeoffPoint(float(M), float(R), "ccm", u.expected_distortion, diag))
            else:
                inst = instance.with_budget(rate_budget=float(R), cache_size=float(M))
                t = solve_trf(inst, threads=threads, **kw)
                diag = dict(coded_rate=t.coded_rate, uncoded_rate=t.uncoded_rate, N_tilde=t.N_tilde,
                            R1=t.R1, R2=t.R2, design="trf")
                out.append(TradeoffPoint(float(M), float(R), "ccm", t.expected_distortion, diag))
    return out


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CACHESIM_THREADS", "1")))
    except ValueError:
        return 1
