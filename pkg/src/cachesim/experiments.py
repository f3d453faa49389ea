"""Sweeps behind the command-line tools.

Every function returns ``(header, rows)``; rows come back in config order
whatever the thread count, and hold only deterministic values.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .bounds import CacheDesign, theorem1_bound, theorem2_expected_bound, theorem3_expected_bound
from .ccm import solve_trf, solve_uniform, uniform_constraint
from .config import ExperimentConfig, config_hash
from .errors import ConfigError, InfeasibleDesignError
from .lcu import lcu_expected_distortion
from .rfgcc import SimParams, simulate

CURVE_HEADER = ("scheme", "M", "R", "expected_distortion", "coded_rate", "uncoded_rate", "N_tilde", "R1", "R2", "seed")
SIM_HEADER = (
    "trial", "tau_over_T", "demand", "rate", "gcc1_rate", "gcc2_rate",
    "bound", "psi1", "psi2", "gap", "decodable", "n_vertices", "seed",
)
BOUNDS_HEADER = ("quantity", "demand", "bound", "psi1", "psi2", "method", "stderr")
RESIDUAL_TOL = 1e-6


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get("CACHESIM_THREADS", "1")
    try:
        return max(1, int(threads))
    except (TypeError, ValueError):
        return 1


def _pmap(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))  # map keeps input order


def _grid(cfg: ExperimentConfig):
    return [(float(M), float(R)) for R in cfg.budget.R for M in cfg.network.M]


def lcu_curve(cfg: ExperimentConfig, threads=1):
    def point(mr):
        M, R = mr
        est = lcu_expected_distortion(
            cfg.instance(M, R), trials=cfg.lcu.trials, seed=cfg.seed, enumeration_cap=cfg.lcu.enumeration_cap
        )
        return ("lcu", M, R, est.value, 0.0, R, "", "", "", cfg.seed)

    return CURVE_HEADER, _pmap(point, _grid(cfg), threads)


def _uniform_residual(K, N, M_tilde, R_tilde, R) -> float:
    # recompute the coded rate through the symmetric bound, not the optimizer's arithmetic
    q = np.full(N, 1.0 / N)
    b = theorem3_expected_bound(q, N * M_tilde, q, M_tilde + R_tilde, K)
    return b.bound - R


def ccm_curve(cfg: ExperimentConfig, threads=1):
    inst0 = cfg.instance()
    q, var = inst0.demand_matrix[0], inst0.variances
    uniform = inst0.symmetric_receivers and bool(np.all(q == q[0]) and np.all(var == var[0]))
    K, N = inst0.K, inst0.N

    def point(mr):
        M, R = mr
        if uniform:
            u = solve_uniform(K, N, float(var[0]), M, R)
            resid = _uniform_residual(K, N, u.M_tilde, u.R_tilde, R)
            if resid > RESIDUAL_TOL:
                raise InfeasibleDesignError(f"uniform design at M={M}, R={R} exceeds the budget by {resid:.3g}")
            coded = float(uniform_constraint(u.M_tilde, u.R_tilde, K, N))
            return ("ccm", M, R, u.expected_distortion, coded, 0.0, N, u.R_tilde, 0.0, cfg.seed)
        t = solve_trf(cfg.instance(M, R))
        return ("ccm", M, R, t.expected_distortion, t.coded_rate, t.uncoded_rate, t.N_tilde, t.R1, t.R2, cfg.seed)

    return CURVE_HEADER, _pmap(point, _grid(cfg), threads)


def sim_design(cfg: ExperimentConfig) -> CacheDesign:
    """The configured design, or the TRF optimum at the first (M, R) point lifted to a full design."""
    if cfg.sim.design is not None:
        d = cfg.sim.design
        return CacheDesign(np.array(d.p, float), np.array(d.mu, float), np.array(d.omega, float))
    inst = cfg.instance()
    t = solve_trf(inst)
    K, N = inst.K, inst.N
    in_g1 = np.zeros(N, dtype=bool)
    in_g1[t.group1] = True
    p = np.where(in_g1, 1.0 / t.N_tilde, 0.0)
    omega = np.where(in_g1, t.M_tilde + t.R1, t.R2)
    return CacheDesign(np.tile(p, (K, 1)), inst.cache_sizes.copy(), np.tile(omega, (K, 1)))


def simulate_trials(cfg: ExperimentConfig, threads=1):
    design = sim_design(cfg)
    params = SimParams(cfg.sim.tau, cfg.sim.T, cfg.seed)
    demand = cfg.sim.demand
    if demand is not None and len(demand) != design.K:
        raise ConfigError("sim.demand: need one file index per receiver")
    q = None if demand is not None else cfg.demand_matrix()
    chunks = [(s, min(8, cfg.sim.trials - s)) for s in range(0, cfg.sim.trials, 8)]
    parts = _pmap(lambda c: simulate(design, params, c[1], demand=demand, q=q, start=c[0]), chunks, threads)
    rows = []
    for part in parts:
        for r in part:
            rows.append((
                r.trial, params.ratio, "-".join(map(str, r.demand)), r.rate, r.gcc1_rate, r.gcc2_rate,
                r.bound, r.psi1, r.psi2, r.rate - r.bound, int(r.decodable), r.n_vertices, cfg.seed,
            ))
    return SIM_HEADER, rows


def bound_table(cfg: ExperimentConfig, threads=1):
    design = sim_design(cfg)
    q = cfg.demand_matrix()
    rows = []
    b = theorem2_expected_bound(q, design, seed=cfg.seed)
    rows.append(("expected", "", b.bound, b.psi1, b.psi2, b.method, "" if b.mc_stderr is None else b.mc_stderr))
    sym = bool(np.all(q == q[0]) and np.all(design.p == design.p[0]) and np.all(design.omega == design.omega[0])
               and np.all(design.mu == design.mu[0]))
    if sym:
        s = theorem3_expected_bound(q[0], float(design.mu[0]), design.p[0], design.omega[0], design.K)
        rows.append(("expected_symmetric", "", s.bound, s.psi1, s.psi2, s.method, ""))
    if cfg.sim.demand is not None:
        d = np.asarray(cfg.sim.demand, dtype=np.int64)
        t = theorem1_bound(d, design)
        rows.append(("per_demand", "-".join(map(str, d)), t.bound, t.psi1, t.psi2, t.method, ""))
    return BOUNDS_HEADER, rows


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def metadata_path(out: Path) -> Path:
    return out.with_name(out.name + ".meta.json")


def write_outputs(out, command, cfg: ExperimentConfig, header, rows, threads) -> str:
    """Write the CSV (or return it when ``out`` is None) plus the metadata sidecar."""
    text = render_csv(header, rows)
    if out is None:
        return text
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(text.encode())
    meta = {
        "command": command,
        "config_hash": config_hash(cfg),
        "config": cfg.model_dump(mode="json"),
        "seed": cfg.seed,
        "variance_seed": cfg.variance_seed(),
        "version": __version__,
        "numba": _accel.USE_NUMBA,
        "threads": threads,
        "rows": len(rows),
        "python": platform.python_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    metadata_path(out).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return text
