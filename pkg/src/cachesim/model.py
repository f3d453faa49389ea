"""Problem instances, Gaussian distortion-rate arithmetic and demand models.

Files and receivers are indexed from 0. Rates and cache sizes are in
bits/sample; distortions are in squared source units.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "SourceFile",
    "Receiver",
    "NetworkInstance",
    "TradeoffPoint",
    "Estimate",
    "gaussian_distortion",
    "effective_rate",
    "zipf_demand",
    "draw_variances",
    "sample_demand",
    "sample_demands",
    "demand_probability",
    "expected_demand_distortion",
    "ENUMERATION_CAP",
    "MC_CHUNK",
]

ENUMERATION_CAP = 10**6
# Monte Carlo draws are made in fixed-size chunks, chunk j seeded by (seed, j),
# so estimates do not depend on how the work is scheduled.
MC_CHUNK = 4096


def gaussian_distortion(variance, rate):
    """Distortion-rate function of a Gaussian source, ``variance * 2**(-2 rate)``.

    Broadcasts over array arguments.
    """
    variance = np.asarray(variance, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(variance <= 0):
        raise InvalidArgumentError("variance must be positive")
    if np.any(rate < 0):
        raise InvalidArgumentError("rate must be nonnegative")
    out = variance * np.exp2(-2.0 * rate)
    return float(out) if out.ndim == 0 else out


def effective_rate(cached, delivered):
    """Rate usable for reconstruction when cached and delivered layers are in sequence."""
    cached = np.asarray(cached, dtype=float)
    delivered = np.asarray(delivered, dtype=float)
    if np.any(cached < 0) or np.any(delivered < 0):
        raise InvalidArgumentError("rates must be nonnegative")
    out = cached + delivered
    return float(out) if out.ndim == 0 else out


def zipf_demand(n_files: int, alpha: float) -> np.ndarray:
    """Zipf popularity ``q_n ∝ n**-alpha`` over files ``1..n_files``."""
    if n_files < 1:
        raise InvalidArgumentError("need at least one file")
    if alpha < 0:
        raise InvalidArgumentError("Zipf exponent must be nonnegative")
    w = np.arange(1, n_files + 1, dtype=float) ** (-float(alpha))
    return w / w.sum()


def draw_variances(spec) -> np.ndarray:
    """Per-file variances from a spec.

    ``spec`` is a sequence of values, a positive scalar (with ``n`` given as
    ``(value, n)``), or a mapping ``{"low", "high", "seed", "n"}`` for a
    seeded uniform draw.
    """
    if isinstance(spec, dict):
        rng = np.random.default_rng(int(spec["seed"]))
        out = rng.uniform(float(spec["low"]), float(spec["high"]), int(spec["n"]))
    elif isinstance(spec, tuple) and len(spec) == 2 and np.isscalar(spec[0]):
        out = np.full(int(spec[1]), float(spec[0]))
    else:
        out = np.asarray(spec, dtype=float)
    if out.ndim != 1 or out.size == 0 or np.any(out <= 0):
        raise InvalidArgumentError("variances must be a nonempty vector of positive values")
    return out


@dataclass(frozen=True)
class SourceFile:
    index: int
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidArgumentError(f"file {self.index}: variance must be positive")


@dataclass(frozen=True, eq=False)
class Receiver:
    index: int
    cache_size: float
    demand: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.demand, dtype=float)
        if self.cache_size < 0:
            raise InvalidArgumentError(f"receiver {self.index}: negative cache size")
        if q.ndim != 1 or np.any(q < 0) or np.any(q > 1):
            raise InvalidArgumentError(f"receiver {self.index}: demand entries must lie in [0, 1]")
        if abs(q.sum() - 1.0) > 1e-12 * max(1, q.size) ** 0.5 + 1e-12:
            raise InvalidArgumentError(f"receiver {self.index}: demand must sum to 1")
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "demand", q)


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Receivers, library and shared-link rate budget."""

    receivers: tuple
    files: tuple
    rate_budget: float = 0.0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "receivers", tuple(self.receivers))
        object.__setattr__(self, "files", tuple(self.files))
        if not self.receivers or not self.files:
            raise InvalidArgumentError("need at least one receiver and one file")
        if [f.index for f in self.files] != list(range(len(self.files))):
            raise InvalidArgumentError("file indices must be 0..N-1 in order")
        if [r.index for r in self.receivers] != list(range(len(self.receivers))):
            raise InvalidArgumentError("receiver indices must be 0..K-1 in order")
        if any(r.demand.size != len(self.files) for r in self.receivers):
            raise InvalidArgumentError("every demand vector must have one entry per file")
        if self.rate_budget < 0:
            raise InvalidArgumentError("rate budget must be nonnegative")

    @classmethod
    def build(cls, cache_sizes, demands, variances, rate_budget=0.0) -> "NetworkInstance":
        """Build from arrays; ``demands`` is (K, N) or a single length-N vector shared by all."""
        variances = np.asarray(variances, dtype=float)
        cache_sizes = np.atleast_1d(np.asarray(cache_sizes, dtype=float))
        demands = np.asarray(demands, dtype=float)
        if demands.ndim == 1:
            demands = np.broadcast_to(demands, (cache_sizes.size, demands.size))
        if demands.shape[0] != cache_sizes.size:
            raise InvalidArgumentError("one demand row per receiver expected")
        files = [SourceFile(n, float(v)) for n, v in enumerate(variances)]
        receivers = [Receiver(k, float(m), demands[k]) for k, m in enumerate(cache_sizes)]
        return cls(receivers, files, float(rate_budget))

    @classmethod
    def symmetric(cls, K, N, M, R, alpha=0.0, variances=1.0) -> "NetworkInstance":
        """``K`` identical receivers with cache ``M`` and Zipf(``alpha``) demand."""
        v = np.broadcast_to(np.asarray(variances, dtype=float), (N,))
        return cls.build(np.full(K, float(M)), zipf_demand(N, alpha), v, R)

    def with_budget(self, rate_budget=None, cache_size=None) -> "NetworkInstance":
        """Copy with a new rate budget and/or every cache size scaled to ``cache_size``."""
        caches = self.cache_sizes if cache_size is None else np.full(self.K, float(cache_size))
        R = self.rate_budget if rate_budget is None else rate_budget
        return NetworkInstance.build(caches, self.demand_matrix, self.variances, R)

    @property
    def K(self) -> int:
        return len(self.receivers)

    @property
    def N(self) -> int:
        return len(self.files)

    def _arr(self, name, fn):
        if name not in self._cache:
            a = fn()
            a.flags.writeable = False
            self._cache[name] = a
        return self._cache[name]

    @property
    def variances(self) -> np.ndarray:
        return self._arr("variances", lambda: np.array([f.variance for f in self.files]))

    @property
    def cache_sizes(self) -> np.ndarray:
        return self._arr("cache_sizes", lambda: np.array([r.cache_size for r in self.receivers]))

    @property
    def demand_matrix(self) -> np.ndarray:
        return self._arr("demand_matrix", lambda: np.vstack([r.demand for r in self.receivers]))

    @property
    def symmetric_receivers(self) -> bool:
        q = self.demand_matrix
        return bool(np.all(self.cache_sizes == self.cache_sizes[0]) and np.all(q == q[0]))


@dataclass(frozen=True)
class TradeoffPoint:
    cache_size: float
    rate_budget: float
    scheme: str
    expected_distortion: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.scheme not in ("lcu", "ccm"):
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if not (np.isfinite(self.expected_distortion) and self.expected_distortion >= 0):
            raise InvalidArgumentError("expected distortion must be finite and nonnegative")


class Estimate(NamedTuple):
    """An expectation and its Monte Carlo standard error (0 when exact)."""

    value: float
    stderr: float
    exact: bool
    samples: int

    def __float__(self):
        return float(self.value)


def _cdfs(instance: NetworkInstance) -> np.ndarray:
    cdf = np.cumsum(instance.demand_matrix, axis=1)
    cdf[:, -1] = 1.0
    return cdf


def sample_demands(instance: NetworkInstance, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent demand vectors, shape ``(n, K)``."""
    cdf = _cdfs(instance)
    u = rng.random((n, instance.K))
    d = np.empty((n, instance.K), dtype=np.int64)
    for k in range(instance.K):
        d[:, k] = np.searchsorted(cdf[k], u[:, k], side="right")
    return np.minimum(d, instance.N - 1)


def sample_demand(instance: NetworkInstance, seed: int) -> np.ndarray:
    """One demand vector ``d`` (file index per receiver), deterministic in ``seed``."""
    return sample_demands(instance, 1, np.random.default_rng(seed))[0]


def demand_probability(instance: NetworkInstance, demands) -> np.ndarray:
    """Probability of each demand row under independent per-receiver demand."""
    demands = np.atleast_2d(demands)
    q = instance.demand_matrix
    return np.prod(q[np.arange(instance.K)[None, :], demands], axis=1)


def _enumerate_demands(K: int, N: int, chunk: int = 1 << 16):
    it = itertools.product(range(N), repeat=K)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def expected_demand_distortion(
    instance: NetworkInstance,
    effective_rates: Callable[[np.ndarray], np.ndarray],
    trials: int = 10_000,
    seed: int = 0,
    enumeration_cap: int = ENUMERATION_CAP,
    *,
    per_demand_distortion: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Estimate:
    """Expected network distortion ``E[(1/K) sum_k var[d_k] 2^(-2 Eff_k(d))]``.

    Parameters
    ----------
    effective_rates
        Maps a batch of demands, shape ``(B, K)``, to per-receiver effective
        rates of the same shape.
    trials
        Monte Carlo draws, used only when ``N**K`` exceeds ``enumeration_cap``.
    per_demand_distortion
        Optional fast path returning the receiver-averaged distortion of each
        demand row directly; ``effective_rates`` is then ignored.

    Returns
    -------
    Estimate
        Exact expectation when the demand space is enumerable, otherwise the
        Monte Carlo mean with its standard error.
    """
    if trials <= 0:
        raise InvalidArgumentError("trials must be positive")
    var = instance.variances

    def per_demand(d):
        if per_demand_distortion is not None:
            return np.asarray(per_demand_distortion(d), dtype=float)
        eff = np.asarray(effective_rates(d), dtype=float)
        return np.mean(var[d] * np.exp2(-2.0 * eff), axis=1)

    K, N = instance.K, instance.N
    if N**K <= enumeration_cap:
        total = 0.0
        for block in _enumerate_demands(K, N):
            w = demand_probability(instance, block)
            keep = w > 0
            if keep.any():
                total += float(np.dot(w[keep], per_demand(block[keep])))
        return Estimate(total, 0.0, True, N**K)

    s1 = s2 = 0.0
    done = 0
    j = 0
    while done < trials:
        n = min(MC_CHUNK, trials - done)
        rng = np.random.default_rng([seed, j])
        vals = per_demand(sample_demands(instance, n, rng))
        s1 += float(vals.sum())
        s2 += float(np.dot(vals, vals))
        done += n
        j += 1
    mean = s1 / trials
    var_hat = max(s2 / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
    return Estimate(mean, float(np.sqrt(var_hat / trials)), False, trials)
