"""Local cache-aided unicast: cache placement by reverse water-filling per
receiver, then per-demand water-filling of the shared rate budget."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInstanceError, InvalidArgumentError
from .model import Estimate, NetworkInstance, Receiver, expected_demand_distortion

__all__ = [
    "LcuCacheAllocation",
    "LcuDeliveryRates",
    "lcu_cache_allocation",
    "lcu_cache_allocations",
    "lcu_delivery_rates",
    "lcu_expected_distortion",
    "lcu_objective",
]


@dataclass(frozen=True, eq=False)
class LcuCacheAllocation:
    allocations: np.ndarray  # (K, N)
    water_levels: np.ndarray  # (K,)


@dataclass(frozen=True, eq=False)
class LcuDeliveryRates:
    rates: np.ndarray  # (K,)
    water_level: float


def _variances(files):
    return np.array([f.variance for f in files], dtype=float)


def lcu_cache_allocation(receiver: Receiver, files) -> tuple[np.ndarray, float]:
    """Cache split of one receiver minimizing its expected cache-only distortion.

    Returns
    -------
    alloc : ndarray, shape (N,)
        Cached rate per file; sums to the receiver's cache size.
    water_level : float
        The common marginal value ``2 ln2 q_n var_n 2^(-2 alloc_n)`` of every
        file with a positive allocation.
    """
    if receiver.cache_size < 0:
        raise InvalidArgumentError("cache size must be nonnegative")
    w = receiver.demand * _variances(files)
    if not np.any(w > 0):
        raise DegenerateInstanceError(f"receiver {receiver.index}: every q*var is zero")
    x, level = kernels.waterfill(w, 0.0, 1.0, receiver.cache_size)
    return x, float(np.exp2(level))


def lcu_cache_allocations(instance: NetworkInstance) -> LcuCacheAllocation:
    rows, levels = [], []
    for r in instance.receivers:
        x, lv = lcu_cache_allocation(r, instance.files)
        rows.append(x)
        levels.append(lv)
    return LcuCacheAllocation(np.vstack(rows), np.array(levels))


def lcu_delivery_rates(demand, cache: LcuCacheAllocation, R: float, files) -> LcuDeliveryRates:
    """Split the budget ``R`` across receivers for one demand vector (0-based file indices)."""
    if R < 0:
        raise InvalidArgumentError("rate budget must be nonnegative")
    d = np.asarray(demand, dtype=np.int64)
    var = _variances(files)
    K = d.size
    if cache.allocations.shape[0] != K:
        raise InvalidArgumentError("demand length must match the number of receivers")
    a = var[d]
    base = cache.allocations[np.arange(K), d]
    x, level = kernels.waterfill(a, base, 1.0, R)
    return LcuDeliveryRates(x, float(np.exp2(level)))


def lcu_objective(instance: NetworkInstance, cache: LcuCacheAllocation) -> float:
    """Cache-only expected distortion, receiver-averaged."""
    q = instance.demand_matrix
    return float(np.mean(np.sum(q * instance.variances * np.exp2(-2.0 * cache.allocations), axis=1)))


def lcu_expected_distortion(instance: NetworkInstance, trials=10_000, seed=0, **kw) -> Estimate:
    """Expected distortion of LC-U, exact when the demand space is small enough."""
    cache = lcu_cache_allocations(instance)
    var = instance.variances
    R = instance.rate_budget

    def per_demand(d):
        return kernels.lcu_demand_distortions(d, cache.allocations, var, R)

    return expected_demand_distortion(instance, None, trials, seed, per_demand_distortion=per_demand, **kw)
