"""Lossy coded caching toolkit.

Gaussian sources with a rate-distortion model, cached at receivers and
delivered over a shared link, either one stream per receiver (LC-U) or by
coded multicast with random fractional caching (CC-CM).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CachesimError,
    ConfigError,
    DegenerateInstanceError,
    EnumerationCapError,
    InfeasibleDesignError,
    InvalidArgumentError,
)
from .model import (  # noqa: E402
    Estimate,
    NetworkInstance,
    Receiver,
    SourceFile,
    TradeoffPoint,
    draw_variances,
    effective_rate,
    expected_demand_distortion,
    gaussian_distortion,
    sample_demand,
    zipf_demand,
)
from .lcu import (  # noqa: E402
    lcu_cache_allocation,
    lcu_cache_allocations,
    lcu_delivery_rates,
    lcu_expected_distortion,
)
from .bounds import (  # noqa: E402
    BoundResult,
    CacheDesign,
    corollary1_bound,
    gamma_i,
    lambda_i,
    theorem1_bound,
    theorem2_expected_bound,
    theorem3_expected_bound,
    trf_psi1,
)
from .rfgcc import (  # noqa: E402
    SimParams,
    build_conflict_graph,
    gcc_delivery,
    packet_demand,
    random_fill_caches,
    simulate,
    verify_decodable,
)
from .ccm import (  # noqa: E402
    ccm_distortion_curve,
    solve_trf,
    solve_uniform,
    uncoded_residual_waterfill,
)
