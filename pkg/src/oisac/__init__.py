"""Capacity-distortion analysis for an IM/DD optical ISAC link.

The package couples a quantized intensity-modulated communication channel with
monostatic range sensing from the same waveform: `channel` builds the system
model, `estimators` provides MLE/MAP/posterior-mean range estimators and the
Bayesian CRB, `cost` turns them into per-symbol sensing costs, `optimizer`
traces the capacity-distortion region, and `cli` exposes the whole pipeline as
the `oisac` command.
"""

from .channel import (
    ConfigError,
    ConvergenceError,
    NumericalError,
    OpticalGeometry,
    QuantizedChannel,
    SystemParams,
    build_quantized_channel,
    comm_gain,
    lambertian_order,
    radiant_intensity,
    sensing_gain,
    worker_count,
)
from .cost import (
    COST_KINDS,
    MC_KINDS,
    CostSample,
    CostVector,
    MonteCarloConfig,
    avg_bcrb,
    cost_vector,
    mc_cost,
)
from .estimators import (
    QuadratureConfig,
    RangeEstimate,
    SensingObservation,
    bcrb,
    default_quadrature,
    fisher_information,
    map_range,
    map_root,
    mle_range,
    mp_range,
    mp_values,
    posterior_density,
)
from .optimizer import (
    BAAResult,
    DualState,
    InputDistribution,
    RegionPoint,
    RegionSweepError,
    baa_inner,
    capacity_bounds,
    cd_region,
    cdf_of,
    cfa_dist,
    dual_power_search,
    mutual_information,
    point_mass,
    sens_opt_endpoint,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "NumericalError",
    "OpticalGeometry",
    "QuantizedChannel",
    "SystemParams",
    "build_quantized_channel",
    "comm_gain",
    "lambertian_order",
    "radiant_intensity",
    "sensing_gain",
    "worker_count",
    "COST_KINDS",
    "MC_KINDS",
    "CostSample",
    "CostVector",
    "MonteCarloConfig",
    "avg_bcrb",
    "cost_vector",
    "mc_cost",
    "QuadratureConfig",
    "RangeEstimate",
    "SensingObservation",
    "bcrb",
    "default_quadrature",
    "fisher_information",
    "map_range",
    "map_root",
    "mle_range",
    "mp_range",
    "mp_values",
    "posterior_density",
    "BAAResult",
    "DualState",
    "InputDistribution",
    "RegionPoint",
    "RegionSweepError",
    "baa_inner",
    "capacity_bounds",
    "cd_region",
    "cdf_of",
    "cfa_dist",
    "dual_power_search",
    "mutual_information",
    "point_mass",
    "sens_opt_endpoint",
    "__version__",
]
