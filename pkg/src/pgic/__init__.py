"""Sum-rate optimal power allocation for parallel Gaussian interference channels in the noisy-interference regime."""

__version__ = "0.1.0"

from .allocator import (
    Allocation,
    SymmetricProfile,
    activity_table,
    power_region_boundary,
    solve_general,
    solve_symmetric,
    symmetric_profile,
)
from .capacity import tin_gradient, tin_rate, total_tin_rate
from .errors import NotInPowerRegion, NumericalFailure, PgicError
from .genie import GenieParams, bound_audit, f_value, genie_params, tangency_check
from .model import ChannelClass, PgicInstance, PowerPair, SubChannel, classify, coefficient_condition, corner_points, in_noisy_region
from .oracle import GridSpec, compare, grid_search
from .subdiff import RegionLabel, Subgradient, in_B, invert, subdifferential

__all__ = [
    "__version__",
    "Allocation",
    "SymmetricProfile",
    "activity_table",
    "power_region_boundary",
    "solve_general",
    "solve_symmetric",
    "symmetric_profile",
    "tin_gradient",
    "tin_rate",
    "total_tin_rate",
    "NotInPowerRegion",
    "NumericalFailure",
    "PgicError",
    "GenieParams",
    "bound_audit",
    "f_value",
    "genie_params",
    "tangency_check",
    "ChannelClass",
    "PgicInstance",
    "PowerPair",
    "SubChannel",
    "classify",
    "coefficient_condition",
    "corner_points",
    "in_noisy_region",
    "GridSpec",
    "compare",
    "grid_search",
    "RegionLabel",
    "Subgradient",
    "in_B",
    "invert",
    "subdifferential",
]
