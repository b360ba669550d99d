"""Pilot design and load analysis for multi-cell massive MIMO downlinks."""
from .design_baseline import fos_design, wbe_design
from .design_gwbe import gwbe_design, inflate_targets, snap_inflated
from .errors import GwbeError
from .kernels import BACKEND
from .netmodel import (
    NetworkConfig,
    PilotBook,
    PowerAllocation,
    SinrTargets,
    load_config,
    load_experiment,
    uplink_power_control,
)
from .sinr_engine import (
    delta_vector,
    monte_carlo_sinr,
    sinr_asymptotic,
    sinr_finite,
    sinr_lower_bound_asym,
)

__version__ = "0.1.0"
