"""Link-level simulator and beamforming optimizer for multi-functional
RIS-aided multi-user downlink systems."""

__version__ = "0.1.0"

from .core import (Architecture, ChannelSet, Precoder, RisProfile, Side,
                   SolveReport, Strategy, SystemConfig, dbm_to_watt,
                   effective_channel, element_response, ris_matrix,
                   ris_output_power, sinr, sum_rate, watt_to_dbm)
from .channels import GeometryScene, classify_side, default_scene, \
    generate_channels, placement_search
from .architectures import (FeasibleSet, assign_ms_groups, enforce_global_power,
                            feasible, project_profile, quantize_phase)
from .optimizer import (SolverOptions, alternating_optimize, exhaustive_oracle,
                        optimize_precoder, optimize_profile,
                        sum_rate_profile_gradient, two_timescale_optimize)

__all__ = [
    "Architecture", "ChannelSet", "FeasibleSet", "GeometryScene", "Precoder",
    "RisProfile", "Side", "SolveReport", "SolverOptions", "Strategy",
    "SystemConfig", "alternating_optimize", "assign_ms_groups",
    "classify_side", "dbm_to_watt", "default_scene", "effective_channel",
    "element_response", "enforce_global_power", "exhaustive_oracle",
    "feasible", "generate_channels", "optimize_precoder", "optimize_profile",
    "placement_search", "project_profile", "quantize_phase", "ris_matrix",
    "ris_output_power", "sinr", "sum_rate", "sum_rate_profile_gradient",
    "two_timescale_optimize", "watt_to_dbm",
]
