"""Uplink space-terrestrial cooperation: channel model, MMSE estimation,
ergodic MRC throughput and max-min power control."""

from .channel import (
    ChannelRealization,
    ChannelStatistics,
    build_geometry,
    build_statistics,
    correlation_matrix,
    draw_realization,
    los_vector,
    satellite_pathloss,
    terrestrial_pathloss,
)
from .config import ScenarioConfig, load_config, save_config
from .estimation import EstimateRealization, EstimateStatistics, estimate_stats, pilot_receive_and_estimate
from .power import (
    MaxMinSolution,
    NonConvergenceError,
    interference_function,
    max_min_allocate,
    solve_fixed_power,
    validate_solution,
    xi_upper_bound,
)
from .sinr import (
    SinrBreakdown,
    SinrCoefficients,
    SystemVariant,
    closed_form_sinr,
    monte_carlo_sinr,
    mrc_combiner,
    sinr_coefficients,
    throughput,
)

__version__ = "0.1.0"
