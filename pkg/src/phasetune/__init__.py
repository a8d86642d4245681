"""Phase-based tuning of configurable instruction and data caches.

Phase distance mapping estimates a new phase's best cache configuration from
how far its miss rates sit from a base phase, instead of searching the whole
design space. The dynamic variant builds its distance windows at runtime.
"""

from .cache import (
    BASE_CONFIG,
    DESIGN_SPACE,
    SMALLEST_CONFIG,
    CacheConfig,
    CacheStats,
    enumerate_design_space,
    is_feasible,
    simulate,
    snap_to_feasible,
)
from .dynapdm import DynaPDM, TunerOptions, create_window, window_table_footprint_bits
from .energy import EnergyParams, Evaluator, PhaseCost, cost, load_params
from .oracle import exhaustive_search
from .pdm import Thresholds, estimate_configuration, map_to_window
from .phase import PhaseCharacteristics, characterize, phase_distance
from .trace import PhaseTrace, SyntheticSpec, generate_synthetic, parse_trace, parse_workload

__version__ = "0.1.0"
