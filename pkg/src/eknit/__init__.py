"""Digital twin of a garment-knitted differential sensor bus."""

from .topology import (
    GarmentLayout,
    build_conductance_graph,
    calibrate_misalignment_sigma,
    path_resistance,
    reachable_fraction,
    reference_layout,
    sample_misalignment,
)
from .signal import LineParams, eye_margin, transmit_differential
from .connector import (
    MotionKind,
    PmeStrip,
    detachment_trials,
    peak_inertial_force,
    required_holding_force,
)
from .placement import (
    DEFAULT_ARM_POSITIONS,
    ImuNoiseModel,
    apply_calibration,
    fit_linear_calibration,
    rank_placements,
)
from .bus import BusModel, LineFault, ModuleDescriptor, Transaction
from .engine import (
    Scenario,
    SimResult,
    load_scenario,
    reference_scenario,
    run_monte_carlo,
    run_scenario,
    save_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "GarmentLayout",
    "build_conductance_graph",
    "calibrate_misalignment_sigma",
    "path_resistance",
    "reachable_fraction",
    "reference_layout",
    "sample_misalignment",
    "LineParams",
    "eye_margin",
    "transmit_differential",
    "MotionKind",
    "PmeStrip",
    "detachment_trials",
    "peak_inertial_force",
    "required_holding_force",
    "DEFAULT_ARM_POSITIONS",
    "ImuNoiseModel",
    "apply_calibration",
    "fit_linear_calibration",
    "rank_placements",
    "BusModel",
    "LineFault",
    "ModuleDescriptor",
    "Transaction",
    "Scenario",
    "SimResult",
    "load_scenario",
    "reference_scenario",
    "run_monte_carlo",
    "run_scenario",
    "save_scenario",
    "__version__",
]
