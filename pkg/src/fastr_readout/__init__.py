"""FASTR readout toolkit

Simulation and calibration of frequency- and sensitivity-tunable resonator
arrays read out through QFP shift registers.
"""

__version__ = "0.1.0"

from .calibration import (
    BiasAssignment,
    CalibrationSettings,
    Tolerances,
    extract_contour,
    homogenize_array,
    responsivity,
    sample_surface,
    select_bias,
)
from .config import ConfigLoader, Scenario
from .exceptions import (
    BrokenPath,
    ConfigError,
    DegenerateStates,
    FastrError,
    FitDiverged,
    FluxAtFrustration,
    InsufficientSpan,
    LineCapacityExceeded,
    NotPerfectSquare,
    OutOfDomain,
    ResponsivityUnreachable,
    StageInoperable,
    TargetUnreachable,
)
from .metrology import TransitionCurve, fit_noise, fit_transition, psd
from .planner import ScalingRow, frequency_grid, scaling_row
from .readout import ReadoutSystem, ToneComb, end_to_end_fidelity, snr_budget
from .resonator import (
    BiasPoint,
    JunctionParams,
    ResonanceProfile,
    ResonatorDesign,
    TlsLossModel,
    prototype_device,
    resonance_frequency,
)
from .shift_register import ShiftLine, build_line, build_topology, stream_out
from .types import Direction, Experiment, Orientation, OutputFormat, StageState

__all__ = [
    "__version__",
    "BiasPoint",
    "JunctionParams",
    "ResonanceProfile",
    "ResonatorDesign",
    "TlsLossModel",
    "prototype_device",
    "resonance_frequency",
    "BiasAssignment",
    "CalibrationSettings",
    "Tolerances",
    "extract_contour",
    "homogenize_array",
    "responsivity",
    "sample_surface",
    "select_bias",
    "ShiftLine",
    "build_line",
    "build_topology",
    "stream_out",
    "ReadoutSystem",
    "ToneComb",
    "end_to_end_fidelity",
    "snr_budget",
    "TransitionCurve",
    "fit_noise",
    "fit_transition",
    "psd",
    "ScalingRow",
    "frequency_grid",
    "scaling_row",
    "ConfigLoader",
    "Scenario",
    "Direction",
    "Experiment",
    "Orientation",
    "OutputFormat",
    "StageState",
    "FastrError",
    "FluxAtFrustration",
    "FitDiverged",
    "TargetUnreachable",
    "ResponsivityUnreachable",
    "StageInoperable",
    "BrokenPath",
    "LineCapacityExceeded",
    "DegenerateStates",
    "InsufficientSpan",
    "OutOfDomain",
    "NotPerfectSquare",
    "ConfigError",
]
