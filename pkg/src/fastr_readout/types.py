"""Type definitions for the FASTR readout toolkit."""

from enum import Enum
from typing import List

from typing_extensions import TypedDict


class Direction(str, Enum):
    """Data flow direction along a shift-register line."""

    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def reversed(self) -> "Direction":
        return Direction.BACKWARD if self is Direction.FORWARD else Direction.FORWARD


class Orientation(str, Enum):
    """Family of shift-register lines on the processor."""

    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"


class StageState(str, Enum):
    """Tri-state of a QFP stage."""

    UNLATCHED = "unlatched"
    LATCHED_PLUS = "latched_plus"
    LATCHED_MINUS = "latched_minus"

    @property
    def is_latched(self) -> bool:
        return self is not StageState.UNLATCHED


class Experiment(str, Enum):
    """Experiments the command-line front end can run."""

    SURFACE = "surface"
    CALIBRATE = "calibrate"
    FIDELITY = "fidelity"
    PSD = "psd"
    PLAN = "plan"
    SHIFT_DEMO = "shift-demo"


class OutputFormat(str, Enum):
    """Tabular output format."""

    CSV = "csv"
    JSON = "json"


class ScatterDistribution(str, Enum):
    """Distribution of the dielectric-thickness scatter across an array."""

    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


class InversionMode(str, Enum):
    """How empirical populations are mapped back to flux in noise runs.

    LINEARIZED maps the population through the slope of the transition curve at
    the bias; EXACT clamps the population and applies the full inverse.
    """

    LINEARIZED = "linearized"
    EXACT = "exact"


class AssignmentStatus(str, Enum):
    """Outcome of a per-device bias assignment."""

    ASSIGNED = "assigned"
    FAILED = "failed"


# JSON document shapes


class TlsDocument(TypedDict):
    """TLS loss parameters inside a device document."""

    qi_lp: float
    qi_res: float
    e_sat_vpm: float


class DeviceDocument(TypedDict):
    """Device description as stored on disk."""

    cs_f: float
    cc_f: float
    lg_h: float
    ic_a: float
    d_m: float
    qc: float
    tls: TlsDocument


class BreakDocument(TypedDict):
    """A broken stage on one line of the processor."""

    line: int
    stage: int


class TopologyDocument(TypedDict):
    """Shift-register topology description."""

    n_cells: int
    stages_per_line: int
    breaks: List[BreakDocument]


class ReadoutDocument(TypedDict, total=False):
    """Readout chain settings exchanged with the command-line front end."""

    band_center_hz: float
    band_width_hz: float
    lo_offset_hz: float
    tn_k: float
    pg_dbm: float
    integration_s: float
    snr_min: float
    a_max: float
