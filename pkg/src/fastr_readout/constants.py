"""Physical constants, band defaults and unit conversions."""

import math
from typing import Union

import numpy as np
from scipy import constants as _sc

# Magnetic flux quantum (Wb) and Boltzmann constant (J/K)
PHI0: float = _sc.physical_constants["mag. flux quantum"][0]
K_B: float = _sc.k

# |cos(pi*flux)| at or below this value is treated as frustration
EPSILON_CLAMP = 1e-6

# Feedline impedance used by the lumped coupling-Q estimate
Z0_OHM = 50.0

# Duffing parameter at which the driven resonance bifurcates
BIFURCATION_A = 0.77

# Drive-coupling constant before calibration, and its calibration anchor
KAPPA_DEFAULT = 2.0
PG_ANCHOR_DBM = -98.0
A_ANCHOR = 0.05

# Readout band and LO retune limit
BAND_CENTER_HZ = 6.0e9
BAND_WIDTH_HZ = 2.5e9
LO_OFFSET_LIMIT_HZ = 750.0e6

# System noise and detector linewidth of the prototype chain
TN_K = 7.9
DETECTION_BANDWIDTH_HZ = 19.5e6

# Measured prototype anchors
PROTOTYPE_F0_HZ = 6.91e9
PROTOTYPE_QC = 329.0
PROTOTYPE_OPERATING_F0_HZ = 6.84e9

ArrayLike = Union[float, np.ndarray]


def dbm_to_watt(p_dbm: ArrayLike) -> ArrayLike:
    """Convert power in dBm to watts."""
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_watt: float) -> float:
    """Convert power in watts to dBm.

    Raises:
        ValueError: If the power is not positive
    """
    if p_watt <= 0:
        raise ValueError(f"Power must be positive to express in dBm, got {p_watt}")
    return 10.0 * math.log10(p_watt / 1e-3)
