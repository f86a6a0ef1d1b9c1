"""Scaling planner: resonator counts, frequency slots, quality factors and wiring."""

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from .constants import BAND_CENTER_HZ, BAND_WIDTH_HZ
from .exceptions import NotPerfectSquare
from .logging import FastrLogger

logger = FastrLogger.get_logger("planner")

# Intrinsic Q must exceed the largest coupling Q by this factor
MARGIN = 10

# Qc bounds per hertz of channel spacing
QC_LOW_NUMERATOR = 4.75e9
QC_HIGH_NUMERATOR = 7.25e9

DEFAULT_CELL_COUNTS = (64, 144, 256, 400, 576)

# Qubits in one unit cell of the processor
QUBITS_PER_CELL = 8


@dataclass(frozen=True)
class ScalingRow:
    """Readout resources for one processor size."""

    n_qubits: int
    n_cells: int
    n_res: int
    delta_f: float
    qc_min: float
    qc_max: float
    qi_min: float
    n_wires: int

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def exact_isqrt(n_cells: int) -> int:
    """Side length of a square processor.

    Raises:
        NotPerfectSquare: If n_cells is not a positive perfect square
    """
    if n_cells < 1:
        raise NotPerfectSquare(f"n_cells must be positive, got {n_cells}", n_cells=n_cells)
    side = math.isqrt(n_cells)
    if side * side != n_cells:
        raise NotPerfectSquare(n_cells=n_cells)
    return side


def n_wires(n_res: int) -> int:
    """Smallest N with N^3 >= 2 n_res.

    Integer arithmetic throughout, so exact cubes are not rounded up.
    """
    if n_res < 1:
        raise ValueError(f"n_res must be positive, got {n_res}")
    target = 2 * n_res
    n = max(1, int(round(target ** (1.0 / 3.0))))
    while n**3 < target:
        n += 1
    while n > 1 and (n - 1) ** 3 >= target:
        n -= 1
    return n


def scaling_row(
    n_cells: int,
    band_center: float = BAND_CENTER_HZ,
    band_width: float = BAND_WIDTH_HZ,
) -> ScalingRow:
    """Resonator count, spacing, Qc window, minimum Qi and wire count.

    Args:
        n_cells: Processor cells, a perfect square
        band_center: Readout band center in Hz
        band_width: Readout bandwidth in Hz

    Returns:
        The scaling row

    Raises:
        NotPerfectSquare: If n_cells is not a perfect square
    """
    if band_width <= 0 or band_center <= 0:
        raise ValueError("Band center and width must be positive")
    n_res = 4 * exact_isqrt(n_cells)
    delta_f = band_width / (4 * n_res)
    qc_min = QC_LOW_NUMERATOR / delta_f
    qc_max = QC_HIGH_NUMERATOR / delta_f
    qi_min = float(round(MARGIN * qc_max, -2))
    return ScalingRow(
        n_qubits=QUBITS_PER_CELL * n_cells,
        n_cells=n_cells,
        n_res=n_res,
        delta_f=delta_f,
        qc_min=qc_min,
        qc_max=qc_max,
        qi_min=qi_min,
        n_wires=n_wires(n_res),
    )


def scaling_table(
    cell_counts: Sequence[int] = DEFAULT_CELL_COUNTS,
    band_center: float = BAND_CENTER_HZ,
    band_width: float = BAND_WIDTH_HZ,
) -> List[ScalingRow]:
    """Scaling rows for several processor sizes."""
    rows = [scaling_row(n, band_center, band_width) for n in cell_counts]
    logger.debug(f"Scaling table for {len(rows)} processor sizes")
    return rows


def frequency_grid(
    n_res: int, band_center: float = BAND_CENTER_HZ, band_width: float = BAND_WIDTH_HZ
) -> np.ndarray:
    """Evenly pitched target frequencies centered in the band."""
    if n_res < 1:
        raise ValueError(f"n_res must be positive, got {n_res}")
    pitch = band_width / n_res
    return band_center + pitch * (np.arange(n_res) - 0.5 * (n_res - 1))


def wire_comparison(n_res: int) -> Dict[str, int]:
    """Bias lines for per-device current biasing versus DAC addressing."""
    return {"per_device": 2 * n_res, "dac_addressed": n_wires(n_res)}


def reachability_margin(
    slots: Sequence[float],
    zero_flux_frequencies: Sequence[float],
    linewidths: Union[float, Sequence[float]],
) -> np.ndarray:
    """How far each slot sits below its device's zero-flux frequency, in linewidths.

    Tuning only lowers the frequency, so a negative margin marks a slot the
    device cannot reach.
    """
    slot = np.asarray(slots, dtype=float)
    f_max = np.asarray(zero_flux_frequencies, dtype=float)
    if slot.shape != f_max.shape:
        raise ValueError("One zero-flux frequency is needed per slot")
    return (f_max - slot) / np.asarray(linewidths, dtype=float)


def _two_significant(x: float) -> str:
    return f"{float(f'{x:.2g}'):g}"


def format_table(rows: Sequence[ScalingRow]) -> List[Dict[str, Any]]:
    """Rows rounded for presentation: Qc to 2 significant figures, Qi to the nearest 100."""
    return [
        {
            "n_qubits": row.n_qubits,
            "n_cells": row.n_cells,
            "n_res": row.n_res,
            "delta_f_mhz": round(row.delta_f / 1e6, 3),
            "qc_range": f"{_two_significant(row.qc_min)}-{_two_significant(row.qc_max)}",
            "qi_min": int(round(row.qi_min, -2)),
            "n_wires": row.n_wires,
        }
        for row in rows
    ]
