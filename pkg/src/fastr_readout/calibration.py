"""Bias selection and array homogenization.

Samples the frequency surface of a device over the two SQUID fluxes, extracts
constant-frequency contours by scan-line root finding, measures the SENSE
responsivity along them, and picks per-device bias points so an array with
fabrication scatter lands on a uniform frequency grid with a common
responsivity.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import FluxAtFrustration, ResponsivityUnreachable, TargetUnreachable
from .logging import FastrLogger
from .resonator import (
    BiasPoint,
    ResonatorDesign,
    perturb_design,
    resonance_frequency,
    resonance_frequency_map,
    retarget_design,
    zero_flux_frequency,
)
from .types import AssignmentStatus, ScatterDistribution

logger = FastrLogger.get_logger("calibration")

DEFAULT_SIGNAL_FLUX = 0.01
DEFAULT_QI = 6000.0
DEFAULT_MAX_FLUX = 0.48
DEFAULT_MARGIN_LINEWIDTHS = 6.0
DEFAULT_MIN_SPACING_LINEWIDTHS = 2.0

# Relative guard on "closer than" so exactly gridded pairs never collide
_COLLISION_GUARD = 1e-9


@dataclass(frozen=True)
class Tolerances:
    """Per-device acceptance: frequency in linewidths, responsivity as a fraction."""

    f_linewidths: float = 0.01
    r_fraction: float = 0.05


@dataclass(frozen=True)
class CalibrationSettings:
    """Knobs shared by contour extraction, responsivity and bias selection."""

    signal_flux: float = DEFAULT_SIGNAL_FLUX
    qi: float = DEFAULT_QI
    max_flux: float = DEFAULT_MAX_FLUX
    tolerances: Tolerances = field(default_factory=Tolerances)
    min_spacing_linewidths: float = DEFAULT_MIN_SPACING_LINEWIDTHS
    grid_pitch: Optional[float] = None

    @property
    def pitch(self) -> float:
        return self.grid_pitch if self.grid_pitch is not None else self.max_flux / 63.0


@dataclass(frozen=True)
class FrequencySurface:
    """Resonance frequency over a grid of (phi_tune, phi_sense); NaN at frustration."""

    phi_tune: np.ndarray
    phi_sense: np.ndarray
    grid: np.ndarray

    def rows(self) -> List[Tuple[float, float, float]]:
        """Flattened (phi_tune, phi_sense, f0) triples, tune-major."""
        return [
            (float(t), float(s), float(self.grid[i, j]))
            for i, t in enumerate(self.phi_tune)
            for j, s in enumerate(self.phi_sense)
        ]


@dataclass(frozen=True)
class Contour:
    """Ordered constant-frequency bias points, from the TUNE axis toward SENSE."""

    points: Tuple[BiasPoint, ...]
    f_target: float
    max_deviation: float
    tolerance: float
    # i in gaps: points i and i + 1 are further apart than the pitch
    gaps: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    def segments(self) -> List[Tuple[BiasPoint, ...]]:
        """Runs of consecutive points with no gap between them."""
        bounds = [0, *(i + 1 for i in self.gaps), len(self.points)]
        return [self.points[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]


@dataclass(frozen=True)
class ResponsivityProfile:
    """Responsivity and arc position at each contour point."""

    values: Tuple[float, ...]
    arc_position: Tuple[float, ...]


@dataclass(frozen=True)
class BiasAssignment:
    """Bias chosen for one device and how well it meets its targets."""

    device_id: str
    status: AssignmentStatus
    f_target: float
    r_target: float
    bias: Optional[BiasPoint] = None
    f0: float = math.nan
    linewidth: float = math.nan
    responsivity: float = math.nan
    f_residual: float = math.nan
    r_residual: float = math.nan
    f_tolerance: float = math.nan
    r_tolerance: float = math.nan
    reason: str = ""

    @property
    def within_tolerance(self) -> bool:
        return (
            self.status is AssignmentStatus.ASSIGNED
            and abs(self.f_residual) <= self.f_tolerance
            and abs(self.r_residual) <= self.r_tolerance
        )


@dataclass(frozen=True)
class ArrayDevice:
    """One fabricated device of an array."""

    device_id: str
    design: ResonatorDesign
    delta_d_over_d: float = 0.0


@dataclass(frozen=True)
class CollisionReport:
    """Fraction of devices free of collisions and the colliding index pairs."""

    yield_fraction: float
    pairs: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class HomogenizationResult:
    """Per-device assignments (input order) and the array summary."""

    assignments: List[BiasAssignment]
    summary: Dict[str, Any]


def _linewidth(design: ResonatorDesign, f0: float, qi: float) -> float:
    return f0 * (1.0 / qi + 1.0 / design.qc)


# Surface and contour


def sample_surface(
    device: ResonatorDesign,
    n_per_axis: int = 64,
    flux_range: Tuple[float, float] = (0.0, 0.5),
) -> FrequencySurface:
    """Evaluate the resonance frequency on an n x n flux grid.

    Args:
        device: Device design
        n_per_axis: Samples per axis, at least 16
        flux_range: Inclusive flux interval sampled on both axes

    Returns:
        The surface, NaN where a SQUID is frustration-clamped
    """
    if n_per_axis < 16:
        raise ValueError(f"n_per_axis must be at least 16, got {n_per_axis}")
    axis = np.linspace(flux_range[0], flux_range[1], n_per_axis)
    grid = resonance_frequency_map(device, axis[:, None], axis[None, :])
    return FrequencySurface(phi_tune=axis, phi_sense=axis.copy(), grid=grid)


def _solve_sense(
    device: ResonatorDesign, phi_tune: float, f_target: float, max_flux: float
) -> float:
    """SENSE flux on the scan line phi_tune where the frequency equals f_target."""
    g0 = resonance_frequency(device, BiasPoint(phi_tune, 0.0)) - f_target
    if g0 <= 0:
        return 0.0
    g_max = resonance_frequency(device, BiasPoint(phi_tune, max_flux)) - f_target
    if g_max >= 0:
        return max_flux
    return float(
        brentq(
            lambda s: resonance_frequency(device, BiasPoint(phi_tune, s)) - f_target,
            0.0,
            max_flux,
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
        )
    )


def _solve_tune(
    device: ResonatorDesign, phi_sense: float, f_target: float, max_flux: float
) -> float:
    return float(
        brentq(
            lambda t: resonance_frequency(device, BiasPoint(t, phi_sense)) - f_target,
            0.0,
            max_flux,
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
        )
    )


def extract_contour(
    device: ResonatorDesign,
    f_target: float,
    tolerance_hz: float,
    max_flux: float = DEFAULT_MAX_FLUX,
    pitch: Optional[float] = None,
    n_lines: int = 32,
) -> Contour:
    """Constant-frequency contour inside [0, max_flux]^2.

    Scan lines of constant phi_tune are solved for phi_sense by bracketed root
    finding. Lines run from the TUNE-axis end (phi_sense = 0) toward the SENSE
    side, and extra lines are bisected in until consecutive points are closer
    than the pitch. Points off the target by more than the tolerance are
    dropped; any gap this leaves is logged and recorded in ``Contour.gaps``.

    Args:
        device: Device design
        f_target: Target resonance frequency
        tolerance_hz: Largest accepted |f(point) - f_target|
        max_flux: Upper flux bound on both axes
        pitch: Largest allowed gap between consecutive points (flux units)
        n_lines: Initial number of scan lines

    Returns:
        The ordered contour

    Raises:
        TargetUnreachable: If f_target is above the zero-flux frequency or below
            the frequency at (max_flux, max_flux)
    """
    if not tolerance_hz > 0:
        raise ValueError(f"tolerance_hz must be positive, got {tolerance_hz}")
    gap = pitch if pitch is not None else max_flux / 63.0
    f_max = zero_flux_frequency(device)
    f_min = resonance_frequency(device, BiasPoint(max_flux, max_flux))
    if f_target > f_max or f_target < f_min:
        raise TargetUnreachable(
            f"Target {f_target:.6e} Hz outside attainable [{f_min:.6e}, {f_max:.6e}] Hz",
            f_target=f_target,
            f_min=f_min,
            f_max=f_max,
        )
    if f_target == f_max:
        return Contour((BiasPoint(0.0, 0.0),), f_target, 0.0, tolerance_hz)

    # Ends of the phi_tune range
    if resonance_frequency(device, BiasPoint(max_flux, 0.0)) <= f_target:
        tune_hi = _solve_tune(device, 0.0, f_target, max_flux)
    else:
        tune_hi = max_flux
    if resonance_frequency(device, BiasPoint(0.0, max_flux)) <= f_target:
        tune_lo = 0.0
    else:
        tune_lo = _solve_tune(device, max_flux, f_target, max_flux)

    tunes = list(np.linspace(tune_hi, tune_lo, max(n_lines, 2)))
    senses = [_solve_sense(device, t, f_target, max_flux) for t in tunes]
    senses[0] = 0.0 if tune_hi < max_flux else senses[0]

    i = 0
    while i < len(tunes) - 1:
        step = math.hypot(tunes[i] - tunes[i + 1], senses[i] - senses[i + 1])
        if step >= gap and tunes[i] - tunes[i + 1] > 1e-13:
            mid = 0.5 * (tunes[i] + tunes[i + 1])
            tunes.insert(i + 1, mid)
            senses.insert(i + 1, _solve_sense(device, mid, f_target, max_flux))
        else:
            i += 1

    points: List[BiasPoint] = []
    gaps: List[int] = []
    dropped = False
    max_dev = 0.0
    for t, s in zip(tunes, senses):
        dev = abs(resonance_frequency(device, BiasPoint(t, s)) - f_target)
        if dev > tolerance_hz:
            logger.debug(f"Dropping contour point ({t:.6f}, {s:.6f}), off by {dev:.3g} Hz")
            dropped = True
            continue
        if points and dropped:
            prev = points[-1]
            step = math.hypot(prev.phi_tune - t, prev.phi_sense - s)
            if step >= gap:
                logger.warning(
                    f"Contour at {f_target:.6e} Hz has a {step:.4g} flux gap after "
                    f"({prev.phi_tune:.6f}, {prev.phi_sense:.6f})"
                )
                gaps.append(len(points) - 1)
        dropped = False
        points.append(BiasPoint(t, s))
        max_dev = max(max_dev, dev)

    logger.debug(f"Contour at {f_target:.6e} Hz: {len(points)} points, {len(gaps)} gaps")
    return Contour(tuple(points), f_target, max_dev, tolerance_hz, tuple(gaps))


# Responsivity


def responsivity(
    device: ResonatorDesign,
    bias: BiasPoint,
    signal_flux: float = DEFAULT_SIGNAL_FLUX,
    qi: float = DEFAULT_QI,
) -> float:
    """Frequency swing in linewidths for a +/- signal_flux step on the SENSE SQUID.

    Raises:
        FluxAtFrustration: If a modulated SENSE flux reaches frustration
    """
    if not signal_flux > 0:
        raise ValueError(f"signal_flux must be positive, got {signal_flux}")
    f_up = resonance_frequency(device, BiasPoint(bias.phi_tune, bias.phi_sense + signal_flux))
    f_down = resonance_frequency(device, BiasPoint(bias.phi_tune, bias.phi_sense - signal_flux))
    f0 = resonance_frequency(device, bias)
    return abs(f_up - f_down) / _linewidth(device, f0, qi)


def responsivity_profile(
    device: ResonatorDesign,
    contour: Contour,
    signal_flux: float = DEFAULT_SIGNAL_FLUX,
    qi: float = DEFAULT_QI,
) -> ResponsivityProfile:
    """Responsivity along a contour.

    The profile stops at the first point whose modulated SENSE flux reaches
    frustration, so it may be shorter than the contour near the flux boundary.
    """
    values: List[float] = []
    arc: List[float] = []
    position = 0.0
    previous: Optional[BiasPoint] = None
    for point in contour.points:
        try:
            r = responsivity(device, point, signal_flux, qi)
        except FluxAtFrustration:
            break
        if previous is not None:
            position += math.hypot(
                point.phi_tune - previous.phi_tune, point.phi_sense - previous.phi_sense
            )
        values.append(r)
        arc.append(position)
        previous = point
    return ResponsivityProfile(tuple(values), tuple(arc))


def _refine_on_segment(
    device: ResonatorDesign,
    contour: Contour,
    lo: int,
    hi: int,
    r_target: float,
    settings: CalibrationSettings,
) -> Optional[BiasPoint]:
    """Root of R - r_target between two neighbouring contour points, on the contour."""
    a, b = contour.points[lo], contour.points[hi]
    if a.phi_tune == b.phi_tune:
        return None

    def point_at(t: float) -> BiasPoint:
        return BiasPoint(t, _solve_sense(device, t, contour.f_target, settings.max_flux))

    def h(t: float) -> float:
        return responsivity(device, point_at(t), settings.signal_flux, settings.qi) - r_target

    ha, hb = h(a.phi_tune), h(b.phi_tune)
    if ha == 0:
        return a
    if hb == 0:
        return b
    if ha * hb > 0:
        return None
    t = brentq(h, a.phi_tune, b.phi_tune, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return point_at(float(t))


def select_bias(
    device: ResonatorDesign,
    f_target: float,
    r_target: float,
    tolerances: Optional[Tolerances] = None,
    settings: Optional[CalibrationSettings] = None,
    device_id: str = "device",
) -> BiasAssignment:
    """Bias on the f_target contour whose responsivity is closest to r_target.

    The best sampled point (ties broken by smallest phi_sense) is refined by root
    finding between its contour neighbours.

    Args:
        device: Device design
        f_target: Target frequency
        r_target: Target responsivity in linewidths
        tolerances: Overrides settings.tolerances when given
        settings: Calibration settings
        device_id: Identifier echoed in the assignment

    Returns:
        The assignment with its residuals

    Raises:
        TargetUnreachable: If the contour does not exist
        ResponsivityUnreachable: If r_target is outside the contour's range
    """
    settings = settings or CalibrationSettings()
    tolerances = tolerances or settings.tolerances
    f_tol = tolerances.f_linewidths * _linewidth(device, f_target, settings.qi)
    r_tol = tolerances.r_fraction * r_target

    try:
        contour = extract_contour(device, f_target, f_tol, settings.max_flux, settings.pitch)
    except TargetUnreachable as e:
        e.device_id = device_id
        raise
    profile = responsivity_profile(device, contour, settings.signal_flux, settings.qi)
    if not profile.values:
        raise ResponsivityUnreachable(
            f"No evaluable responsivity on the contour of {device_id}",
            r_target=r_target,
            device_id=device_id,
        )
    r = np.asarray(profile.values)
    r_min, r_max = float(r.min()), float(r.max())
    if r_target < r_min - r_tol or r_target > r_max + r_tol:
        raise ResponsivityUnreachable(
            f"Responsivity {r_target} outside [{r_min:.4f}, {r_max:.4f}] for {device_id}",
            r_target=r_target,
            r_min=r_min,
            r_max=r_max,
            device_id=device_id,
        )

    error = np.abs(r - r_target)
    best = float(error.min())
    candidates = [i for i in range(len(r)) if error[i] == best]
    idx = min(candidates, key=lambda i: contour.points[i].phi_sense)
    chosen = contour.points[idx]
    chosen_error = best

    for lo, hi in ((idx - 1, idx), (idx, idx + 1)):
        if lo < 0 or hi >= len(r) or lo in contour.gaps:
            continue
        refined = _refine_on_segment(device, contour, lo, hi, r_target, settings)
        if refined is None:
            continue
        refined_error = abs(
            responsivity(device, refined, settings.signal_flux, settings.qi) - r_target
        )
        if refined_error < chosen_error:
            chosen, chosen_error = refined, refined_error

    f0 = resonance_frequency(device, chosen)
    achieved_r = responsivity(device, chosen, settings.signal_flux, settings.qi)
    return BiasAssignment(
        device_id=device_id,
        status=AssignmentStatus.ASSIGNED,
        f_target=f_target,
        r_target=r_target,
        bias=chosen,
        f0=f0,
        linewidth=_linewidth(device, f0, settings.qi),
        responsivity=achieved_r,
        f_residual=f0 - f_target,
        r_residual=achieved_r - r_target,
        f_tolerance=f_tol,
        r_tolerance=r_tol,
    )


# Array level


def collision_yield(
    zero_flux_frequencies: Sequence[float],
    min_spacing_linewidths: float,
    linewidth: float,
) -> CollisionReport:
    """Fraction of devices not in any pair closer than min_spacing linewidths.

    Args:
        zero_flux_frequencies: Resonance frequencies of the array
        min_spacing_linewidths: Spacing below which two resonances collide
        linewidth: Linewidth used as the spacing unit

    Returns:
        Yield and colliding index pairs (i < j, input indices)
    """
    freqs = np.asarray(zero_flux_frequencies, dtype=float)
    if freqs.size == 0:
        raise ValueError("collision_yield needs at least one frequency")
    limit = min_spacing_linewidths * linewidth * (1.0 - _COLLISION_GUARD)
    distance = np.abs(freqs[:, None] - freqs[None, :])
    close = np.triu(distance < limit, k=1)
    ii, jj = np.nonzero(close)
    colliding = np.union1d(ii, jj)
    pairs = tuple((int(i), int(j)) for i, j in zip(ii, jj))
    return CollisionReport(1.0 - colliding.size / freqs.size, pairs)


def simulate_collision_yield(
    n_resonators: int,
    pitch_linewidths: float,
    sigma_linewidths: float,
    min_spacing_linewidths: float,
    n_trials: int,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Monte Carlo collision yields of a gridded array with Gaussian scatter.

    Frequencies are in linewidth units; returns one yield per trial.
    """
    rng = np.random.default_rng(seed)
    nominal = pitch_linewidths * np.arange(n_resonators, dtype=float)
    freqs = nominal + sigma_linewidths * rng.standard_normal((n_trials, n_resonators))
    limit = min_spacing_linewidths * (1.0 - _COLLISION_GUARD)
    distance = np.abs(freqs[:, :, None] - freqs[:, None, :])
    close = distance < limit
    idx = np.arange(n_resonators)
    close[:, idx, idx] = False
    colliding = close.any(axis=2).sum(axis=1)
    return 1.0 - colliding / n_resonators


def worst_case_delta(distribution: ScatterDistribution, spread: float) -> float:
    """Largest thickness error planned for: the uniform half-width or 3 sigma."""
    if distribution is ScatterDistribution.GAUSSIAN:
        return min(3.0 * spread, 0.5)
    return spread


def draw_thickness_scatter(
    n: int,
    spread: float,
    distribution: ScatterDistribution = ScatterDistribution.UNIFORM,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Relative thickness errors for n devices.

    Uniform draws lie in [-spread, spread]; Gaussian draws have sigma = spread and
    are clipped to |delta| <= 0.5.
    """
    if spread < 0:
        raise ValueError(f"spread must be non-negative, got {spread}")
    rng = np.random.default_rng(seed)
    if distribution is ScatterDistribution.GAUSSIAN:
        return np.clip(spread * rng.standard_normal(n), -0.5, 0.5)
    return rng.uniform(-spread, spread, n)


def design_array(
    template: ResonatorDesign,
    slots: Sequence[float],
    worst_delta: float,
    margin_linewidths: float = DEFAULT_MARGIN_LINEWIDTHS,
    qi: float = DEFAULT_QI,
) -> List[ResonatorDesign]:
    """Nominal designs, one per slot, reachable under thickness scatter.

    Each design is retargeted so that even at a thickness error of -worst_delta
    its zero-flux frequency sits margin_linewidths above its slot.
    """
    if not 0 <= worst_delta < 1:
        raise ValueError(f"worst_delta must be in [0, 1), got {worst_delta}")
    designs = []
    for slot in slots:
        linewidth = _linewidth(template, slot, qi)
        f_nominal = (slot + margin_linewidths * linewidth) / math.sqrt(1.0 - worst_delta)
        designs.append(retarget_design(template, f_nominal))
    return designs


def scatter_designs(
    designs: Sequence[ResonatorDesign], deltas: Sequence[float]
) -> List[ResonatorDesign]:
    """Apply one thickness error per design."""
    if len(designs) != len(deltas):
        raise ValueError("One thickness error is needed per design")
    return [perturb_design(d, float(delta)).design for d, delta in zip(designs, deltas)]


def build_array(
    template: ResonatorDesign,
    slots: Sequence[float],
    spread: float,
    distribution: ScatterDistribution = ScatterDistribution.UNIFORM,
    seed: Optional[int] = None,
    margin_linewidths: float = DEFAULT_MARGIN_LINEWIDTHS,
    qi: float = DEFAULT_QI,
) -> List[ArrayDevice]:
    """Fabricated array: staggered nominal designs plus seeded thickness scatter."""
    nominal = design_array(
        template, slots, worst_case_delta(distribution, spread), margin_linewidths, qi
    )
    deltas = draw_thickness_scatter(len(nominal), spread, distribution, seed)
    fabricated = scatter_designs(nominal, deltas)
    return [
        ArrayDevice(device_id=f"dev{k:03d}", design=design, delta_d_over_d=float(delta))
        for k, (design, delta) in enumerate(zip(fabricated, deltas))
    ]


def homogenize_array(
    devices: Sequence[ArrayDevice],
    grid: Sequence[float],
    r_target: float,
    settings: Optional[CalibrationSettings] = None,
) -> HomogenizationResult:
    """Bias every device of an array onto its slot with a common responsivity.

    Devices sorted by zero-flux frequency are matched to sorted slots. Devices
    that cannot reach their slot, or miss a tolerance, are reported as failed.

    Args:
        devices: Array devices
        grid: Slot frequencies, one per device
        r_target: Target responsivity in linewidths
        settings: Calibration settings

    Returns:
        Assignments in input order and a summary
    """
    settings = settings or CalibrationSettings()
    if len(devices) != len(grid):
        raise ValueError(f"{len(devices)} devices cannot fill {len(grid)} slots")

    f00 = [zero_flux_frequency(d.design) for d in devices]
    by_frequency = sorted(range(len(devices)), key=lambda i: (f00[i], devices[i].device_id))
    slots = sorted(float(s) for s in grid)

    assignments: Dict[int, BiasAssignment] = {}
    for slot, index in zip(slots, by_frequency):
        device = devices[index]
        try:
            assignment = select_bias(
                device.design, slot, r_target, settings=settings, device_id=device.device_id
            )
        except (TargetUnreachable, ResponsivityUnreachable) as e:
            logger.warning(f"Device {device.device_id} failed: {e.message}")
            assignment = BiasAssignment(
                device_id=device.device_id,
                status=AssignmentStatus.FAILED,
                f_target=slot,
                r_target=r_target,
                reason=type(e).__name__,
            )
        else:
            if not assignment.within_tolerance:
                logger.warning(f"Device {device.device_id} misses its tolerances")
                assignment = replace(
                    assignment, status=AssignmentStatus.FAILED, reason="tolerance"
                )
        assignments[index] = assignment

    ordered = [assignments[i] for i in range(len(devices))]
    summary = summarize_assignments(ordered, f00, settings)
    logger.info(
        f"Homogenized {summary['n_assigned']}/{summary['n_devices']} devices, "
        f"max frequency residual {summary['max_f_residual_hz']:.3g} Hz"
    )
    return HomogenizationResult(ordered, summary)


def summarize_assignments(
    assignments: Sequence[BiasAssignment],
    zero_flux_frequencies: Sequence[float],
    settings: CalibrationSettings,
) -> Dict[str, Any]:
    """Array-level figures: residuals, responsivity spread, yields before and after."""
    assigned = [a for a in assignments if a.status is AssignmentStatus.ASSIGNED]
    linewidths = [a.linewidth for a in assignments if not math.isnan(a.linewidth)]
    linewidth = float(np.mean(linewidths)) if linewidths else math.nan

    summary: Dict[str, Any] = {
        "n_devices": len(assignments),
        "n_assigned": len(assigned),
        "n_failed": len(assignments) - len(assigned),
        "failed_ids": [
            a.device_id for a in assignments if a.status is AssignmentStatus.FAILED
        ],
        "max_f_residual_hz": max((abs(a.f_residual) for a in assigned), default=math.nan),
        "max_f_residual_linewidths": max(
            (abs(a.f_residual) / a.linewidth for a in assigned), default=math.nan
        ),
        "max_r_residual_fraction": max(
            (abs(a.r_residual) / a.r_target for a in assigned if a.r_target > 0),
            default=math.nan,
        ),
        "responsivity_spread": (
            max(a.responsivity for a in assigned) - min(a.responsivity for a in assigned)
            if assigned
            else math.nan
        ),
        "mean_linewidth_hz": linewidth,
    }
    if not math.isnan(linewidth):
        summary["untuned_collision_yield"] = collision_yield(
            zero_flux_frequencies, settings.min_spacing_linewidths, linewidth
        ).yield_fraction
        if assigned:
            summary["tuned_collision_yield"] = collision_yield(
                [a.f0 for a in assigned], settings.min_spacing_linewidths, linewidth
            ).yield_fraction
    return summary
