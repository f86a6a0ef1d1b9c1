"""Physics of a single two-SQUID tunable resonator.

A lumped LC resonator whose inductance is the series sum of a geometric
inductance and two flux-tunable DC-SQUIDs (TUNE and SENSE). The module covers
the flux-dependent inductance and resonance frequency, the shunt-resonator
transmission and its fit, the power-dependent intrinsic loss, the Duffing
nonlinearity of the junctions, and the fabrication-thickness perturbation.

Conventions:
    - SI units internally, flux in units of the flux quantum.
    - Resonant capacitance is ``cs + cc``.
    - Coupling quality factor convention: ``Qc = 2 C_total / (omega0 Cc^2 Z0)``.
      The stored ``qc`` is authoritative; the estimate only rescales it under a
      thickness perturbation and sizes Cc when a design is retargeted.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq, least_squares

from .constants import (
    A_ANCHOR,
    BIFURCATION_A,
    EPSILON_CLAMP,
    KAPPA_DEFAULT,
    PG_ANCHOR_DBM,
    PHI0,
    PROTOTYPE_F0_HZ,
    PROTOTYPE_OPERATING_F0_HZ,
    PROTOTYPE_QC,
    Z0_OHM,
    dbm_to_watt,
    watt_to_dbm,
)
from .exceptions import FitDiverged, FluxAtFrustration, TargetUnreachable
from .logging import FastrLogger
from .types import DeviceDocument

logger = FastrLogger.get_logger("resonator")

# Relative disagreement between stored qc and the lumped estimate that is logged
QC_CONSISTENCY_TOLERANCE = 0.25


@dataclass(frozen=True)
class JunctionParams:
    """Critical current of one junction of a symmetric DC-SQUID."""

    ic_per_junction: float
    phi0: float = PHI0

    def __post_init__(self) -> None:
        if not self.ic_per_junction > 0:
            raise ValueError(
                f"ic_per_junction must be positive, got {self.ic_per_junction}"
            )


@dataclass(frozen=True)
class TlsLossModel:
    """Phenomenological square-root TLS saturation of the intrinsic loss."""

    qi_low_power: float = 1000.0
    qi_residual: float = 1.0e5
    e_sat: float = 50.0

    def __post_init__(self) -> None:
        if not 0 < self.qi_low_power < self.qi_residual:
            raise ValueError(
                "TLS model requires 0 < qi_low_power < qi_residual, got "
                f"{self.qi_low_power} and {self.qi_residual}"
            )
        if not self.e_sat > 0:
            raise ValueError(f"e_sat must be positive, got {self.e_sat}")


@dataclass(frozen=True)
class BiasPoint:
    """Applied fluxes on the TUNE and SENSE SQUIDs, in flux quanta."""

    phi_tune: float
    phi_sense: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi_tune) and math.isfinite(self.phi_sense)):
            raise ValueError(
                f"Bias fluxes must be finite, got ({self.phi_tune}, {self.phi_sense})"
            )

    def canonical(self) -> "BiasPoint":
        """Representative of this bias with both fluxes in [-0.5, 0.5)."""
        return BiasPoint(_wrap_flux(self.phi_tune), _wrap_flux(self.phi_sense))


def _wrap_flux(phi: float) -> float:
    return phi - math.floor(phi + 0.5)


# Reduced fluxes are snapped to a 2**-40 grid so phi and phi + k give one value
FLUX_GRID = float(2**40)


def _reduce_flux(phi: float) -> float:
    return round(_wrap_flux(phi) * FLUX_GRID) / FLUX_GRID


def _reduce_flux_map(phi: np.ndarray) -> np.ndarray:
    wrapped = phi - np.floor(phi + 0.5)
    return np.round(wrapped * FLUX_GRID) / FLUX_GRID


@dataclass(frozen=True)
class ResonatorDesign:
    """Fixed circuit parameters of one device."""

    cs: float
    cc: float
    lg: float
    tune_squid: JunctionParams
    sense_squid: JunctionParams
    dielectric_thickness_d: float
    qc: float
    tls: TlsLossModel = field(default_factory=TlsLossModel)

    def __post_init__(self) -> None:
        for name in ("cs", "cc", "lg", "dielectric_thickness_d", "qc"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def c_total(self) -> float:
        return self.cs + self.cc

    @classmethod
    def from_document(cls, document: DeviceDocument) -> "ResonatorDesign":
        """Build a design from its JSON document form.

        Args:
            document: Mapping with keys cs_f, cc_f, lg_h, ic_a, d_m, qc and tls

        Returns:
            The design; a qc far from the lumped coupling estimate is logged
        """
        tls = document["tls"]
        junction = JunctionParams(ic_per_junction=float(document["ic_a"]))
        design = cls(
            cs=float(document["cs_f"]),
            cc=float(document["cc_f"]),
            lg=float(document["lg_h"]),
            tune_squid=junction,
            sense_squid=junction,
            dielectric_thickness_d=float(document["d_m"]),
            qc=float(document["qc"]),
            tls=TlsLossModel(
                qi_low_power=float(tls["qi_lp"]),
                qi_residual=float(tls["qi_res"]),
                e_sat=float(tls["e_sat_vpm"]),
            ),
        )
        mismatch = coupling_mismatch(design)
        if mismatch > QC_CONSISTENCY_TOLERANCE:
            logger.warning(
                f"Stored qc={design.qc:.1f} differs from the lumped coupling "
                f"estimate by {100 * mismatch:.0f}%"
            )
        return design

    def to_document(self) -> DeviceDocument:
        """JSON document form of this design (tune SQUID junctions are stored)."""
        return {
            "cs_f": self.cs,
            "cc_f": self.cc,
            "lg_h": self.lg,
            "ic_a": self.tune_squid.ic_per_junction,
            "d_m": self.dielectric_thickness_d,
            "qc": self.qc,
            "tls": {
                "qi_lp": self.tls.qi_low_power,
                "qi_res": self.tls.qi_residual,
                "e_sat_vpm": self.tls.e_sat,
            },
        }


@dataclass(frozen=True)
class ResonanceProfile:
    """Resonance of a device at one bias: frequency, quality factors, nonlinearity."""

    f0: float
    qr: float
    qi: float
    qc: float
    linewidth: float
    duffing_a: float = 0.0

    def __post_init__(self) -> None:
        if not (self.f0 > 0 and self.qr > 0 and self.qi > 0 and self.qc > 0):
            raise ValueError("Profile frequencies and quality factors must be positive")
        inv_qr = 1.0 / self.qr
        if abs(inv_qr - (1.0 / self.qi + 1.0 / self.qc)) > 1e-12 * inv_qr:
            raise ValueError(
                f"1/qr must equal 1/qi + 1/qc (qr={self.qr}, qi={self.qi}, qc={self.qc})"
            )
        if abs(self.linewidth * self.qr - self.f0) > 1e-12 * self.f0:
            raise ValueError("linewidth * qr must equal f0")

    @classmethod
    def from_quality_factors(
        cls, f0: float, qi: float, qc: float, duffing_a: float = 0.0
    ) -> "ResonanceProfile":
        """Compose the loaded Q from intrinsic and coupling Q (qi may be inf)."""
        qr = 1.0 / (1.0 / qi + 1.0 / qc)
        return cls(f0=f0, qr=qr, qi=qi, qc=qc, linewidth=f0 / qr, duffing_a=duffing_a)

    @classmethod
    def from_loaded(
        cls, f0: float, qr: float, qc: float, duffing_a: float = 0.0
    ) -> "ResonanceProfile":
        """Infer the intrinsic Q from loaded and coupling Q (qr == qc gives inf)."""
        if qr > qc:
            raise ValueError(f"Loaded Q {qr} cannot exceed coupling Q {qc}")
        inv_qi = 1.0 / qr - 1.0 / qc
        qi = math.inf if inv_qi <= 0 else 1.0 / inv_qi
        return cls.from_quality_factors(f0, qi, qc, duffing_a)

    def shifted(self, f0: float) -> "ResonanceProfile":
        """Same quality factors at another resonance frequency."""
        return replace(self, f0=f0, linewidth=f0 / self.qr)


@dataclass(frozen=True)
class Sweep:
    """Transmission sampled over frequency."""

    frequencies: np.ndarray
    transmission: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.frequencies) != np.shape(self.transmission):
            raise ValueError("Sweep frequencies and transmission must have equal length")


class S21Fit(NamedTuple):
    """Result of fitting the shunt-resonator model to a sweep."""

    profile: ResonanceProfile
    residual: float


class DuffingResult(NamedTuple):
    """Duffing parameter in linewidths and whether the drive bifurcates."""

    a: float
    bifurcated: bool


@dataclass(frozen=True)
class DriveState:
    """Resonator response to a microwave drive."""

    current: float
    e_field: float
    energy: float


class PerturbedDesign(NamedTuple):
    """Design after a thickness perturbation and its first-order frequency shift."""

    design: ResonatorDesign
    predicted_shift: float


@dataclass(frozen=True)
class CalibratedDevice:
    """A device at a bias with its drive coupling calibrated to the Duffing anchor."""

    design: ResonatorDesign
    bias: BiasPoint
    profile: ResonanceProfile
    kappa: float
    e_field: float
    pg_anchor_dbm: float = PG_ANCHOR_DBM

    def drive(self, pg_dbm: float, detuning_hz: float = 0.0) -> DriveState:
        return internal_drive(
            self.design, self.profile, float(dbm_to_watt(pg_dbm)), detuning_hz, self.kappa
        )

    def duffing(self, pg_dbm: float, detuning_hz: float = 0.0) -> DuffingResult:
        return duffing_a(
            self.design,
            self.profile,
            self.drive(pg_dbm, detuning_hz).current,
            bias=self.bias,
        )


# Inductance and frequency


def squid_inductance(j: JunctionParams, flux: float) -> float:
    """Josephson inductance of a symmetric DC-SQUID.

    Args:
        j: Junction parameters
        flux: Applied flux in flux quanta

    Returns:
        Inductance in henries, Phi0 / (2 pi 2 Ic |cos(pi flux)|)

    Raises:
        FluxAtFrustration: If |cos(pi flux)| is inside the frustration clamp
    """
    c = abs(math.cos(math.pi * _reduce_flux(flux)))
    if c <= EPSILON_CLAMP:
        raise FluxAtFrustration(
            f"SQUID flux {flux} is at frustration (|cos(pi*flux)|={c:.3g})",
            flux=flux,
            cos_value=c,
        )
    return j.phi0 / (2.0 * math.pi * 2.0 * j.ic_per_junction * c)


def squid_inductance_map(j: JunctionParams, flux: np.ndarray) -> np.ndarray:
    """Vectorized squid_inductance with NaN inside the frustration clamp."""
    c = np.abs(np.cos(np.pi * _reduce_flux_map(np.asarray(flux, dtype=float))))
    out = np.full(c.shape, np.nan)
    ok = c > EPSILON_CLAMP
    out[ok] = j.phi0 / (2.0 * np.pi * 2.0 * j.ic_per_junction * c[ok])
    return out


def total_inductance(design: ResonatorDesign, bias: BiasPoint) -> float:
    """Series inductance of the geometric inductor and both SQUIDs."""
    return (
        design.lg
        + squid_inductance(design.tune_squid, bias.phi_tune)
        + squid_inductance(design.sense_squid, bias.phi_sense)
    )


def resonance_frequency(design: ResonatorDesign, bias: BiasPoint) -> float:
    """Resonance frequency in Hz at a bias point.

    Raises:
        FluxAtFrustration: If either SQUID is at frustration
    """
    return 1.0 / (2.0 * math.pi * math.sqrt(total_inductance(design, bias) * design.c_total))


def resonance_frequency_map(
    design: ResonatorDesign, phi_tune: np.ndarray, phi_sense: np.ndarray
) -> np.ndarray:
    """Vectorized resonance_frequency over broadcast flux arrays; NaN at frustration."""
    l_total = (
        design.lg
        + squid_inductance_map(design.tune_squid, phi_tune)
        + squid_inductance_map(design.sense_squid, phi_sense)
    )
    return 1.0 / (2.0 * np.pi * np.sqrt(l_total * design.c_total))


def zero_flux_frequency(design: ResonatorDesign) -> float:
    """Resonance frequency with both SQUIDs unbiased (the tuning maximum)."""
    return resonance_frequency(design, BiasPoint(0.0, 0.0))


def coupling_q(
    design: ResonatorDesign, f0: Optional[float] = None, z0: float = Z0_OHM
) -> float:
    """Lumped estimate of the coupling Q of a capacitively shunted resonator.

    Args:
        design: Device design
        f0: Frequency to evaluate at, defaults to the zero-flux frequency
        z0: Feedline impedance

    Returns:
        2 C_total / (omega0 Cc^2 Z0)
    """
    omega0 = 2.0 * math.pi * (f0 if f0 is not None else zero_flux_frequency(design))
    return 2.0 * design.c_total / (omega0 * design.cc**2 * z0)


def coupling_mismatch(design: ResonatorDesign) -> float:
    """Relative difference between stored qc and the lumped coupling estimate."""
    return abs(design.qc - coupling_q(design)) / coupling_q(design)


def resonance_profile(
    design: ResonatorDesign, bias: BiasPoint, qi: Optional[float] = None
) -> ResonanceProfile:
    """Profile of a design at a bias (qi defaults to the low-power TLS limit)."""
    return ResonanceProfile.from_quality_factors(
        resonance_frequency(design, bias),
        qi if qi is not None else design.tls.qi_low_power,
        design.qc,
    )


# Transmission


def s21(
    f: Union[float, np.ndarray], profile: ResonanceProfile
) -> Union[complex, np.ndarray]:
    """Transmission past a shunt resonator, 1 - (Qr/Qc) / (1 + 2i Qr x)."""
    x = (np.asarray(f, dtype=float) - profile.f0) / profile.f0
    return 1.0 - (profile.qr / profile.qc) / (1.0 + 2j * profile.qr * x)


def synthesize_sweep(
    profile: ResonanceProfile,
    span_linewidths: float = 10.0,
    n_points: int = 401,
    noise_snr: Optional[float] = None,
    seed: Optional[int] = None,
) -> Sweep:
    """Synthetic sweep centred on a resonance.

    Args:
        profile: Resonance to sample
        span_linewidths: Total span in linewidths
        n_points: Number of frequency points
        noise_snr: Amplitude SNR against the unit off-resonance carrier; the
            per-quadrature noise sigma is 1/noise_snr. None for a noiseless sweep.
        seed: Seed for the noise generator

    Returns:
        The sweep
    """
    half = 0.5 * span_linewidths * profile.linewidth
    freqs = np.linspace(profile.f0 - half, profile.f0 + half, n_points)
    values = np.asarray(s21(freqs, profile), dtype=complex)
    if noise_snr is not None:
        rng = np.random.default_rng(seed)
        sigma = 1.0 / noise_snr
        values = values + sigma * (
            rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points)
        )
    return Sweep(frequencies=freqs, transmission=values)


def _s21_guess(freqs: np.ndarray, values: np.ndarray) -> Tuple[float, float, float]:
    """Initial (f0, Qr, Qc) from the dip maximum and its 3 dB width."""
    response = np.abs(1.0 - values)
    peak = int(np.argmax(response))
    depth = float(response[peak])

    # Half-power points of |1 - S21|^2
    above = response >= depth / math.sqrt(2.0)
    lo = peak
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak
    while hi < len(freqs) - 1 and above[hi + 1]:
        hi += 1
    width = max(float(freqs[hi] - freqs[lo]), float(np.min(np.diff(freqs))))

    f0 = float(freqs[peak])
    qr = f0 / width
    return f0, qr, qr / depth


def fit_s21(sweep: Sweep, residual_threshold: float = 0.1) -> S21Fit:
    """Least-squares fit of the shunt-resonator model to a sweep.

    The fit runs in (offset in guessed linewidths, ln Qr, ln Qc) so both quality
    factors stay positive, starting from the dip maximum and its 3 dB width.

    Args:
        sweep: Sweep spanning at least 3 linewidths with at least 20 points
        residual_threshold: Largest accepted RMS complex residual

    Returns:
        Fitted profile and RMS residual

    Raises:
        ValueError: If the sweep is too short or too narrow
        FitDiverged: If no dip is present, the optimizer fails, or the fit is
            unphysical
    """
    freqs = np.asarray(sweep.frequencies, dtype=float)
    values = np.asarray(sweep.transmission, dtype=complex)
    if freqs.size < 20:
        raise ValueError(f"Sweep needs at least 20 points, got {freqs.size}")
    order = np.argsort(freqs)
    freqs, values = freqs[order], values[order]

    depth = float(np.max(np.abs(1.0 - values)))
    step_noise = float(np.median(np.abs(np.diff(values))))
    if depth < 1e-6 or depth < 8.0 * step_noise:
        raise FitDiverged(
            "Sweep shows no resonance dip above the noise",
            details={"depth": depth, "step_noise": step_noise},
        )

    f0_guess, qr_guess, qc_guess = _s21_guess(freqs, values)
    lw_guess = f0_guess / qr_guess
    span = float(freqs[-1] - freqs[0])
    if span < 3.0 * lw_guess:
        raise ValueError(
            f"Sweep spans {span / lw_guess:.2f} linewidths, at least 3 are required"
        )
    logger.debug(f"fit_s21 initial guess f0={f0_guess:.6e} qr={qr_guess:.1f} qc={qc_guess:.1f}")

    def unpack(p: np.ndarray) -> Tuple[float, float, float]:
        return f0_guess + p[0] * lw_guess, math.exp(p[1]), math.exp(p[2])

    def residuals(p: np.ndarray) -> np.ndarray:
        f0, qr, qc = unpack(p)
        x = (freqs - f0) / f0
        diff = 1.0 - (qr / qc) / (1.0 + 2j * qr * x) - values
        return np.concatenate([diff.real, diff.imag])

    p0 = np.array([0.0, math.log(qr_guess), math.log(qc_guess)])
    try:
        result = least_squares(
            residuals, p0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=5000
        )
    except (ValueError, FloatingPointError, OverflowError) as e:
        raise FitDiverged(f"S21 fit failed: {e}")

    f0, qr, qc = unpack(result.x)
    rms = float(np.sqrt(2.0 * np.mean(result.fun**2)))
    parameters = {"f0": f0, "qr": qr, "qc": qc}
    if not result.success or not all(math.isfinite(v) for v in parameters.values()):
        raise FitDiverged("S21 fit did not converge", residual=rms, parameters=parameters)
    if rms > residual_threshold:
        raise FitDiverged(
            f"S21 fit residual {rms:.3g} exceeds {residual_threshold}",
            residual=rms,
            parameters=parameters,
        )
    if f0 <= 0 or qr > qc * (1.0 + 1e-6):
        raise FitDiverged(
            "S21 fit left the physical domain (qr must not exceed qc)",
            residual=rms,
            parameters=parameters,
        )
    return S21Fit(ResonanceProfile.from_loaded(f0, min(qr, qc), qc), rms)


# Loss and nonlinearity


def tls_qi(model: TlsLossModel, e_field: float) -> float:
    """Intrinsic Q with the TLS loss saturated by the in-resonator field.

    1/Qi = (1/qi_low_power - 1/qi_residual) / sqrt(1 + (E/e_sat)^2) + 1/qi_residual
    """
    if e_field < 0:
        raise ValueError(f"e_field must be non-negative, got {e_field}")
    tls_loss = 1.0 / model.qi_low_power - 1.0 / model.qi_residual
    inv_qi = tls_loss / math.sqrt(1.0 + (e_field / model.e_sat) ** 2) + 1.0 / model.qi_residual
    return 1.0 / inv_qi


def _circuit_inductance(design: ResonatorDesign, profile: ResonanceProfile) -> float:
    omega0 = 2.0 * math.pi * profile.f0
    return 1.0 / (omega0**2 * design.c_total)


def junction_inductances(
    design: ResonatorDesign, profile: ResonanceProfile, bias: Optional[BiasPoint] = None
) -> Tuple[float, float]:
    """Josephson inductances of the TUNE and SENSE SQUIDs.

    With a bias the SQUID inductances are evaluated directly. Without one the
    junction inductance implied by the profile frequency is split in proportion
    to the zero-flux SQUID inductances.
    """
    if bias is not None:
        return (
            squid_inductance(design.tune_squid, bias.phi_tune),
            squid_inductance(design.sense_squid, bias.phi_sense),
        )
    l_j = _circuit_inductance(design, profile) - design.lg
    if l_j <= 0:
        raise ValueError("Profile frequency is above the geometric-inductance limit")
    l_t0 = squid_inductance(design.tune_squid, 0.0)
    l_s0 = squid_inductance(design.sense_squid, 0.0)
    weight = l_t0 / (l_t0 + l_s0)
    return l_j * weight, l_j * (1.0 - weight)


def participation_ratio(
    design: ResonatorDesign, profile: ResonanceProfile, bias: Optional[BiasPoint] = None
) -> float:
    """Junction participation alpha = L_J / (L_g + L_J)."""
    l_j = sum(junction_inductances(design, profile, bias))
    return l_j / (design.lg + l_j)


def effective_critical_current(
    design: ResonatorDesign, profile: ResonanceProfile, bias: Optional[BiasPoint] = None
) -> float:
    """Critical current of the series junction stack seen by the resonator current.

    Each SQUID has critical current Phi0 / (2 pi L_k); the stack combines them as
    1/Ic_eff^2 = sum_k (L_k / L_J) / Ic_k^2.
    """
    inductances = junction_inductances(design, profile, bias)
    l_j = sum(inductances)
    phi0 = design.tune_squid.phi0
    inv_sq = sum((l_k / l_j) * (2.0 * math.pi * l_k / phi0) ** 2 for l_k in inductances)
    return 1.0 / math.sqrt(inv_sq)


def duffing_a(
    design: ResonatorDesign,
    profile: ResonanceProfile,
    current: float,
    bias: Optional[BiasPoint] = None,
) -> DuffingResult:
    """Duffing nonlinearity a = (alpha Qr / 4) (I / Ic_eff)^2 in linewidths.

    Args:
        design: Device design
        profile: Resonance at the operating bias
        current: Resonator current amplitude in amperes
        bias: Operating bias; inferred from the profile frequency when omitted

    Returns:
        The Duffing parameter and a bifurcation flag (a >= 0.77)
    """
    if current < 0:
        raise ValueError(f"current must be non-negative, got {current}")
    alpha = participation_ratio(design, profile, bias)
    ic_eff = effective_critical_current(design, profile, bias)
    a = (alpha * profile.qr / 4.0) * (current / ic_eff) ** 2
    bifurcated = a >= BIFURCATION_A
    if bifurcated:
        logger.warning(f"Duffing parameter a={a:.3f} is past bifurcation")
    return DuffingResult(a, bifurcated)


def drive_lineshape(profile: ResonanceProfile, detuning_hz: float) -> float:
    """Lorentzian energy lineshape, 1 on resonance and 1/2 at half a linewidth."""
    return 1.0 / (1.0 + (2.0 * profile.qr * detuning_hz / profile.f0) ** 2)


def internal_drive(
    design: ResonatorDesign,
    profile: ResonanceProfile,
    pg: float,
    detuning: float = 0.0,
    kappa: float = KAPPA_DEFAULT,
) -> DriveState:
    """Circulating current and dielectric field for a generator power.

    U = kappa pg Qr^2 / (Qc omega0) Lambda(detuning), I = sqrt(2U/L_total),
    E = sqrt(2U/C_total) / d, with L_total taken from the profile frequency.

    Args:
        design: Device design
        profile: Resonance being driven
        pg: Generator power in watts
        detuning: Drive detuning from f0 in Hz
        kappa: Drive-coupling constant

    Returns:
        Current, field and stored energy
    """
    if pg < 0:
        raise ValueError(f"Generator power must be non-negative, got {pg}")
    omega0 = 2.0 * math.pi * profile.f0
    energy = (
        kappa * pg * profile.qr**2 / (profile.qc * omega0) * drive_lineshape(profile, detuning)
    )
    current = math.sqrt(2.0 * energy / _circuit_inductance(design, profile))
    e_field = math.sqrt(2.0 * energy / design.c_total) / design.dielectric_thickness_d
    return DriveState(current=current, e_field=e_field, energy=energy)


def calibrate_drive_coupling(
    design: ResonatorDesign,
    profile: ResonanceProfile,
    bias: Optional[BiasPoint] = None,
    pg_anchor_dbm: float = PG_ANCHOR_DBM,
    a_anchor: float = A_ANCHOR,
) -> float:
    """Drive-coupling constant that puts a(pg_anchor) at a_anchor on resonance."""
    unit = internal_drive(design, profile, float(dbm_to_watt(pg_anchor_dbm)), 0.0, 1.0)
    a_unit = duffing_a(design, profile, unit.current, bias).a
    return a_anchor / a_unit


def pg_for_duffing(
    design: ResonatorDesign,
    profile: ResonanceProfile,
    a_target: float,
    kappa: float,
    bias: Optional[BiasPoint] = None,
) -> float:
    """Generator power in dBm at which the on-resonance Duffing parameter is a_target."""
    if a_target <= 0:
        raise ValueError(f"a_target must be positive, got {a_target}")
    reference_w = 1e-3
    drive = internal_drive(design, profile, reference_w, 0.0, kappa)
    a_ref = duffing_a(design, profile, drive.current, bias).a
    return watt_to_dbm(reference_w * a_target / a_ref)


def self_consistent_profile(
    design: ResonatorDesign,
    bias: BiasPoint,
    pg_anchor_dbm: float = PG_ANCHOR_DBM,
    a_anchor: float = A_ANCHOR,
    max_iter: int = 200,
    rtol: float = 1e-12,
) -> CalibratedDevice:
    """Operating profile with Qi consistent with its own drive field.

    Iterates Qi -> profile -> kappa (re-anchored) -> field -> tls_qi(field) until
    Qi settles, so the returned device meets the Duffing anchor at the Qi its
    anchor drive produces.
    """
    qi = design.tls.qi_low_power
    for iteration in range(max_iter):
        profile = resonance_profile(design, bias, qi)
        kappa = calibrate_drive_coupling(design, profile, bias, pg_anchor_dbm, a_anchor)
        drive = internal_drive(design, profile, float(dbm_to_watt(pg_anchor_dbm)), 0.0, kappa)
        qi_next = tls_qi(design.tls, drive.e_field)
        if abs(qi_next - qi) <= rtol * qi:
            qi = qi_next
            break
        qi = qi_next
    else:
        logger.warning(f"Operating Qi did not settle after {max_iter} iterations")

    profile = resonance_profile(design, bias, qi)
    kappa = calibrate_drive_coupling(design, profile, bias, pg_anchor_dbm, a_anchor)
    drive = internal_drive(design, profile, float(dbm_to_watt(pg_anchor_dbm)), 0.0, kappa)
    profile = replace(profile, duffing_a=a_anchor)
    logger.debug(
        f"Self-consistent operating point after {iteration + 1} iterations: "
        f"qi={qi:.0f} qr={profile.qr:.1f} kappa={kappa:.4f} E={drive.e_field:.1f} V/m"
    )
    return CalibratedDevice(
        design=design,
        bias=bias,
        profile=profile,
        kappa=kappa,
        e_field=drive.e_field,
        pg_anchor_dbm=pg_anchor_dbm,
    )


# Fabrication scatter and presets


def perturb_design(design: ResonatorDesign, delta_d_over_d: float) -> PerturbedDesign:
    """Apply a relative dielectric-thickness error to a design.

    Thickness scales by (1 + delta), both capacitances by 1 / (1 + delta), and qc
    follows the lumped coupling estimate. The exact frequency ratio is
    sqrt(1 + delta); the returned prediction is the first-order delta / 2.

    Args:
        design: Nominal design
        delta_d_over_d: Relative thickness error, |delta| < 1

    Returns:
        Perturbed design and predicted relative frequency shift
    """
    if not abs(delta_d_over_d) < 1:
        raise ValueError(f"|delta_d_over_d| must be < 1, got {delta_d_over_d}")
    if delta_d_over_d == 0:
        return PerturbedDesign(design, 0.0)
    scale = 1.0 + delta_d_over_d
    perturbed = replace(
        design,
        cs=design.cs / scale,
        cc=design.cc / scale,
        dielectric_thickness_d=design.dielectric_thickness_d * scale,
    )
    perturbed = replace(perturbed, qc=design.qc * coupling_q(perturbed) / coupling_q(design))
    return PerturbedDesign(perturbed, 0.5 * delta_d_over_d)


def retarget_design(design: ResonatorDesign, f_target: float) -> ResonatorDesign:
    """Resize the capacitors so the zero-flux frequency equals f_target.

    The total capacitance is set for the new frequency and the coupling
    capacitor is resized so the lumped coupling estimate, and with it the
    stored qc, is unchanged. Inductances and thickness are untouched.
    """
    if not f_target > 0:
        raise ValueError(f"f_target must be positive, got {f_target}")
    omega = 2.0 * math.pi * f_target
    l_zero = total_inductance(design, BiasPoint(0.0, 0.0))
    c_total = 1.0 / (omega**2 * l_zero)
    cc = math.sqrt(2.0 * c_total / (omega * Z0_OHM * coupling_q(design)))
    if cc >= c_total:
        raise ValueError(f"Cannot hold the coupling Q at {f_target:.4e} Hz")
    return replace(design, cs=c_total - cc, cc=cc)


def operating_point(
    design: ResonatorDesign,
    f_op: float = PROTOTYPE_OPERATING_F0_HZ,
    max_flux: float = 0.48,
) -> BiasPoint:
    """Diagonal bias (equal TUNE and SENSE flux) at which the resonance sits at f_op.

    Raises:
        TargetUnreachable: If f_op is outside the diagonal's tuning range
    """
    f_max = zero_flux_frequency(design)
    f_min = resonance_frequency(design, BiasPoint(max_flux, max_flux))
    if not f_min <= f_op <= f_max:
        raise TargetUnreachable(
            f"Operating frequency {f_op:.4e} Hz outside [{f_min:.4e}, {f_max:.4e}] Hz",
            f_target=f_op,
            f_min=f_min,
            f_max=f_max,
        )
    if f_op == f_max:
        return BiasPoint(0.0, 0.0)
    phi = brentq(
        lambda p: resonance_frequency(design, BiasPoint(p, p)) - f_op,
        0.0,
        max_flux,
        xtol=1e-15,
        rtol=4 * np.finfo(float).eps,
    )
    return BiasPoint(float(phi), float(phi))


def designed_device() -> ResonatorDesign:
    """The as-designed device shipped with the package."""
    current_dir = os.path.dirname(__file__)
    json_path = os.path.join(current_dir, "data", "designed_device.json")
    with open(json_path) as f:
        document: DeviceDocument = json.load(f)
    return ResonatorDesign.from_document(document)


def prototype_device() -> ResonatorDesign:
    """The measured prototype: the design shifted by fabrication to 6.91 GHz.

    The thickness error that moves the zero-flux resonance of the designed device
    to the measured 6.91 GHz is applied, and qc is set to the measured 329.
    """
    design = designed_device()
    delta = (PROTOTYPE_F0_HZ / zero_flux_frequency(design)) ** 2 - 1.0
    perturbed = perturb_design(design, delta).design
    return replace(perturbed, qc=PROTOTYPE_QC)


def prototype_calibration() -> CalibratedDevice:
    """Prototype at its typical operating bias with the drive coupling calibrated."""
    design = prototype_device()
    return self_consistent_profile(design, operating_point(design))


def profile_summary(profile: ResonanceProfile) -> Dict[str, Any]:
    """Plain mapping of a profile for reports."""
    return {
        "f0_hz": profile.f0,
        "qr": profile.qr,
        "qi": profile.qi,
        "qc": profile.qc,
        "linewidth_hz": profile.linewidth,
        "duffing_a": profile.duffing_a,
    }
