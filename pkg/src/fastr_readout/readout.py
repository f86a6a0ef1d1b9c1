"""Frequency-multiplexed readout: tones, noisy shots, discrimination and budgets.

All transmissions are in the unit-carrier frame: a tone of power Pg has unit
amplitude, so additive noise of power k Tn B_eff appears with per-quadrature
variance k Tn B_eff / (2 Pg). Noise is injected per integrated shot with
B_eff = 1 / integration_time.
"""

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erfc
from scipy.stats import binomtest

from .constants import (
    BAND_CENTER_HZ,
    BAND_WIDTH_HZ,
    DETECTION_BANDWIDTH_HZ,
    K_B,
    LO_OFFSET_LIMIT_HZ,
    TN_K,
    dbm_to_watt,
    watt_to_dbm,
)
from .exceptions import DegenerateStates
from .logging import FastrLogger
from .resonator import CalibratedDevice, ResonanceProfile, pg_for_duffing, s21
from .shift_register import ShiftLine, load_pattern, stream_out

logger = FastrLogger.get_logger("readout")

MIN_REFERENCE_SHOTS = 50
DEGENERACY_SIGMAS = 3.0


@dataclass(frozen=True)
class ToneComb:
    """Readout tones with their generator powers inside the LO-shifted band."""

    tones: Tuple[float, ...]
    pg_dbm: Tuple[float, ...]
    band_center: float = BAND_CENTER_HZ
    band_width: float = BAND_WIDTH_HZ
    lo_offset: float = 0.0

    def __post_init__(self) -> None:
        if len(self.tones) != len(self.pg_dbm):
            raise ValueError("One generator power is needed per tone")
        if abs(self.lo_offset) > LO_OFFSET_LIMIT_HZ:
            raise ValueError(
                f"|lo_offset| {abs(self.lo_offset):.6e} Hz exceeds {LO_OFFSET_LIMIT_HZ:.0f} Hz"
            )
        lo, hi = self.window
        for tone in self.tones:
            if not lo <= tone <= hi:
                raise ValueError(f"Tone {tone:.6e} Hz outside band [{lo:.6e}, {hi:.6e}] Hz")

    @property
    def window(self) -> Tuple[float, float]:
        half = 0.5 * self.band_width
        return (
            self.band_center - half + self.lo_offset,
            self.band_center + half + self.lo_offset,
        )

    @classmethod
    def uniform(
        cls,
        tones: Sequence[float],
        pg_dbm: float,
        band_center: float = BAND_CENTER_HZ,
        band_width: float = BAND_WIDTH_HZ,
        lo_offset: float = 0.0,
    ) -> "ToneComb":
        """Comb with the same generator power on every tone."""
        return cls(
            tones=tuple(float(t) for t in tones),
            pg_dbm=tuple(float(pg_dbm) for _ in tones),
            band_center=band_center,
            band_width=band_width,
            lo_offset=lo_offset,
        )


@dataclass(frozen=True)
class NoiseModel:
    """System noise temperature, detection bandwidth and seed."""

    tn_k: float = TN_K
    detection_bandwidth_hz: float = DETECTION_BANDWIDTH_HZ
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.tn_k > 0:
            raise ValueError(f"tn_k must be positive, got {self.tn_k}")
        if not self.detection_bandwidth_hz > 0:
            raise ValueError(
                f"detection_bandwidth_hz must be positive, got {self.detection_bandwidth_hz}"
            )

    def quadrature_variance(self, pg_dbm: float, integration_time: float) -> float:
        """Per-quadrature noise variance of one shot in the unit-carrier frame."""
        return K_B * self.tn_k / integration_time / (2.0 * float(dbm_to_watt(pg_dbm)))


@dataclass(frozen=True)
class ShotRecord:
    """One integrated shot of one tone."""

    tone_id: int
    iq: complex
    truth: Optional[int] = None
    decided: Optional[int] = None
    rep: int = 0


@dataclass(frozen=True)
class ShotBatch:
    """Column store of shots; -1 marks an unknown truth or undecided shot."""

    tone_id: np.ndarray
    rep: np.ndarray
    iq: np.ndarray
    truth: np.ndarray
    decided: np.ndarray

    def __len__(self) -> int:
        return int(self.iq.size)

    def __iter__(self) -> Iterator[ShotRecord]:
        for k in range(len(self)):
            truth = int(self.truth[k])
            decided = int(self.decided[k])
            yield ShotRecord(
                tone_id=int(self.tone_id[k]),
                iq=complex(self.iq[k]),
                truth=truth if truth >= 0 else None,
                decided=decided if decided >= 0 else None,
                rep=int(self.rep[k]),
            )

    def for_tone(self, tone_id: int) -> "ShotBatch":
        mask = self.tone_id == tone_id
        return ShotBatch(
            self.tone_id[mask], self.rep[mask], self.iq[mask], self.truth[mask], self.decided[mask]
        )

    @classmethod
    def concatenate(cls, batches: Sequence["ShotBatch"]) -> "ShotBatch":
        return cls(
            np.concatenate([b.tone_id for b in batches]),
            np.concatenate([b.rep for b in batches]),
            np.concatenate([b.iq for b in batches]),
            np.concatenate([b.truth for b in batches]),
            np.concatenate([b.decided for b in batches]),
        )


@dataclass(frozen=True)
class Discriminator:
    """Affine map putting the state-0/state-1 centroids at (-s, 0) and (+s, 0).

    A shot is decided 1 when its transformed in-phase component is positive.
    """

    origin: complex
    rotation: complex
    half_separation: float
    noise_sigma: float
    scale: float = 1.0

    def transform(self, iq: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
        return (np.asarray(iq) - self.origin) * np.conj(self.rotation) / self.scale

    def decide(self, iq: Union[complex, np.ndarray]) -> np.ndarray:
        return (np.real(self.transform(iq)) > 0).astype(int)


@dataclass(frozen=True)
class PowerInterval:
    """Generator power window where SNR and nonlinearity are both acceptable."""

    pg_low: float
    pg_high: float

    @property
    def empty(self) -> bool:
        return self.pg_low > self.pg_high


@dataclass(frozen=True)
class ReadoutSystem:
    """Biased resonators, each read through one shift-register line."""

    lines: Tuple[ShiftLine, ...]
    profiles: Tuple[ResonanceProfile, ...]
    noise: NoiseModel = field(default_factory=NoiseModel)
    band_center: float = BAND_CENTER_HZ
    band_width: float = BAND_WIDTH_HZ
    lo_offset: float = 0.0
    modulation: float = 1.0
    integration_time: Optional[float] = None
    calibration_shots: int = 20000

    def __post_init__(self) -> None:
        if len(self.lines) != len(self.profiles):
            raise ValueError("One shift-register line is needed per resonator")
        if not 0 < self.modulation <= 1:
            raise ValueError(f"modulation must be in (0, 1], got {self.modulation}")

    @property
    def shot_time(self) -> float:
        if self.integration_time is not None:
            return self.integration_time
        return integration_time_for_bandwidth(self.noise.detection_bandwidth_hz)


@dataclass(frozen=True)
class FidelityReport:
    """Outcome of an end-to-end readout run."""

    n_shots: int
    n_errors: int
    ber: float
    interval: Tuple[float, float]
    confidence: float
    predicted_snr: Tuple[float, ...]
    predicted_ber: float
    pg_dbm: float
    streamed_bits: Tuple[Tuple[int, ...], ...]
    shots: ShotBatch

    @property
    def consistent(self) -> bool:
        """Whether the predicted BER lies inside the empirical interval."""
        return self.interval[0] <= self.predicted_ber <= self.interval[1]


# Transmission and shots


def composite_s21(
    array: Sequence[ResonanceProfile], f: Union[float, np.ndarray]
) -> Union[complex, np.ndarray]:
    """Transmission past every resonator of the array, the product of their factors."""
    result: Union[complex, np.ndarray] = np.ones_like(np.asarray(f, dtype=float), dtype=complex)
    for profile in array:
        result = result * s21(f, profile)
    if np.ndim(result) == 0:
        return complex(result)
    return result


def acquire(
    comb: ToneComb,
    array_state: Sequence[ResonanceProfile],
    noise: NoiseModel,
    integration_time: float,
    repeats: int = 1,
    truth: Optional[Sequence[int]] = None,
    stream_key: int = 0,
) -> ShotBatch:
    """Integrated shots of every tone.

    Each tone gets its own random substream spawned from (noise.seed,
    stream_key), so shots do not depend on how tones or repeats are batched.

    Args:
        comb: Tone comb
        array_state: Resonances as currently biased/modulated
        noise: Noise model
        integration_time: Shot integration time in seconds
        repeats: Shots per tone
        truth: Known bit per tone, echoed into the batch
        stream_key: Key separating independent acquisitions under one seed

    Returns:
        Shots ordered tone-major, repeat-minor
    """
    if not integration_time > 0:
        raise ValueError(f"integration_time must be positive, got {integration_time}")
    if repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {repeats}")
    n_tones = len(comb.tones)
    if truth is not None and len(truth) != n_tones:
        raise ValueError("One truth bit is needed per tone")

    clean = np.atleast_1d(np.asarray(composite_s21(array_state, np.asarray(comb.tones))))
    root = np.random.SeedSequence(noise.seed, spawn_key=(stream_key,))
    iq = np.empty((n_tones, repeats), dtype=complex)
    for k, child in enumerate(root.spawn(n_tones)):
        rng = np.random.default_rng(child)
        sigma = math.sqrt(noise.quadrature_variance(comb.pg_dbm[k], integration_time))
        draws = rng.standard_normal((2, repeats))
        iq[k] = clean[k] + sigma * (draws[0] + 1j * draws[1])

    tone_id = np.repeat(np.arange(n_tones), repeats)
    rep = np.tile(np.arange(repeats), n_tones)
    truth_col = (
        np.repeat(np.asarray(truth, dtype=int), repeats)
        if truth is not None
        else np.full(n_tones * repeats, -1)
    )
    return ShotBatch(tone_id, rep, iq.reshape(-1), truth_col, np.full(n_tones * repeats, -1))


# Budgets


def snr_budget(pg_dbm: float, tn: float, b: float, qr_over_qc: float) -> float:
    """Amplitude SNR of a fully modulated tone: (Qr/Qc) sqrt(Pg / (k Tn B)) / 2."""
    if not (tn > 0 and b > 0 and qr_over_qc > 0):
        raise ValueError("Noise temperature, bandwidth and Qr/Qc must be positive")
    return qr_over_qc * math.sqrt(float(dbm_to_watt(pg_dbm)) / (K_B * tn * b)) / 2.0


def pg_for_snr(snr: float, tn: float, b: float, qr_over_qc: float) -> float:
    """Generator power in dBm that gives the requested snr_budget."""
    if not (snr > 0 and tn > 0 and b > 0 and qr_over_qc > 0):
        raise ValueError("SNR, noise temperature, bandwidth and Qr/Qc must be positive")
    return watt_to_dbm(K_B * tn * b * (2.0 * snr / qr_over_qc) ** 2)


def ber_from_snr(snr: float) -> float:
    """Gaussian tail probability Q(snr)."""
    if snr < 0:
        raise ValueError(f"snr must be non-negative, got {snr}")
    return float(0.5 * erfc(snr / math.sqrt(2.0)))


def modulation_factor(modulation: float) -> float:
    """SNR derating for states at +/- modulation/2 linewidth: 2m / (1 + m^2)."""
    return 2.0 * modulation / (1.0 + modulation**2)


def integration_time_for_bandwidth(b: float) -> float:
    """Shot integration time whose shot noise equals the budget noise in bandwidth b."""
    return 1.0 / (2.0 * b)


def wilson_interval(errors: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for an error proportion."""
    if n <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    ci = binomtest(int(errors), int(n)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(ci.low), float(ci.high)


def duty_cycle(readout_time: float, cycle_time: float) -> float:
    """Fraction of a cycle spent reading out."""
    if not (readout_time >= 0 and cycle_time > 0):
        raise ValueError("readout_time must be non-negative and cycle_time positive")
    if readout_time > cycle_time:
        raise ValueError("readout_time cannot exceed cycle_time")
    return readout_time / cycle_time


def sustained_rate(raw_rate: float, duty: float) -> float:
    """Data rate averaged over the cycle."""
    return raw_rate * duty


def operable_region(
    device: CalibratedDevice,
    profile: Optional[ResonanceProfile] = None,
    snr_min: float = 5.0,
    a_max: float = 0.25,
    tn: float = TN_K,
    b: float = DETECTION_BANDWIDTH_HZ,
) -> PowerInterval:
    """Power window with SNR above snr_min and Duffing parameter below a_max."""
    profile = profile or device.profile
    pg_low = pg_for_snr(snr_min, tn, b, profile.qr / profile.qc)
    pg_high = pg_for_duffing(device.design, profile, a_max, device.kappa, device.bias)
    interval = PowerInterval(pg_low, pg_high)
    if interval.empty:
        logger.warning(
            f"Operable region is empty: SNR needs {pg_low:.2f} dBm, "
            f"nonlinearity caps at {pg_high:.2f} dBm"
        )
    return interval


# Discrimination and end to end


def state_profiles(
    profile: ResonanceProfile, tone: float, modulation: float = 1.0
) -> Tuple[ResonanceProfile, ResonanceProfile]:
    """Resonances for bit 0 and bit 1, at +/- modulation/2 linewidth about the tone."""
    offset = 0.5 * modulation * profile.linewidth
    return profile.shifted(tone + offset), profile.shifted(tone - offset)


def calibrate_discriminator(
    reference_shots_state0: Sequence[complex], reference_shots_state1: Sequence[complex]
) -> Discriminator:
    """Discriminator from shots of the two prepared states.

    Raises:
        ValueError: With fewer than 50 shots per state
        DegenerateStates: If the centroids are closer than 3 pooled shot sigmas
    """
    z0 = np.asarray(reference_shots_state0, dtype=complex)
    z1 = np.asarray(reference_shots_state1, dtype=complex)
    if z0.size < MIN_REFERENCE_SHOTS or z1.size < MIN_REFERENCE_SHOTS:
        raise ValueError(f"At least {MIN_REFERENCE_SHOTS} reference shots per state needed")
    c0, c1 = complex(z0.mean()), complex(z1.mean())
    var0 = float(np.mean(np.abs(z0 - c0) ** 2)) / 2.0
    var1 = float(np.mean(np.abs(z1 - c1) ** 2)) / 2.0
    sigma = math.sqrt(0.5 * (var0 + var1))
    separation = abs(c1 - c0)
    if separation == 0 or separation < DEGENERACY_SIGMAS * sigma:
        raise DegenerateStates(
            f"Centroid separation {separation:.3g} below {DEGENERACY_SIGMAS} x {sigma:.3g}",
            separation=separation,
            noise=sigma,
        )
    return Discriminator(
        origin=0.5 * (c0 + c1),
        rotation=(c1 - c0) / separation,
        half_separation=0.5 * separation,
        noise_sigma=sigma,
    )


def _streamed_bits(system: ReadoutSystem, patterns: Sequence[Sequence[int]]) -> List[Tuple[int, ...]]:
    delivered = []
    for line, bits in zip(system.lines, patterns):
        loaded = load_pattern(line, bits)
        delivered.append(stream_out(loaded, len(bits)).bits)
    return delivered


def end_to_end_fidelity(
    system: ReadoutSystem,
    data_pattern: Union[Sequence[int], Sequence[Sequence[int]]],
    n_repeats: int,
    pg_dbm: float,
    confidence: float = 0.95,
) -> FidelityReport:
    """Load, stream, acquire and discriminate a known pattern many times.

    Tones sit on each resonator's biased frequency with the two bit states at
    +/- modulation/2 linewidth. Discriminators are calibrated on prepared
    all-0 and all-1 shots first. Every streamed cycle is then acquired
    n_repeats times and scored against the loaded pattern, so bits the shift
    register drops or reorders count as errors.

    Args:
        system: Readout system
        data_pattern: One bit pattern for all lines, or one per line
        n_repeats: Shots per streamed bit
        pg_dbm: Generator power per tone
        confidence: Confidence level of the Wilson interval

    Returns:
        Empirical BER with its interval, the analytic prediction and all shots

    Raises:
        BrokenPath: If a line cannot deliver its pattern
        DegenerateStates: If a tone's states cannot be separated
    """
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be at least 1, got {n_repeats}")
    n = len(system.profiles)
    if data_pattern and isinstance(data_pattern[0], (list, tuple)):
        patterns = [list(p) for p in data_pattern]  # type: ignore[union-attr]
    else:
        patterns = [list(data_pattern) for _ in range(n)]  # type: ignore[arg-type]
    if len(patterns) != n:
        raise ValueError("One pattern is needed per line")
    n_cycles = len(patterns[0])
    if any(len(p) != n_cycles for p in patterns):
        raise ValueError("All line patterns must have the same length")

    tones = [p.f0 for p in system.profiles]
    comb = ToneComb.uniform(tones, pg_dbm, system.band_center, system.band_width, system.lo_offset)
    states = [state_profiles(p, p.f0, system.modulation) for p in system.profiles]
    tau = system.shot_time

    references = [
        acquire(comb, [s[bit] for s in states], system.noise, tau, system.calibration_shots,
                stream_key=bit)
        for bit in (0, 1)
    ]
    discriminators = [
        calibrate_discriminator(references[0].for_tone(k).iq, references[1].for_tone(k).iq)
        for k in range(n)
    ]

    delivered = _streamed_bits(system, patterns)
    for k, (sent, got) in enumerate(zip(patterns, delivered)):
        if list(got) != sent:
            logger.warning(f"Line {k} delivered {list(got)} for loaded pattern {sent}")
    batches = []
    for cycle in range(n_cycles):
        # A bit the line failed to deliver leaves the resonator in the 0 state
        bits = [delivered[k][cycle] if cycle < len(delivered[k]) else 0 for k in range(n)]
        batch = acquire(
            comb,
            [states[k][bits[k]] for k in range(n)],
            system.noise,
            tau,
            n_repeats,
            truth=[patterns[k][cycle] for k in range(n)],
            stream_key=2 + cycle,
        )
        decided = np.empty(len(batch), dtype=int)
        for k, disc in enumerate(discriminators):
            mask = batch.tone_id == k
            decided[mask] = disc.decide(batch.iq[mask])
        batches.append(
            ShotBatch(batch.tone_id, batch.rep + cycle * n_repeats, batch.iq, batch.truth, decided)
        )
    shots = ShotBatch.concatenate(batches)

    n_errors = int(np.count_nonzero(shots.decided != shots.truth))
    n_shots = len(shots)
    b_equiv = 1.0 / (2.0 * tau)
    snrs = tuple(
        snr_budget(pg_dbm, system.noise.tn_k, b_equiv, p.qr / p.qc)
        * modulation_factor(system.modulation)
        for p in system.profiles
    )
    predicted = float(np.mean([ber_from_snr(s) for s in snrs]))
    report = FidelityReport(
        n_shots=n_shots,
        n_errors=n_errors,
        ber=n_errors / n_shots,
        interval=wilson_interval(n_errors, n_shots, confidence),
        confidence=confidence,
        predicted_snr=snrs,
        predicted_ber=predicted,
        pg_dbm=pg_dbm,
        streamed_bits=tuple(delivered),
        shots=shots,
    )
    logger.info(
        f"Fidelity run: {n_errors}/{n_shots} errors (BER {report.ber:.3g}), "
        f"predicted {predicted:.3g}"
    )
    return report
