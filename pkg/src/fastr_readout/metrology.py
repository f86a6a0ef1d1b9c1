"""Qubit flux metrology: transition curves, flux-noise runs and noise spectra.

Spectral densities are reported two-sided-equivalent: a white series of
per-sample variance s^2 sampled every tau_s has the flat level s^2 tau_s, and
the series variance is 2 * sum(S df) over the positive frequencies returned.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import curve_fit, least_squares
from scipy.signal import lfilter, welch

from .exceptions import FitDiverged, InsufficientSpan, OutOfDomain
from .logging import FastrLogger
from .types import InversionMode

logger = FastrLogger.get_logger("metrology")

MIN_PSD_SAMPLES = 256
MIN_WELCH_AVERAGES = 8
MIN_FIT_DECADES = 2.0
DEFAULT_LOG_BINS = 60

FluxNoiseGenerator = Callable[[int, float, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class TransitionCurve:
    """Population-versus-flux step of width 2W about center (flux quanta)."""

    width: float
    center: float = 0.0

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ValueError(f"Transition width must be positive, got {self.width}")

    def slope(self, phi_x: float) -> float:
        """dP/dphi at phi_x."""
        return 1.0 / (4.0 * self.width * math.cosh((phi_x - self.center) / (2.0 * self.width)) ** 2)


@dataclass(frozen=True)
class Spectrum:
    """Welch-averaged noise spectrum over positive frequencies."""

    frequencies: np.ndarray
    density: np.ndarray
    tau_s: float
    n_averages: int

    @property
    def variance(self) -> float:
        """Series variance implied by the spectrum."""
        df = float(self.frequencies[1] - self.frequencies[0])
        return 2.0 * float(np.sum(self.density)) * df


@dataclass(frozen=True)
class NoiseFit:
    """1/f plus white decomposition S(f) = A^2 (1 Hz / f)^alpha + w_n."""

    amplitude: float
    alpha: float
    white_floor: float
    tau_s: float
    residual: float
    amplitude_stderr: float = float("nan")

    def model(self, f: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return self.amplitude**2 * np.power(f, -self.alpha) + self.white_floor

    @property
    def white_amplitude(self) -> float:
        """White floor as an amplitude density, sqrt(w_n)."""
        return math.sqrt(self.white_floor)


# Transition curve


def population(
    phi_x: Union[float, np.ndarray], curve: TransitionCurve
) -> Union[float, np.ndarray]:
    """Excited-state population 1/2 [1 + tanh((phi_x - center) / 2W)]."""
    return 0.5 * (1.0 + np.tanh((np.asarray(phi_x) - curve.center) / (2.0 * curve.width)))


def invert_population(p: Union[float, np.ndarray], curve: TransitionCurve) -> Union[float, np.ndarray]:
    """Flux at which the population equals p.

    Raises:
        OutOfDomain: If any p lies outside the open interval (0, 1)
    """
    arr = np.asarray(p, dtype=float)
    bad = ~((arr > 0.0) & (arr < 1.0))
    if np.any(bad):
        raise OutOfDomain(value=float(arr[bad].flat[0]))
    result = curve.center + 2.0 * curve.width * np.arctanh(2.0 * arr - 1.0)
    return float(result) if np.ndim(result) == 0 else result


def _width_guess(phi: np.ndarray, p: np.ndarray) -> float:
    order = np.argsort(phi)
    phi, p = phi[order], p[order]
    lo = phi[np.argmin(np.abs(p - 0.2))]
    hi = phi[np.argmin(np.abs(p - 0.8))]
    spread = abs(hi - lo)
    # 0.2 -> 0.8 spans 4 W atanh(0.6)
    guess = spread / (4.0 * math.atanh(0.6))
    return guess if guess > 0 else float(np.ptp(phi)) / 10.0


def fit_transition(samples: Sequence[Tuple[float, float]]) -> TransitionCurve:
    """Least-squares transition curve through (flux, population) samples.

    Raises:
        InsufficientSpan: Unless the samples reach below 0.2 and above 0.8
        FitDiverged: If the optimizer fails
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        raise ValueError("fit_transition needs at least three (flux, population) samples")
    phi, p = data[:, 0], data[:, 1]
    p_min, p_max = float(p.min()), float(p.max())
    if not (p_min < 0.2 and p_max > 0.8):
        raise InsufficientSpan(p_min=p_min, p_max=p_max)

    def model(x: np.ndarray, width: float, center: float) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh((x - center) / (2.0 * width)))

    center0 = float(phi[np.argmin(np.abs(p - 0.5))])
    width0 = _width_guess(phi, p)
    try:
        params, _ = curve_fit(
            model,
            phi,
            p,
            p0=[width0, center0],
            bounds=([width0 * 1e-6, -np.inf], [np.inf, np.inf]),
        )
    except (RuntimeError, ValueError) as exc:
        raise FitDiverged(f"Transition fit failed: {exc}") from exc
    width, center = float(params[0]), float(params[1])
    residual = float(np.sqrt(np.mean((model(phi, width, center) - p) ** 2)))
    logger.debug(f"Transition fit: W={width:.4g} center={center:.4g} rms={residual:.3g}")
    return TransitionCurve(width=width, center=center)


def simulate_population_sweep(
    curve: TransitionCurve,
    phi_values: Sequence[float],
    shots: int,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Empirical populations from binomial shots at each flux, as (flux, P) rows."""
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    rng = np.random.default_rng(seed)
    phi = np.asarray(phi_values, dtype=float)
    counts = rng.binomial(shots, population(phi, curve))
    return np.column_stack([phi, counts / shots])


# Flux noise


def one_over_f_noise(
    amplitude: float,
    n_samples: int,
    tau_s: float,
    rng: Optional[np.random.Generator] = None,
    f_min: Optional[float] = None,
    f_max: Optional[float] = None,
) -> np.ndarray:
    """Flux noise with density amplitude^2 / f, from one Ornstein-Uhlenbeck process per octave.

    Corner frequencies run from an octave below f_min (default the record's
    lowest resolvable frequency) to an octave above f_max (default Nyquist).
    Each process starts stationary with variance 2 ln2 amplitude^2.

    Args:
        amplitude: Noise amplitude at 1 Hz in flux quanta per root hertz
        n_samples: Series length
        tau_s: Sampling interval in seconds
        rng: Random generator
        f_min: Lowest corner of interest in Hz
        f_max: Highest corner of interest in Hz

    Returns:
        The noise series
    """
    if n_samples < 1 or tau_s <= 0:
        raise ValueError("n_samples and tau_s must be positive")
    if amplitude < 0:
        raise ValueError(f"amplitude must be non-negative, got {amplitude}")
    rng = rng or np.random.default_rng()
    series = np.zeros(n_samples)
    if amplitude == 0:
        return series
    f_lo = f_min or 1.0 / (n_samples * tau_s)
    f_hi = f_max or 0.5 / tau_s
    n_octaves = int(math.ceil(math.log2(f_hi / f_lo)))
    variance = 2.0 * math.log(2.0) * amplitude**2
    for k in range(-1, n_octaves + 2):
        corner = f_lo * 2.0**k
        rho = math.exp(-2.0 * math.pi * corner * tau_s)
        drive = math.sqrt(variance * (1.0 - rho**2))
        start = rng.standard_normal() * math.sqrt(variance)
        series += lfilter([drive], [1.0, -rho], rng.standard_normal(n_samples), zi=[rho * start])[0]
    return series


def one_over_f_generator(amplitude: float) -> FluxNoiseGenerator:
    """Generator callable for simulate_noise_run."""

    def generate(n_samples: int, tau_s: float, rng: np.random.Generator) -> np.ndarray:
        return one_over_f_noise(amplitude, n_samples, tau_s, rng)

    return generate


def white_floor(width: float, tau_s: float, shots_per_sample: int = 1) -> float:
    """White floor of a population-inferred flux series at the transition center."""
    return 4.0 * width**2 * tau_s / shots_per_sample


def simulate_noise_run(
    curve: TransitionCurve,
    flux_noise_generator: Optional[FluxNoiseGenerator],
    shots_per_sample: int,
    n_samples: int,
    tau_s: float,
    seed: Optional[int] = None,
    bias: Optional[float] = None,
    mode: InversionMode = InversionMode.LINEARIZED,
) -> np.ndarray:
    """Flux time series inferred from repeated population measurements.

    Each sample draws binomial shots at the population of bias + noise and maps
    the empirical population back to flux. LINEARIZED uses the slope at the
    bias; EXACT clamps to [1/2N, 1 - 1/2N] and inverts the full curve.

    Args:
        curve: Transition curve
        flux_noise_generator: Flux noise source, or None for none
        shots_per_sample: Shots per population estimate
        n_samples: Series length
        tau_s: Sampling interval in seconds
        seed: Random seed
        bias: Bias flux, the curve center by default
        mode: Inversion mode

    Returns:
        Reported flux series
    """
    if shots_per_sample < 1 or n_samples < 1 or tau_s <= 0:
        raise ValueError("shots_per_sample, n_samples and tau_s must be positive")
    rng = np.random.default_rng(seed)
    bias = curve.center if bias is None else bias
    noise = (
        flux_noise_generator(n_samples, tau_s, rng)
        if flux_noise_generator is not None
        else np.zeros(n_samples)
    )
    true_flux = bias + noise
    p_emp = rng.binomial(shots_per_sample, population(true_flux, curve)) / shots_per_sample

    if InversionMode(mode) is InversionMode.LINEARIZED:
        return bias + (p_emp - population(bias, curve)) / curve.slope(bias)
    edge = 1.0 / (2.0 * shots_per_sample)
    if shots_per_sample == 1:
        logger.warning("Exact inversion with one shot per sample gives a constant series")
    clamped = np.clip(p_emp, edge, 1.0 - edge)
    return np.atleast_1d(invert_population(clamped, curve))


# Spectra


def _segment_length(n: int) -> int:
    # 50% overlap gives 2n/L - 1 averages; L <= n/4.5 keeps at least eight
    return 2 ** int(math.floor(math.log2(n / (0.5 * (MIN_WELCH_AVERAGES + 1)))))


def psd(series: Sequence[float], tau_s: float) -> Spectrum:
    """Welch spectrum with a Hann window and 50% overlap.

    Raises:
        ValueError: For series shorter than 256 samples
    """
    x = np.asarray(series, dtype=float)
    if x.size < MIN_PSD_SAMPLES:
        raise ValueError(f"psd needs at least {MIN_PSD_SAMPLES} samples, got {x.size}")
    if tau_s <= 0:
        raise ValueError(f"tau_s must be positive, got {tau_s}")
    nperseg = _segment_length(x.size)
    noverlap = nperseg // 2
    freqs, one_sided = welch(
        x, fs=1.0 / tau_s, window="hann", nperseg=nperseg, noverlap=noverlap, scaling="density"
    )
    n_averages = (x.size - noverlap) // (nperseg - noverlap)
    return Spectrum(frequencies=freqs, density=one_sided / 2.0, tau_s=tau_s, n_averages=n_averages)


def log_bin(
    frequencies: np.ndarray, density: np.ndarray, n_bins: int = DEFAULT_LOG_BINS
) -> Tuple[np.ndarray, np.ndarray]:
    """Average a spectrum into log-spaced bins, dropping DC and empty bins."""
    mask = (frequencies > 0) & np.isfinite(density) & (density > 0)
    f, s = frequencies[mask], density[mask]
    edges = np.geomspace(f[0], f[-1] * (1 + 1e-12), n_bins + 1)
    index = np.digitize(f, edges) - 1
    centers, levels = [], []
    for b in range(n_bins):
        sel = index == b
        if np.any(sel):
            centers.append(float(np.exp(np.mean(np.log(f[sel])))))
            levels.append(float(np.mean(s[sel])))
    return np.asarray(centers), np.asarray(levels)


def fit_noise(spectrum: Spectrum, n_bins: int = DEFAULT_LOG_BINS) -> NoiseFit:
    """Fit A^2 (1 Hz / f)^alpha + w_n to a spectrum in log space.

    A >= 0, w_n >= 0 and alpha in [0.5, 2].

    Raises:
        ValueError: If the spectrum covers less than two decades
        FitDiverged: If the optimizer fails
    """
    positive = spectrum.frequencies[spectrum.frequencies > 0]
    if positive.size < 2 or math.log10(positive[-1] / positive[0]) < MIN_FIT_DECADES:
        raise ValueError("fit_noise needs at least two decades of frequency coverage")
    f, s = log_bin(spectrum.frequencies, spectrum.density, n_bins)

    n_top = max(1, len(s) // 10)
    wn0 = float(np.median(s[-n_top:]))
    a2_0 = max((float(s[0]) - wn0) * f[0], 1e-3 * wn0 * f[0])
    scale = float(np.median(s))
    floor = 1e-12

    def residuals(p: np.ndarray) -> np.ndarray:
        model = scale * (p[0] * f ** (-p[1]) + p[2])
        return np.log(model) - np.log(s)

    x0 = np.array([a2_0 / scale, 1.0, wn0 / scale])
    try:
        result = least_squares(
            residuals,
            x0,
            bounds=([floor, 0.5, floor], [np.inf, 2.0, np.inf]),
            x_scale="jac",
        )
    except (ValueError, FloatingPointError) as exc:
        raise FitDiverged(f"Noise fit failed: {exc}") from exc
    if not result.success or not np.all(np.isfinite(result.x)):
        raise FitDiverged("Noise fit did not converge", residual=float(np.sqrt(2 * result.cost)))

    a2, alpha, wn = float(result.x[0]) * scale, float(result.x[1]), float(result.x[2]) * scale
    rms = float(np.sqrt(np.mean(result.fun**2)))
    stderr = float("nan")
    dof = len(s) - 3
    if dof > 0:
        try:
            cov = np.linalg.inv(result.jac.T @ result.jac) * (np.sum(result.fun**2) / dof)
            stderr = math.sqrt(max(cov[0, 0], 0.0)) * scale / (2.0 * math.sqrt(a2))
        except np.linalg.LinAlgError:
            pass
    fit = NoiseFit(
        amplitude=math.sqrt(a2),
        alpha=alpha,
        white_floor=wn,
        tau_s=spectrum.tau_s,
        residual=rms,
        amplitude_stderr=stderr,
    )
    logger.info(
        f"Noise fit: A={fit.amplitude:.3g}/sqrt(Hz) alpha={alpha:.2f} "
        f"w_n={wn:.3g}/Hz (rms log residual {rms:.3f})"
    )
    return fit
