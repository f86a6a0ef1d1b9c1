"""Exception classes for the FASTR readout toolkit."""

from typing import Any, Dict, Optional


class FastrError(Exception):
    """Base exception for all FASTR readout errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}


class FluxAtFrustration(FastrError):
    """Exception raised when a SQUID is biased inside the frustration clamp."""

    def __init__(
        self,
        message: str = "SQUID flux bias is at frustration; inductance diverges.",
        flux: Optional[float] = None,
        cos_value: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.flux = flux
        self.cos_value = cos_value


class FitDiverged(FastrError):
    """Exception raised when a least-squares fit fails or leaves its domain."""

    def __init__(
        self,
        message: str = "Fit did not converge to a physical solution.",
        residual: Optional[float] = None,
        parameters: Optional[Dict[str, float]] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.residual = residual
        self.parameters = parameters or {}


class TargetUnreachable(FastrError):
    """Exception raised when a target frequency lies outside the tunable band."""

    def __init__(
        self,
        message: str = "Target frequency is outside the attainable band.",
        f_target: Optional[float] = None,
        f_min: Optional[float] = None,
        f_max: Optional[float] = None,
        device_id: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.f_target = f_target
        self.f_min = f_min
        self.f_max = f_max
        self.device_id = device_id


class ResponsivityUnreachable(FastrError):
    """Exception raised when no contour point reaches the requested responsivity."""

    def __init__(
        self,
        message: str = "Requested responsivity is outside the contour's range.",
        r_target: Optional[float] = None,
        r_min: Optional[float] = None,
        r_max: Optional[float] = None,
        device_id: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.r_target = r_target
        self.r_min = r_min
        self.r_max = r_max
        self.device_id = device_id


class StageInoperable(FastrError):
    """Exception raised when a broken copy stage is asked to latch."""

    def __init__(
        self,
        message: str = "Copy stage is inoperable.",
        stage_index: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.stage_index = stage_index


class BrokenPath(FastrError):
    """Exception raised when data cannot reach the active end of a line."""

    def __init__(
        self,
        message: str = "Inoperable stage between remaining data and the active end.",
        stage_index: Optional[int] = None,
        direction: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.stage_index = stage_index
        self.direction = direction


class LineCapacityExceeded(FastrError):
    """Exception raised when a pattern does not fit into a line's copy stages."""

    def __init__(
        self,
        message: str = "Bit pattern exceeds line capacity.",
        n_bits: Optional[int] = None,
        capacity: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.n_bits = n_bits
        self.capacity = capacity


class DegenerateStates(FastrError):
    """Exception raised when calibration clusters cannot be separated."""

    def __init__(
        self,
        message: str = "Calibration centroids are not separated above the shot noise.",
        separation: Optional[float] = None,
        noise: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.separation = separation
        self.noise = noise


class InsufficientSpan(FastrError):
    """Exception raised when population samples do not cover both tails."""

    def __init__(
        self,
        message: str = "Population samples must span both tails (P < 0.2 and P > 0.8).",
        p_min: Optional[float] = None,
        p_max: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.p_min = p_min
        self.p_max = p_max


class OutOfDomain(FastrError):
    """Exception raised when a probability outside (0, 1) is inverted."""

    def __init__(
        self,
        message: str = "Population must lie strictly between 0 and 1.",
        value: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.value = value


class NotPerfectSquare(FastrError):
    """Exception raised when a processor cell count is not a perfect square."""

    def __init__(
        self,
        message: str = "Cell count must be a perfect square.",
        n_cells: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.n_cells = n_cells


class ConfigError(FastrError):
    """Exception raised when a scenario or document fails to load or validate."""

    def __init__(
        self,
        message: str,
        validation_errors: Optional[Dict[str, Any]] = None,
        path: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, details)
        self.validation_errors = validation_errors or {}
        self.path = path
