"""Unit tests for exception classes."""

import pytest

from fastr_readout.exceptions import (
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

pytestmark = pytest.mark.unit


class TestFastrError:
    """Test the base FastrError exception."""

    def test_basic_error(self):
        """Test creating a basic error."""
        error = FastrError("Test error")
        assert str(error) == "Test error"
        assert error.message == "Test error"
        assert error.details == {}

    def test_error_with_details(self):
        """Test creating an error with details."""
        details = {"device_id": "dev003", "stage": 4}
        error = FastrError("Test error", details=details)
        assert error.details == details

    @pytest.mark.parametrize(
        "error_class",
        [
            BrokenPath,
            DegenerateStates,
            FitDiverged,
            FluxAtFrustration,
            InsufficientSpan,
            LineCapacityExceeded,
            NotPerfectSquare,
            OutOfDomain,
            ResponsivityUnreachable,
            StageInoperable,
            TargetUnreachable,
        ],
    )
    def test_default_messages(self, error_class):
        """Test every error has a default message and derives from FastrError."""
        error = error_class()
        assert isinstance(error, FastrError)
        assert error.message
        assert str(error) == error.message


class TestDomainErrors:
    """Test the fields carried by the domain errors."""

    def test_flux_at_frustration(self):
        """Test the flux and cosine are kept."""
        error = FluxAtFrustration(flux=0.5, cos_value=6e-17)
        assert error.flux == 0.5
        assert error.cos_value == 6e-17

    def test_target_unreachable(self):
        """Test the band and device are kept."""
        error = TargetUnreachable("too high", f_target=7e9, f_min=5e9, f_max=6.9e9, device_id="d1")
        assert (error.f_target, error.f_min, error.f_max, error.device_id) == (
            7e9,
            5e9,
            6.9e9,
            "d1",
        )

    def test_responsivity_unreachable(self):
        """Test the responsivity range is kept."""
        error = ResponsivityUnreachable(r_target=3.0, r_min=0.0, r_max=2.5)
        assert error.r_max == 2.5
        assert error.device_id is None

    def test_shift_register_errors(self):
        """Test stage indices, directions and capacities are kept."""
        assert StageInoperable(stage_index=4).stage_index == 4
        broken = BrokenPath(stage_index=9, direction="forward")
        assert (broken.stage_index, broken.direction) == (9, "forward")
        full = LineCapacityExceeded(n_bits=11, capacity=10)
        assert (full.n_bits, full.capacity) == (11, 10)

    def test_fit_diverged(self):
        """Test residual and parameters default sensibly."""
        error = FitDiverged(residual=1.5)
        assert error.residual == 1.5
        assert error.parameters == {}

    def test_config_error(self):
        """Test validation errors and path are kept."""
        error = ConfigError("bad", validation_errors={"array_size": "too small"}, path="s.json")
        assert error.validation_errors == {"array_size": "too small"}
        assert error.path == "s.json"
        assert ConfigError("bad").validation_errors == {}

    def test_catch_as_base(self):
        """Test domain errors can be caught as FastrError."""
        with pytest.raises(FastrError):
            raise DegenerateStates(separation=0.0, noise=0.1)
