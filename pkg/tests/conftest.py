"""Test configuration and fixtures for the FASTR readout toolkit."""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict

import pytest

from fastr_readout.logging import FastrLogger
from fastr_readout.resonator import (
    CalibratedDevice,
    ResonanceProfile,
    ResonatorDesign,
    designed_device,
    prototype_calibration,
    prototype_device,
)


@pytest.fixture
def design() -> ResonatorDesign:
    """The as-designed device (324 pH, 1.77 pF, 11 uA junctions)."""
    return designed_device()


@pytest.fixture
def prototype() -> ResonatorDesign:
    """The measured prototype at 6.91 GHz with Qc = 329."""
    return prototype_device()


@pytest.fixture(scope="session")
def calibrated() -> CalibratedDevice:
    """Prototype at its operating bias with the drive coupling calibrated."""
    return prototype_calibration()


@pytest.fixture
def profile() -> ResonanceProfile:
    """A prototype-like resonance at 6.91 GHz."""
    return ResonanceProfile.from_quality_factors(6.91e9, qi=6000.0, qc=329.0)


@pytest.fixture
def device_document() -> Dict[str, Any]:
    """Device JSON document of the as-designed device."""
    return {
        "cs_f": 1.7e-12,
        "cc_f": 7.0e-14,
        "lg_h": 3.24e-10,
        "ic_a": 1.1e-05,
        "d_m": 5.0e-08,
        "qc": 338.0,
        "tls": {"qi_lp": 1000.0, "qi_res": 100000.0, "e_sat_vpm": 50.0},
    }


@pytest.fixture
def write_scenario(tmp_path: Path) -> Callable[[Dict[str, Any]], Path]:
    """Write a scenario dict to a JSON file in the test's temporary directory."""

    def _write(payload: Dict[str, Any], name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return path

    return _write


@pytest.fixture(autouse=True)
def quiet_logging():
    """Keep package logging at WARNING during tests and restore the registry after."""
    saved = dict(FastrLogger._loggers)
    FastrLogger.set_level(logging.WARNING)
    yield
    FastrLogger._loggers.clear()
    FastrLogger._loggers.update(saved)
    FastrLogger.set_level(logging.INFO)
