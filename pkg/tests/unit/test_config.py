"""Tests for scenario configuration loading."""

import json
import os
import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest

from fastr_readout.config import ConfigLoader, Scenario, derive_seed
from fastr_readout.exceptions import ConfigError
from fastr_readout.resonator import designed_device, prototype_device
from fastr_readout.types import Experiment

pytestmark = pytest.mark.unit


class TestConfigLoader:
    """Test the ConfigLoader class."""

    def test_init_without_path(self):
        """Test a loader without a file uses defaults only."""
        loader = ConfigLoader()
        assert loader.config_path is None
        assert loader.get_config() == {}
        assert loader.list_profiles() == ["default"]

    def test_defaults(self):
        """Test the default scenario."""
        scenario = ConfigLoader().load_scenario()
        assert scenario.array_size == 32
        assert scenario.seed == 0
        assert scenario.readout.tn_k == 7.9
        assert scenario.calibration.max_flux == 0.48
        assert scenario.plan.n_cells == [64, 144, 256, 400, 576]
        assert scenario.experiment is None

    def test_config_file(self, write_scenario):
        """Test values from the file override defaults."""
        path = write_scenario({"array_size": 8, "readout": {"pg_dbm": -98.0}})
        scenario = ConfigLoader(path).load_scenario()
        assert scenario.array_size == 8
        assert scenario.readout.pg_dbm == -98.0
        assert scenario.readout.tn_k == 7.9

    def test_profiles(self, write_scenario):
        """Test the active profile overrides top-level keys."""
        path = write_scenario(
            {
                "array_size": 16,
                "seed": 3,
                "profiles": {"small": {"array_size": 4}, "large": {"array_size": 64}},
            }
        )
        loader = ConfigLoader(path)
        assert loader.list_profiles() == ["small", "large"]
        assert loader.load_scenario().array_size == 16
        small = loader.load_scenario("small")
        assert small.array_size == 4
        assert small.seed == 3

    def test_unknown_profile(self, write_scenario):
        """Test a missing profile raises ConfigError."""
        loader = ConfigLoader(write_scenario({"profiles": {"small": {}}}))
        with pytest.raises(ConfigError) as exc_info:
            loader.load_scenario("huge")
        assert "huge" in exc_info.value.message

    def test_missing_file(self):
        """Test a missing file raises ConfigError with its path."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "nonexistent.json"
            with pytest.raises(ConfigError) as exc_info:
                ConfigLoader(path).load_scenario()
            assert exc_info.value.path == str(path)

    def test_invalid_json(self):
        """Test a malformed file raises ConfigError."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "scenario.json"
            path.write_text("{not json")
            with pytest.raises(ConfigError):
                ConfigLoader(path).load_scenario()

    def test_non_object(self, write_scenario):
        """Test a JSON array is not a scenario."""
        with pytest.raises(ConfigError):
            ConfigLoader(write_scenario([1, 2, 3])).load_scenario()

    def test_validation_errors(self, write_scenario):
        """Test out-of-range values are reported per field."""
        path = write_scenario({"array_size": 0, "fidelity": {"data_pattern": [0, 2]}})
        with pytest.raises(ConfigError) as exc_info:
            ConfigLoader(path).load_scenario()
        errors = exc_info.value.validation_errors
        assert "array_size" in errors
        assert "fidelity.data_pattern" in errors

    def test_unknown_keys_forbidden(self, write_scenario):
        """Test unknown keys are rejected."""
        path = write_scenario({"readout": {"tn": 4.0}})
        with pytest.raises(ConfigError) as exc_info:
            ConfigLoader(path).load_scenario()
        assert "readout.tn" in exc_info.value.validation_errors


class TestDevices:
    """Test device resolution."""

    def test_bundled_prototype(self):
        """Test the prototype is used when no device is given."""
        assert ConfigLoader().load_scenario().design() == prototype_device()

    def test_inline_device(self, write_scenario, device_document):
        """Test an inline device document."""
        scenario = ConfigLoader(write_scenario({"device": device_document})).load_scenario()
        assert scenario.design() == designed_device()

    def test_relative_device_path(self, tmp_path, write_scenario, device_document):
        """Test a device path is resolved next to the scenario file."""
        (tmp_path / "device.json").write_text(json.dumps(device_document))
        scenario = ConfigLoader(write_scenario({"device": "device.json"})).load_scenario()
        assert scenario.design() == designed_device()

    def test_missing_device_file(self, write_scenario):
        """Test a missing device file raises ConfigError."""
        with pytest.raises(ConfigError) as exc_info:
            ConfigLoader(write_scenario({"device": "missing.json"})).load_scenario()
        assert exc_info.value.path.endswith("missing.json")

    def test_incomplete_device(self, write_scenario, device_document):
        """Test a device without TLS parameters fails validation."""
        del device_document["tls"]
        with pytest.raises(ConfigError) as exc_info:
            ConfigLoader(write_scenario({"device": device_document})).load_scenario()
        assert any(key.startswith("device") for key in exc_info.value.validation_errors)

    def test_unresolved_reference(self):
        """Test a scenario built by hand with a path cannot produce a design."""
        with pytest.raises(ConfigError):
            Scenario(device="device.json").design()


class TestSeedsAndOverrides:
    """Test seeds, experiment overrides and output directories."""

    def test_derived_seeds_are_deterministic(self):
        """Test stage seeds follow from the master seed."""
        a = ConfigLoader().load_scenario(seed=5)
        b = ConfigLoader().load_scenario(seed=5)
        assert a.scatter.seed == b.scatter.seed == derive_seed(5, 0)
        assert a.readout.seed == derive_seed(5, 1)
        assert a.metrology.seed == derive_seed(5, 2)
        assert len({a.scatter.seed, a.readout.seed, a.metrology.seed}) == 3

    def test_explicit_stage_seed_kept(self, write_scenario):
        """Test an explicit stage seed is not replaced."""
        path = write_scenario({"seed": 1, "readout": {"seed": 77}})
        scenario = ConfigLoader(path).load_scenario()
        assert scenario.readout.seed == 77
        assert scenario.scatter.seed == derive_seed(1, 0)

    def test_seed_override(self, write_scenario):
        """Test an explicit seed beats the file."""
        scenario = ConfigLoader(write_scenario({"seed": 1})).load_scenario(seed=9)
        assert scenario.seed == 9

    def test_experiment_override(self):
        """Test the experiment can be set by the caller."""
        scenario = ConfigLoader().load_scenario(experiment=Experiment.PSD)
        assert scenario.experiment is Experiment.PSD

    def test_out_dir_priority(self, write_scenario):
        """Test explicit > scenario > FASTR_OUT_DIR > default."""
        loader = ConfigLoader()
        scenario = loader.load_scenario()
        with patch.dict(os.environ, {}, clear=True):
            assert loader.resolve_out_dir(scenario) == Path("fastr-out")
        with patch.dict(os.environ, {"FASTR_OUT_DIR": "/tmp/from-env"}, clear=True):
            assert loader.resolve_out_dir(scenario) == Path("/tmp/from-env")
            assert loader.resolve_out_dir(scenario, "explicit") == Path("explicit")
            with_dir = ConfigLoader(write_scenario({"out_dir": "from-file"})).load_scenario()
            assert loader.resolve_out_dir(with_dir) == Path("from-file")
