"""Scenario configuration for the FASTR readout toolkit."""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigError
from .logging import FastrLogger
from .planner import DEFAULT_CELL_COUNTS
from .resonator import ResonatorDesign, prototype_device
from .types import Experiment, InversionMode, ScatterDistribution

logger = FastrLogger.get_logger("config")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TlsSection(_Section):
    qi_lp: float = Field(gt=0)
    qi_res: float = Field(gt=0)
    e_sat_vpm: float = Field(gt=0)


class DeviceSection(_Section):
    """Inline device document."""

    cs_f: float = Field(gt=0)
    cc_f: float = Field(gt=0)
    lg_h: float = Field(gt=0)
    ic_a: float = Field(gt=0)
    d_m: float = Field(gt=0)
    qc: float = Field(gt=0)
    tls: TlsSection

    def to_design(self) -> ResonatorDesign:
        return ResonatorDesign.from_document(self.model_dump())  # type: ignore[arg-type]


class ScatterSection(_Section):
    distribution: ScatterDistribution = ScatterDistribution.UNIFORM
    spread: float = Field(default=0.10, ge=0, lt=0.5)
    seed: Optional[int] = Field(default=None, ge=0)


class ReadoutSection(_Section):
    band_center_hz: float = Field(default=6.0e9, gt=0)
    band_width_hz: float = Field(default=2.5e9, gt=0)
    lo_offset_hz: float = 0.0
    tn_k: float = Field(default=7.9, gt=0)
    pg_dbm: float = -96.0
    integration_s: Optional[float] = Field(default=None, gt=0)
    snr_min: float = Field(default=5.0, gt=0)
    a_max: float = Field(default=0.25, gt=0)
    detection_bandwidth_hz: float = Field(default=19.5e6, gt=0)
    seed: Optional[int] = Field(default=None, ge=0)


class BreakSection(_Section):
    line: int = Field(ge=0)
    stage: int = Field(ge=0)


class TopologySection(_Section):
    n_cells: int = Field(default=64, ge=1)
    stages_per_line: int = Field(default=30, ge=3)
    filter_bandwidth_hz: float = Field(default=30e6, gt=0)
    breaks: List[BreakSection] = Field(default_factory=list)


class CalibrationSection(_Section):
    n_per_axis: int = Field(default=64, ge=2)
    signal_flux: float = Field(default=0.01, gt=0)
    r_target: float = Field(default=1.0, gt=0)
    qi: float = Field(default=6000.0, gt=0)
    margin_linewidths: float = Field(default=6.0, ge=0)
    max_flux: float = Field(default=0.48, gt=0, lt=0.5)
    f_tolerance_linewidths: float = Field(default=0.01, gt=0)
    r_tolerance: float = Field(default=0.05, gt=0)
    min_spacing_linewidths: float = Field(default=2.0, gt=0)


class FidelitySection(_Section):
    data_pattern: List[int] = Field(default_factory=lambda: [0, 1, 1, 0, 1, 0, 0, 1])
    n_repeats: int = Field(default=1000, ge=1)
    n_tones: int = Field(default=1, ge=1)
    forced_snr: Optional[float] = Field(default=None, gt=0)
    calibration_shots: int = Field(default=20000, ge=50)
    modulation: float = Field(default=1.0, gt=0, le=1)
    confidence: float = Field(default=0.95, gt=0, lt=1)

    @field_validator("data_pattern")
    @classmethod
    def _bits_only(cls, value: List[int]) -> List[int]:
        if not value or any(bit not in (0, 1) for bit in value):
            raise ValueError("data_pattern must be a non-empty list of 0/1 bits")
        return value


class MetrologySection(_Section):
    width_phi0: float = Field(default=211e-6, gt=0)
    center_phi0: float = 0.0
    tau_s: float = Field(default=3.6e-6, gt=0)
    shots_per_sample: int = Field(default=1, ge=1)
    n_samples: int = Field(default=65536, ge=256)
    one_over_f_amplitude: float = Field(default=11e-6, ge=0)
    mode: InversionMode = InversionMode.LINEARIZED
    seed: Optional[int] = Field(default=None, ge=0)


class PlanSection(_Section):
    n_cells: List[int] = Field(default_factory=lambda: list(DEFAULT_CELL_COUNTS))


class Scenario(_Section):
    """A complete, validated experiment description.

    Stage seeds left unset are derived from the master seed by
    with_derived_seeds().
    """

    device: Union[DeviceSection, str, None] = None
    array_size: int = Field(default=32, ge=1)
    scatter: ScatterSection = Field(default_factory=ScatterSection)
    readout: ReadoutSection = Field(default_factory=ReadoutSection)
    topology: TopologySection = Field(default_factory=TopologySection)
    calibration: CalibrationSection = Field(default_factory=CalibrationSection)
    fidelity: FidelitySection = Field(default_factory=FidelitySection)
    metrology: MetrologySection = Field(default_factory=MetrologySection)
    plan: PlanSection = Field(default_factory=PlanSection)
    experiment: Optional[Experiment] = None
    seed: int = Field(default=0, ge=0)
    out_dir: Optional[str] = None

    def with_derived_seeds(self) -> "Scenario":
        """Copy with every unset stage seed filled from the master seed."""
        stages = {"scatter": 0, "readout": 1, "metrology": 2}
        updates: Dict[str, Any] = {}
        for name, index in stages.items():
            section = getattr(self, name)
            if section.seed is None:
                updates[name] = section.model_copy(update={"seed": derive_seed(self.seed, index)})
        return self.model_copy(update=updates)

    def design(self) -> ResonatorDesign:
        """Device template; the bundled prototype when none is given."""
        if isinstance(self.device, DeviceSection):
            return self.device.to_design()
        if self.device is None:
            return prototype_device()
        raise ConfigError(f"Device reference '{self.device}' was not resolved", path=self.device)


def derive_seed(master: int, stage_index: int) -> int:
    """Deterministic stage seed from the master seed."""
    state = np.random.SeedSequence([master, stage_index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _validation_errors(error: ValidationError) -> Dict[str, Any]:
    return {".".join(str(p) for p in e["loc"]) or "<root>": e["msg"] for e in error.errors()}


class ConfigLoader:
    """Loads scenario configuration with priority order.

    Explicit parameters > config file (active profile over top-level keys) >
    environment (FASTR_OUT_DIR only) > defaults.
    """

    DEFAULT_PROFILE = "default"
    OUT_DIR_ENV = "FASTR_OUT_DIR"
    DEFAULT_OUT_DIR = "fastr-out"

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """Initialize the config loader.

        Args:
            config_path: Path to a scenario JSON file. If None, defaults only.
        """
        self.config_path = Path(config_path).expanduser() if config_path else None
        self._config_data: Optional[Dict[str, Any]] = None

    def _load_config_file(self) -> Dict[str, Any]:
        """Load configuration from file, once."""
        if self._config_data is not None:
            return self._config_data
        if self.config_path is None:
            self._config_data = {}
            return self._config_data

        path = str(self.config_path)
        if not self.config_path.exists():
            raise ConfigError(f"Config file not found: {path}", path=path)
        try:
            with open(self.config_path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}", path=path) from e
        except OSError as e:
            raise ConfigError(f"Config file {path} cannot be read: {e}", path=path) from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object", path=path)
        self._config_data = data
        return self._config_data

    def _get_env_value(self, key: str) -> Optional[str]:
        """Get value from environment variables."""
        return os.getenv(key)

    def _get_profile_config(self, config_data: Dict[str, Any], profile: str) -> Dict[str, Any]:
        """Get configuration for a specific profile.

        Args:
            config_data: Full config data from file
            profile: Profile name to extract

        Returns:
            Configuration for the specified profile
        """
        if "profiles" in config_data:
            profiles = config_data["profiles"]
            if profile in profiles:
                top_level = {k: v for k, v in config_data.items() if k != "profiles"}
                return {**top_level, **profiles[profile]}
            elif profile != self.DEFAULT_PROFILE:
                raise ConfigError(
                    f"Profile '{profile}' not found in config file. "
                    f"Available profiles: {list(profiles.keys())}",
                    path=str(self.config_path),
                )

        return {k: v for k, v in config_data.items() if k != "profiles"}

    def list_profiles(self) -> List[str]:
        """List all available profiles in the config file."""
        config_data = self._load_config_file()
        if "profiles" in config_data:
            return list(config_data["profiles"].keys())
        return [self.DEFAULT_PROFILE]

    def get_config(self, profile: Optional[str] = None) -> Dict[str, Any]:
        """Raw merged configuration for the active profile."""
        return self._get_profile_config(
            self._load_config_file(), profile or self.DEFAULT_PROFILE
        )

    def _resolve_device(self, reference: str) -> Dict[str, Any]:
        path = Path(reference).expanduser()
        if not path.is_absolute() and self.config_path is not None:
            path = self.config_path.parent / path
        if not path.exists():
            raise ConfigError(f"Device file not found: {path}", path=str(path))
        try:
            with open(path) as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Device file {path} cannot be read: {e}", path=str(path)) from e
        if not isinstance(document, dict):
            raise ConfigError(f"Device file {path} must hold a JSON object", path=str(path))
        return document

    def load_scenario(
        self,
        profile: Optional[str] = None,
        seed: Optional[int] = None,
        experiment: Optional[Experiment] = None,
    ) -> Scenario:
        """Validated scenario with device references resolved and seeds derived.

        Args:
            profile: Profile name, the default profile if None
            seed: Master seed override
            experiment: Experiment override

        Returns:
            The scenario

        Raises:
            ConfigError: If the file, a referenced device or validation fails
        """
        raw = self.get_config(profile)
        if seed is not None:
            raw["seed"] = seed
        if experiment is not None:
            raw["experiment"] = Experiment(experiment).value
        if isinstance(raw.get("device"), str):
            raw["device"] = self._resolve_device(raw["device"])

        try:
            scenario = Scenario.model_validate(raw)
        except ValidationError as e:
            errors = _validation_errors(e)
            where = str(self.config_path) if self.config_path else "<defaults>"
            raise ConfigError(
                f"Invalid scenario in {where}: {errors}",
                validation_errors=errors,
                path=str(self.config_path) if self.config_path else None,
            ) from e
        scenario = scenario.with_derived_seeds()
        logger.debug(
            f"Scenario loaded (profile={profile or self.DEFAULT_PROFILE}, seed={scenario.seed}, "
            f"scatter seed={scenario.scatter.seed}, readout seed={scenario.readout.seed}, "
            f"metrology seed={scenario.metrology.seed})"
        )
        return scenario

    def resolve_out_dir(self, scenario: Scenario, out_dir: Optional[Union[str, Path]] = None) -> Path:
        """Output directory: explicit > scenario > FASTR_OUT_DIR > default."""
        chosen = (
            out_dir
            or scenario.out_dir
            or self._get_env_value(self.OUT_DIR_ENV)
            or self.DEFAULT_OUT_DIR
        )
        return Path(chosen).expanduser()
