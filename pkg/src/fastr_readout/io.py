"""File formats: atomic CSV/JSON writers with a provenance header, and loaders.

CSV files start with '#' comment lines naming the tool version, the command and
the SHA-256 of the canonical scenario JSON; JSON files carry the same in a
"meta" object. Nothing time-dependent is written, so reruns are byte-identical.
"""

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .calibration import BiasAssignment, FrequencySurface
from .exceptions import ConfigError
from .metrology import Spectrum
from .planner import ScalingRow
from .readout import ShotBatch
from .resonator import ResonatorDesign, Sweep
from .types import DeviceDocument, OutputFormat

TOOL_NAME = "fastr-readout"

PathLike = Union[str, Path]

SWEEP_COLUMNS = ("freq_hz", "re", "im")
SURFACE_COLUMNS = ("phi_tune", "phi_sense", "f0_hz")
ASSIGNMENT_COLUMNS = (
    "device_id",
    "phi_tune",
    "phi_sense",
    "f0_hz",
    "linewidth_hz",
    "responsivity_lw",
    "f_residual_hz",
    "status",
)
SHOT_COLUMNS = ("tone_id", "rep", "i", "q", "truth", "decided")
BIT_COLUMNS = ("line_id", "cycle", "bit")
PSD_COLUMNS = ("freq_hz", "psd")
PLAN_COLUMNS = ("n_qubits", "n_cells", "n_res", "delta_f_hz", "qc_min", "qc_max", "qi_min", "n_wires")


def canonical_json(payload: Any) -> str:
    """Sorted-key, whitespace-free JSON."""
    return json.dumps(_plain(payload), sort_keys=True, separators=(",", ":"))


def config_hash(scenario: Any) -> str:
    """SHA-256 of a scenario's canonical JSON (output directory excluded)."""
    if hasattr(scenario, "model_dump"):
        scenario = scenario.model_dump(mode="json", exclude={"out_dir"})
    return hashlib.sha256(canonical_json(scenario).encode("utf-8")).hexdigest()


def meta_block(command: str, scenario_hash: Optional[str]) -> Dict[str, Any]:
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "config_sha256": scenario_hash,
    }


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None, tuples to lists."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write text to path through a temporary file in the same directory."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=str(target.parent), prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def _cell(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_csv(
    path: PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    command: str,
    scenario_hash: Optional[str] = None,
) -> Path:
    """Atomic CSV with the provenance header."""
    buffer = _io.StringIO()
    for key, value in meta_block(command, scenario_hash).items():
        buffer.write(f"# {key}: {value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def write_json(
    path: PathLike,
    payload: Dict[str, Any],
    command: str,
    scenario_hash: Optional[str] = None,
) -> Path:
    """Atomic JSON with a meta object."""
    document = {"meta": meta_block(command, scenario_hash), **_plain(payload)}
    return atomic_write_text(path, json.dumps(document, sort_keys=True, indent=2) + "\n")


def read_csv(path: PathLike) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """Header metadata and rows of a CSV written by write_csv."""
    meta: Dict[str, str] = {}
    body: List[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# Domain writers

def write_table(
    path: PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    command: str,
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    """Tabular output as CSV, or as JSON {"columns": [...], "rows": [[...], ...]}."""
    if OutputFormat(fmt) is OutputFormat.JSON:
        payload = {"columns": list(columns), "rows": [list(r) for r in rows]}
        return write_json(path, payload, command, scenario_hash)
    return write_csv(path, columns, rows, command, scenario_hash)


def write_sweep(
    path: PathLike,
    sweep: Sweep,
    command: str = "sweep",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    rows = zip(
        sweep.frequencies.tolist(),
        np.real(sweep.transmission).tolist(),
        np.imag(sweep.transmission).tolist(),
    )
    return write_table(path, SWEEP_COLUMNS, rows, command, scenario_hash, fmt)


def read_sweep(path: PathLike) -> Sweep:
    """Sweep from a CSV written by write_sweep."""
    _, rows = read_csv(path)
    freqs = np.array([float(r["freq_hz"]) for r in rows])
    values = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return Sweep(freqs, values)


def write_surface(
    path: PathLike,
    surface: FrequencySurface,
    command: str = "surface",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    return write_table(path, SURFACE_COLUMNS, surface.rows(), command, scenario_hash, fmt)


def assignment_rows(assignments: Sequence[BiasAssignment]) -> List[Tuple[Any, ...]]:
    rows = []
    for a in assignments:
        tune = a.bias.phi_tune if a.bias is not None else math.nan
        sense = a.bias.phi_sense if a.bias is not None else math.nan
        rows.append(
            (a.device_id, tune, sense, a.f0, a.linewidth, a.responsivity, a.f_residual, a.status.value)
        )
    return rows


def write_assignments(
    path: PathLike,
    assignments: Sequence[BiasAssignment],
    command: str = "calibrate",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    return write_table(
        path, ASSIGNMENT_COLUMNS, assignment_rows(assignments), command, scenario_hash, fmt
    )


def write_shots(
    path: PathLike,
    shots: ShotBatch,
    command: str = "fidelity",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    rows = zip(
        shots.tone_id.tolist(),
        shots.rep.tolist(),
        np.real(shots.iq).tolist(),
        np.imag(shots.iq).tolist(),
        shots.truth.tolist(),
        shots.decided.tolist(),
    )
    return write_table(path, SHOT_COLUMNS, rows, command, scenario_hash, fmt)


def write_bits(
    path: PathLike,
    streams: Dict[int, Sequence[Tuple[int, int]]],
    command: str = "shift-demo",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    rows = [
        (line_id, cycle, int(bit))
        for line_id in sorted(streams)
        for cycle, bit in streams[line_id]
    ]
    return write_table(path, BIT_COLUMNS, rows, command, scenario_hash, fmt)


def write_psd(
    path: PathLike,
    spectrum: Spectrum,
    command: str = "psd",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    rows = zip(spectrum.frequencies.tolist(), spectrum.density.tolist())
    return write_table(path, PSD_COLUMNS, rows, command, scenario_hash, fmt)


def write_plan(
    path: PathLike,
    rows: Sequence[ScalingRow],
    command: str = "plan",
    scenario_hash: Optional[str] = None,
    fmt: OutputFormat = OutputFormat.CSV,
) -> Path:
    table = [
        (r.n_qubits, r.n_cells, r.n_res, r.delta_f, r.qc_min, r.qc_max, r.qi_min, r.n_wires)
        for r in rows
    ]
    return write_table(path, PLAN_COLUMNS, table, command, scenario_hash, fmt)


def write_text(
    path: PathLike, lines: Sequence[str], command: str, scenario_hash: Optional[str] = None
) -> Path:
    """Plain-text report under the same comment header as the CSV files."""
    header = [f"# {key}: {value}" for key, value in meta_block(command, scenario_hash).items()]
    return atomic_write_text(path, "\n".join([*header, *lines]) + "\n")


def load_device(path: PathLike) -> ResonatorDesign:
    """Design from a device JSON document.

    Raises:
        ConfigError: If the file is missing or malformed
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"Device file not found: {p}", path=str(p))
    try:
        with open(p, encoding="utf-8") as f:
            document: DeviceDocument = json.load(f)
        return ResonatorDesign.from_document(document)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Device file {p} is malformed: {e}", path=str(p)) from e


def save_device(path: PathLike, design: ResonatorDesign) -> Path:
    return atomic_write_text(path, json.dumps(design.to_document(), sort_keys=True, indent=2) + "\n")
