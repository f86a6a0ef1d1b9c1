"""Command-line front end: seeded experiments that write CSV/JSON artifacts."""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .calibration import (
    CalibrationSettings,
    Tolerances,
    build_array,
    homogenize_array,
    sample_surface,
)
from .config import ConfigLoader, Scenario
from .exceptions import BrokenPath, ConfigError, FastrError
from .io import (
    config_hash,
    write_assignments,
    write_bits,
    write_json,
    write_plan,
    write_psd,
    write_shots,
    write_surface,
    write_text,
)
from .logging import FastrLogger
from .metrology import (
    TransitionCurve,
    fit_noise,
    one_over_f_generator,
    psd,
    simulate_noise_run,
    white_floor,
)
from .planner import (
    format_table,
    frequency_grid,
    reachability_margin,
    scaling_table,
    wire_comparison,
)
from .readout import (
    NoiseModel,
    ReadoutSystem,
    end_to_end_fidelity,
    integration_time_for_bandwidth,
    modulation_factor,
    operable_region,
    pg_for_snr,
)
from .resonator import operating_point, self_consistent_profile, zero_flux_frequency
from .shift_register import (
    build_line,
    build_topology,
    load_pattern,
    plan_readout,
    stream_out,
    throughput,
)
from .types import Experiment, OutputFormat

logger = FastrLogger.get_logger("cli")

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2


class RunContext:
    """What every command needs: the scenario, where to write and how."""

    def __init__(self, scenario: Scenario, out_dir: Path, fmt: OutputFormat, command: str):
        self.scenario = scenario
        self.out_dir = out_dir
        self.fmt = fmt
        self.command = command
        self.scenario_hash = config_hash(scenario)

    def path(self, name: str, suffix: Optional[str] = None) -> Path:
        return self.out_dir / f"{name}.{suffix or self.fmt.value}"


def cmd_surface(ctx: RunContext) -> List[Path]:
    """Frequency surface of the device template over both bias fluxes."""
    surface = sample_surface(ctx.scenario.design(), ctx.scenario.calibration.n_per_axis)
    return [write_surface(ctx.path("surface"), surface, ctx.command, ctx.scenario_hash, ctx.fmt)]


def cmd_calibrate(ctx: RunContext) -> List[Path]:
    """Build a scattered array, bias every device onto its slot and report."""
    s = ctx.scenario
    cal = s.calibration
    settings = CalibrationSettings(
        signal_flux=cal.signal_flux,
        qi=cal.qi,
        max_flux=cal.max_flux,
        tolerances=Tolerances(cal.f_tolerance_linewidths, cal.r_tolerance),
        min_spacing_linewidths=cal.min_spacing_linewidths,
    )
    slots = frequency_grid(s.array_size, s.readout.band_center_hz, s.readout.band_width_hz)
    devices = build_array(
        s.design(),
        slots,
        s.scatter.spread,
        s.scatter.distribution,
        s.scatter.seed,
        cal.margin_linewidths,
        cal.qi,
    )
    result = homogenize_array(devices, slots, cal.r_target, settings)

    by_id = {d.device_id: d for d in devices}
    f00 = [zero_flux_frequency(by_id[a.device_id].design) for a in result.assignments]
    targets = [a.f_target for a in result.assignments]
    linewidths = [
        t * (1.0 / cal.qi + 1.0 / by_id[a.device_id].design.qc)
        for t, a in zip(targets, result.assignments)
    ]
    margins = reachability_margin(targets, f00, linewidths)
    summary = {
        **result.summary,
        "min_reachability_margin_linewidths": float(margins.min()),
        "f_tolerance_linewidths": cal.f_tolerance_linewidths,
        "r_tolerance_fraction": cal.r_tolerance,
        "r_target": cal.r_target,
    }
    return [
        write_assignments(
            ctx.path("assignments"),
            result.assignments,
            ctx.command,
            ctx.scenario_hash,
            ctx.fmt,
        ),
        write_json(
            ctx.path("calibration_summary", "json"), summary, ctx.command, ctx.scenario_hash
        ),
    ]


def cmd_fidelity(ctx: RunContext) -> List[Path]:
    """End-to-end readout of a streamed pattern with a BER report and shot dump."""
    s = ctx.scenario
    fid, ro = s.fidelity, s.readout
    design = s.design()
    device = self_consistent_profile(design, operating_point(design))
    if fid.n_tones == 1:
        profiles = (device.profile,)
    else:
        grid = frequency_grid(fid.n_tones, ro.band_center_hz, ro.band_width_hz)
        profiles = tuple(device.profile.shifted(float(f)) for f in grid)

    lines = tuple(build_line(s.topology.stages_per_line, line_id=k) for k in range(len(profiles)))
    if len(fid.data_pattern) > lines[0].capacity:
        raise ConfigError(
            f"data_pattern has {len(fid.data_pattern)} bits, lines hold {lines[0].capacity}",
            validation_errors={"fidelity.data_pattern": "exceeds line capacity"},
        )
    tau = ro.integration_s or integration_time_for_bandwidth(ro.detection_bandwidth_hz)
    system = ReadoutSystem(
        lines=lines,
        profiles=profiles,
        noise=NoiseModel(ro.tn_k, ro.detection_bandwidth_hz, ro.seed),
        band_center=ro.band_center_hz,
        band_width=ro.band_width_hz,
        lo_offset=ro.lo_offset_hz,
        modulation=fid.modulation,
        integration_time=tau,
        calibration_shots=fid.calibration_shots,
    )
    if fid.forced_snr is not None:
        ratio = profiles[0].qr / profiles[0].qc
        target = fid.forced_snr / modulation_factor(fid.modulation)
        pg_dbm = pg_for_snr(target, ro.tn_k, 1.0 / (2.0 * tau), ratio)
    else:
        pg_dbm = ro.pg_dbm

    report = end_to_end_fidelity(system, fid.data_pattern, fid.n_repeats, pg_dbm, fid.confidence)
    region = operable_region(
        device, device.profile, ro.snr_min, ro.a_max, ro.tn_k, ro.detection_bandwidth_hz
    )
    payload = {
        "n_shots": report.n_shots,
        "n_errors": report.n_errors,
        "ber": report.ber,
        "interval": list(report.interval),
        "confidence": report.confidence,
        "predicted_snr": list(report.predicted_snr),
        "predicted_ber": report.predicted_ber,
        "consistent": report.consistent,
        "pg_dbm": report.pg_dbm,
        "integration_s": tau,
        "tones_hz": [p.f0 for p in profiles],
        "operable_region_dbm": {
            "pg_low": region.pg_low,
            "pg_high": region.pg_high,
            "empty": region.empty,
        },
        "kappa": device.kappa,
        "qi": device.profile.qi,
        "qr": device.profile.qr,
    }
    return [
        write_json(ctx.path("fidelity_report", "json"), payload, ctx.command, ctx.scenario_hash),
        write_shots(ctx.path("shots"), report.shots, ctx.command, ctx.scenario_hash, ctx.fmt),
    ]


def cmd_psd(ctx: RunContext) -> List[Path]:
    """Simulated flux-noise run, its spectrum and the 1/f plus white fit."""
    m = ctx.scenario.metrology
    curve = TransitionCurve(width=m.width_phi0, center=m.center_phi0)
    generator = one_over_f_generator(m.one_over_f_amplitude) if m.one_over_f_amplitude > 0 else None
    series = simulate_noise_run(
        curve, generator, m.shots_per_sample, m.n_samples, m.tau_s, seed=m.seed, mode=m.mode
    )
    spectrum = psd(series, m.tau_s)
    fit = fit_noise(spectrum)
    payload = {
        "amplitude_phi0_per_rthz": fit.amplitude,
        "amplitude_stderr": fit.amplitude_stderr,
        "alpha": fit.alpha,
        "white_floor_phi0sq_per_hz": fit.white_floor,
        "white_floor_expected": white_floor(m.width_phi0, m.tau_s, m.shots_per_sample),
        "tau_s": fit.tau_s,
        "residual": fit.residual,
        "n_averages": spectrum.n_averages,
    }
    return [
        write_psd(ctx.path("psd"), spectrum, ctx.command, ctx.scenario_hash, ctx.fmt),
        write_json(ctx.path("noise_fit", "json"), payload, ctx.command, ctx.scenario_hash),
    ]


def cmd_plan(ctx: RunContext) -> List[Path]:
    """Scaling table for the configured processor sizes, as data and text."""
    s = ctx.scenario
    rows = scaling_table(s.plan.n_cells, s.readout.band_center_hz, s.readout.band_width_hz)
    display = format_table(rows)
    text = [
        f"{'N_qubits':>9} {'n_cells':>8} {'n_res':>6} {'df (MHz)':>9} {'Qc':>10} {'Qi':>8} {'N':>3}"
    ]
    for row, shown in zip(rows, display):
        text.append(
            f"{row.n_qubits:>9} {row.n_cells:>8} {row.n_res:>6} {row.delta_f / 1e6:>9.1f} "
            f"{'~' + shown['qc_range']:>10} {'>' + str(shown['qi_min']):>8} {row.n_wires:>3}"
        )
    wires = [wire_comparison(r.n_res) for r in rows]
    text.append("")
    text.extend(
        f"n_res={r.n_res}: {w['per_device']} per-device lines vs {w['dac_addressed']} DAC-addressed"
        for r, w in zip(rows, wires)
    )
    return [
        write_plan(ctx.path("plan"), rows, ctx.command, ctx.scenario_hash, ctx.fmt),
        write_text(ctx.path("plan", "txt"), text, ctx.command, ctx.scenario_hash),
    ]


def cmd_shift_demo(ctx: RunContext) -> List[Path]:
    """Load the pattern into every processor line, stream it out and report broken lines."""
    s = ctx.scenario
    topo = s.topology
    breaks = [(b.line, b.stage) for b in topo.breaks]
    topology = build_topology(topo.n_cells, topo.stages_per_line, breaks)
    plan = plan_readout(topology)
    pattern = list(s.fidelity.data_pattern)

    streams: Dict[int, Sequence[Tuple[int, int]]] = {}
    broken: List[Dict[str, object]] = []
    mismatched: List[int] = []
    for line in topology.lines:
        oriented = line.with_direction(plan.direction_of(line.line_id))
        bits = pattern[: oriented.capacity]
        try:
            result = stream_out(load_pattern(oriented, bits), len(bits))
        except BrokenPath as e:
            logger.warning(f"Line {line.line_id}: {e.message}")
            broken.append(
                {"line_id": line.line_id, "stage": e.stage_index, "direction": e.direction}
            )
            continue
        streams[line.line_id] = list(zip(result.cycles, result.bits))
        if list(result.bits) != bits:
            mismatched.append(line.line_id)

    payload = {
        "n_lines": len(topology.lines),
        "n_detector_sites": plan.n_sites,
        "directions": {str(site.line_id): site.end.value for site in plan.active},
        "broken_lines": broken,
        "mismatched_lines": mismatched,
        "throughput_bps": throughput(topo.filter_bandwidth_hz),
    }
    return [
        write_bits(ctx.path("bits"), streams, ctx.command, ctx.scenario_hash, ctx.fmt),
        write_json(ctx.path("shift_demo", "json"), payload, ctx.command, ctx.scenario_hash),
    ]


COMMANDS: Dict[Experiment, Callable[[RunContext], List[Path]]] = {
    Experiment.SURFACE: cmd_surface,
    Experiment.CALIBRATE: cmd_calibrate,
    Experiment.FIDELITY: cmd_fidelity,
    Experiment.PSD: cmd_psd,
    Experiment.PLAN: cmd_plan,
    Experiment.SHIFT_DEMO: cmd_shift_demo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--out", help="output directory (default: $FASTR_OUT_DIR or ./fastr-out)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.CSV.value,
        help="tabular output format",
    )
    common.add_argument("--profile", help="scenario profile inside the config file")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="logging level",
    )

    parser = argparse.ArgumentParser(
        prog="fastr", description="FASTR microresonator array simulation and calibration"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for experiment, handler in COMMANDS.items():
        sub.add_parser(experiment.value, parents=[common], help=(handler.__doc__ or "").strip())
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one experiment and return the process exit code."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        FastrLogger.set_level_from_string(args.log_level)

    experiment = Experiment(args.command)
    try:
        loader = ConfigLoader(args.config)
        scenario = loader.load_scenario(args.profile, args.seed, experiment)
        ctx = RunContext(
            scenario,
            loader.resolve_out_dir(scenario, args.out),
            OutputFormat(args.format),
            experiment.value,
        )
        logger.info(f"Running {experiment.value} (seed {scenario.seed}) into {ctx.out_dir}")
        written = COMMANDS[experiment](ctx)
    except ConfigError as e:
        logger.error(f"Configuration error: {e.message}")
        return EXIT_CONFIG_ERROR
    except (FastrError, ValueError, OSError, ArithmeticError) as e:
        logger.error(f"{experiment.value} failed: {e}")
        return EXIT_RUNTIME_ERROR

    for path in written:
        logger.info(f"Wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
