"""QFP shift-register state machine.

Stages cycle through three clock phase groups (stage i is in group i % 3 + 1).
Applying phase p latches every operable group-p stage to the sign of its
latched upstream neighbour and then unlatches the upstream group, so data
advances one stage per phase. Lines are immutable values; every operation
returns a new line.

Copy stages sit at indices 1, 4, 7, ... and hold one qubit each. Bits that
leave the active end are appended to ``ShiftLine.output``.
"""

from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .exceptions import BrokenPath, LineCapacityExceeded, StageInoperable
from .logging import FastrLogger
from .planner import exact_isqrt
from .types import Direction, Orientation, StageState

logger = FastrLogger.get_logger("shift_register")

PHASES_PER_BIT = 3


@dataclass(frozen=True)
class QfpStage:
    """One QFP stage."""

    phase_group: int
    state: StageState = StageState.UNLATCHED
    operable: bool = True

    def __post_init__(self) -> None:
        if self.phase_group not in (1, 2, 3):
            raise ValueError(f"phase_group must be 1, 2 or 3, got {self.phase_group}")


@dataclass(frozen=True)
class ShiftLine:
    """An ordered chain of stages with its copy stages and data direction."""

    stages: Tuple[QfpStage, ...]
    copy_stages: Tuple[int, ...]
    direction: Direction = Direction.FORWARD
    output: Tuple[int, ...] = ()
    line_id: int = 0

    def __post_init__(self) -> None:
        for i, stage in enumerate(self.stages):
            if stage.phase_group != i % 3 + 1:
                raise ValueError(f"Stage {i} must be in phase group {i % 3 + 1}")
        for index in self.copy_stages:
            if not 0 <= index < len(self.stages):
                raise ValueError(f"Copy stage {index} outside the line")

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def capacity(self) -> int:
        return len(self.copy_stages)

    @property
    def breaks(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.stages) if not s.operable)

    def latched_indices(self) -> List[int]:
        return [i for i, s in enumerate(self.stages) if s.state.is_latched]

    def data_bits(self) -> List[int]:
        """Bits held in the line, in stage order."""
        return [_bit_of(s.state) for s in self.stages if s.state.is_latched]

    def with_direction(self, direction: Direction) -> "ShiftLine":
        return replace(self, direction=direction)


@dataclass(frozen=True)
class StreamResult:
    """Bits read at the detector end and the cycle each arrived in."""

    bits: Tuple[int, ...]
    cycles: Tuple[int, ...]
    line: ShiftLine


@dataclass(frozen=True)
class DetectorSite:
    """A detector at one end of a line; ``end`` is the direction data flows to it."""

    line_id: int
    end: Direction


@dataclass(frozen=True)
class ProcessorTopology:
    """Vertical and horizontal shift-register lines of a square processor."""

    n_cells: int
    lines: Tuple[ShiftLine, ...]
    orientations: Tuple[Orientation, ...]

    @property
    def detector_sites(self) -> Tuple[DetectorSite, ...]:
        return tuple(
            DetectorSite(line.line_id, end)
            for line in self.lines
            for end in (Direction.BACKWARD, Direction.FORWARD)
        )


@dataclass(frozen=True)
class ReadoutPlan:
    """One active detector per line."""

    active: Tuple[DetectorSite, ...]
    n_sites: int

    def direction_of(self, line_id: int) -> Direction:
        for site in self.active:
            if site.line_id == line_id:
                return site.end
        raise KeyError(line_id)


def _state_of(value: int) -> StageState:
    return StageState.LATCHED_PLUS if value > 0 else StageState.LATCHED_MINUS


def _bit_of(state: StageState) -> int:
    return 1 if state is StageState.LATCHED_PLUS else 0


def copy_stage_indices(n_stages: int) -> Tuple[int, ...]:
    """Copy-stage positions 1, 4, 7, ... (floor(n_stages / 3) of them)."""
    return tuple(3 * q + 1 for q in range(n_stages // 3))


def build_line(
    n_stages: int,
    direction: Direction = Direction.FORWARD,
    breaks: Iterable[int] = (),
    line_id: int = 0,
) -> ShiftLine:
    """Unlatched line of n_stages with the given broken stage indices."""
    if n_stages < 3:
        raise ValueError(f"A line needs at least 3 stages, got {n_stages}")
    broken = set(breaks)
    for index in broken:
        if not 0 <= index < n_stages:
            raise ValueError(f"Break at stage {index} outside a {n_stages}-stage line")
    stages = tuple(
        QfpStage(phase_group=i % 3 + 1, operable=i not in broken) for i in range(n_stages)
    )
    return ShiftLine(
        stages=stages,
        copy_stages=copy_stage_indices(n_stages),
        direction=direction,
        line_id=line_id,
    )


def latch_copy(line: ShiftLine, qubit_states: Sequence[int]) -> ShiftLine:
    """Latch copy stage i to the sign of qubit i.

    Args:
        line: Line whose copy stages are unlatched
        qubit_states: Classical qubit states; positive values latch plus, zero or
            negative values latch minus

    Returns:
        The line with its copy stages latched

    Raises:
        LineCapacityExceeded: If there are more qubits than copy stages
        StageInoperable: If a copy stage that must latch is broken
    """
    if len(qubit_states) > line.capacity:
        raise LineCapacityExceeded(
            f"{len(qubit_states)} qubits exceed line capacity {line.capacity}",
            n_bits=len(qubit_states),
            capacity=line.capacity,
        )
    stages = list(line.stages)
    for qubit, value in enumerate(qubit_states):
        index = line.copy_stages[qubit]
        stage = stages[index]
        if not stage.operable:
            raise StageInoperable(f"Copy stage {index} is inoperable", stage_index=index)
        if stage.state.is_latched:
            raise ValueError(f"Copy stage {index} is already latched")
        stages[index] = replace(stage, state=_state_of(value))
    return replace(line, stages=tuple(stages))


def load_pattern(line: ShiftLine, bits: Sequence[int]) -> ShiftLine:
    """Latch bits so bits[0] is the first delivered in the line's direction."""
    if any(b not in (0, 1) for b in bits):
        raise ValueError("Bit patterns may only contain 0 and 1")
    ordered = list(bits)
    if line.direction is Direction.FORWARD:
        ordered.reverse()
    return latch_copy(line, [1 if b else -1 for b in ordered])


def phase_order(direction: Direction) -> Tuple[int, int, int]:
    """Phase sequence that moves data in the given direction."""
    return (1, 2, 3) if direction is Direction.FORWARD else (3, 2, 1)


def clock_phase(line: ShiftLine, phase: int) -> ShiftLine:
    """Apply one clock phase.

    Every operable stage of the phase group copies its latched upstream
    neighbour; then the upstream group unlatches. Both passes read the
    pre-phase state. A bit unlatched at the active end is emitted to the
    line's output; one unlatched in front of a broken stage is lost.
    """
    if phase not in (1, 2, 3):
        raise ValueError(f"phase must be 1, 2 or 3, got {phase}")
    forward = line.direction is Direction.FORWARD
    step = 1 if forward else -1
    upstream_group = (phase - 2) % 3 + 1 if forward else phase % 3 + 1
    before = line.stages
    n = len(before)
    after = list(before)
    emitted: List[int] = []

    for i, stage in enumerate(before):
        if stage.phase_group == phase and stage.operable:
            j = i - step
            if 0 <= j < n and before[j].state.is_latched:
                after[i] = replace(stage, state=before[j].state)

    for i, stage in enumerate(before):
        if stage.phase_group == upstream_group and stage.operable and stage.state.is_latched:
            after[i] = replace(after[i], state=StageState.UNLATCHED)
            if not 0 <= i + step < n:
                emitted.append(_bit_of(stage.state))

    return replace(line, stages=tuple(after), output=line.output + tuple(emitted))


def spacing_ok(line: ShiftLine) -> bool:
    """True when latched stages are separated by at least two unlatched stages."""
    latched = line.latched_indices()
    return all(b - a >= 3 for a, b in zip(latched, latched[1:]))


def _blocking_break(line: ShiftLine) -> Optional[int]:
    latched = line.latched_indices()
    if not latched:
        return None
    if line.direction is Direction.FORWARD:
        blocking = [b for b in line.breaks if b > latched[0]]
        return min(blocking) if blocking else None
    blocking = [b for b in line.breaks if b < latched[-1]]
    return max(blocking) if blocking else None


def stream_out(line: ShiftLine, n_bits: int) -> StreamResult:
    """Clock n_bits out of the active end, one full phase cycle at a time.

    Args:
        line: Loaded line
        n_bits: Number of bits to read

    Returns:
        Bits in delivery order (nearest the active end first), the cycle each
        arrived in, and the final line

    Raises:
        BrokenPath: If an inoperable stage lies between the data and the end
    """
    if n_bits < 0:
        raise ValueError(f"n_bits must be non-negative, got {n_bits}")
    blocking = _blocking_break(line)
    if blocking is not None:
        raise BrokenPath(
            f"Stage {blocking} blocks line {line.line_id} toward the {line.direction.value} end",
            stage_index=blocking,
            direction=line.direction.value,
        )
    held = len(line.latched_indices())
    if n_bits > held:
        raise ValueError(f"Line {line.line_id} holds {held} bits, {n_bits} requested")

    start = len(line.output)
    bits: List[int] = []
    cycles: List[int] = []
    max_cycles = line.n_stages + n_bits + 1
    cycle = 0
    while len(bits) < n_bits and cycle < max_cycles:
        for phase in phase_order(line.direction):
            line = clock_phase(line, phase)
        new = line.output[start + len(bits) :]
        bits.extend(new)
        cycles.extend([cycle] * len(new))
        cycle += 1
    logger.debug(f"Line {line.line_id} delivered {len(bits)} bits in {cycle} cycles")
    return StreamResult(tuple(bits[:n_bits]), tuple(cycles[:n_bits]), line)


def throughput(filter_bandwidth_hz: float, phases_per_bit: int = PHASES_PER_BIT) -> float:
    """Line data rate in bits/s for a clock filter bandwidth."""
    if not filter_bandwidth_hz > 0:
        raise ValueError(f"filter_bandwidth_hz must be positive, got {filter_bandwidth_hz}")
    if phases_per_bit < 1:
        raise ValueError(f"phases_per_bit must be at least 1, got {phases_per_bit}")
    return filter_bandwidth_hz / phases_per_bit


def build_topology(
    n_cells: int,
    stages_per_line: int = 30,
    breaks: Iterable[Tuple[int, int]] = (),
) -> ProcessorTopology:
    """Processor with sqrt(n_cells) vertical and as many horizontal lines.

    Args:
        n_cells: Unit-cell count, a perfect square
        stages_per_line: Stages on every line
        breaks: (line, stage) pairs of broken stages

    Raises:
        NotPerfectSquare: If n_cells is not a perfect square
    """
    side = exact_isqrt(n_cells)
    by_line: Dict[int, List[int]] = {}
    for line_id, stage in breaks:
        if not 0 <= line_id < 2 * side:
            raise ValueError(f"Break on line {line_id}, processor has {2 * side} lines")
        by_line.setdefault(line_id, []).append(stage)
    lines = tuple(
        build_line(stages_per_line, breaks=by_line.get(k, ()), line_id=k)
        for k in range(2 * side)
    )
    orientations = tuple(
        Orientation.VERTICAL if k < side else Orientation.HORIZONTAL for k in range(2 * side)
    )
    return ProcessorTopology(n_cells=n_cells, lines=lines, orientations=orientations)


def reachable_copy_stages(line: ShiftLine, direction: Direction) -> int:
    """Copy stages with no break between them and the end data flows toward."""
    if direction is Direction.FORWARD:
        return sum(1 for c in line.copy_stages if all(b < c for b in line.breaks))
    return sum(1 for c in line.copy_stages if all(b > c for b in line.breaks))


def preferred_direction(line: ShiftLine, requested: Direction) -> Direction:
    """The requested direction unless a break leaves the other end better reachable."""
    if not line.breaks:
        return requested
    forward = reachable_copy_stages(line, Direction.FORWARD)
    backward = reachable_copy_stages(line, Direction.BACKWARD)
    if forward == backward:
        return requested
    return Direction.FORWARD if forward > backward else Direction.BACKWARD


def plan_readout(
    topology: ProcessorTopology,
    orientation: Optional[Orientation] = None,
    per_line_direction: Optional[Mapping[int, Direction]] = None,
) -> ReadoutPlan:
    """Choose one active detector per line.

    Args:
        topology: Processor topology
        orientation: Restrict the plan to one line family; None plans all lines
        per_line_direction: Requested direction per line id (default forward);
            a broken line is forced toward its better reachable end

    Returns:
        The plan; at most half of the detector sites are active
    """
    requested = per_line_direction or {}
    active = []
    for line, line_orientation in zip(topology.lines, topology.orientations):
        if orientation is not None and line_orientation is not orientation:
            continue
        wanted = requested.get(line.line_id, Direction.FORWARD)
        chosen = preferred_direction(line, wanted)
        if chosen is not wanted:
            logger.warning(
                f"Line {line.line_id} broken at {list(line.breaks)}; "
                f"reading out {chosen.value} instead of {wanted.value}"
            )
        active.append(DetectorSite(line.line_id, chosen))
    return ReadoutPlan(tuple(active), len(topology.detector_sites))
