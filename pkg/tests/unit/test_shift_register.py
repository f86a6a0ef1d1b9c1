"""Unit tests for the QFP shift-register state machine."""

import itertools
from unittest.mock import patch

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastr_readout import shift_register
from fastr_readout.exceptions import (
    BrokenPath,
    LineCapacityExceeded,
    NotPerfectSquare,
    StageInoperable,
)
from fastr_readout.shift_register import (
    QfpStage,
    ShiftLine,
    build_line,
    build_topology,
    clock_phase,
    latch_copy,
    load_pattern,
    phase_order,
    plan_readout,
    preferred_direction,
    spacing_ok,
    stream_out,
    throughput,
)
from fastr_readout.types import Direction, Orientation, StageState

pytestmark = pytest.mark.unit


def _with_bit_at(line: ShiftLine, index: int, state: StageState) -> ShiftLine:
    stages = list(line.stages)
    stages[index] = QfpStage(stages[index].phase_group, state)
    return ShiftLine(tuple(stages), line.copy_stages, line.direction)


def _run_cycle(line: ShiftLine) -> ShiftLine:
    for phase in phase_order(line.direction):
        line = clock_phase(line, phase)
    return line


class TestLineConstruction:
    """Test building lines and their copy stages."""

    def test_copy_stages(self):
        """Test copy stages sit at 1, 4, 7, ..."""
        line = build_line(30)
        assert line.copy_stages == tuple(range(1, 30, 3))
        assert line.capacity == 10
        assert all(s.state is StageState.UNLATCHED for s in line.stages)

    def test_breaks(self):
        """Test broken stages are reported."""
        assert build_line(12, breaks=[4, 9]).breaks == (4, 9)

    def test_break_outside_line(self):
        """Test a break beyond the line is rejected."""
        with pytest.raises(ValueError):
            build_line(12, breaks=[12])

    def test_phase_groups_enforced(self):
        """Test stage i must be in phase group i % 3 + 1."""
        with pytest.raises(ValueError):
            ShiftLine(stages=(QfpStage(2), QfpStage(2), QfpStage(3)), copy_stages=(1,))

    def test_invalid_phase_group(self):
        """Test a stage phase group must be 1, 2 or 3."""
        with pytest.raises(ValueError):
            QfpStage(phase_group=4)


class TestLatchCopy:
    """Test latching qubit states into copy stages."""

    def test_latch_signs(self):
        """Test positive states latch plus and others latch minus."""
        line = latch_copy(build_line(12), [1, -1])
        assert line.stages[1].state is StageState.LATCHED_PLUS
        assert line.stages[4].state is StageState.LATCHED_MINUS
        assert line.latched_indices() == [1, 4]
        assert line.data_bits() == [1, 0]

    def test_empty_pattern(self):
        """Test latching nothing leaves the line unchanged."""
        line = build_line(12)
        assert latch_copy(line, []) == line

    def test_capacity_exceeded(self):
        """Test more qubits than copy stages is rejected."""
        with pytest.raises(LineCapacityExceeded) as exc_info:
            latch_copy(build_line(12), [1] * 5)
        assert exc_info.value.capacity == 4
        assert exc_info.value.n_bits == 5

    def test_broken_copy_stage(self):
        """Test a broken copy stage cannot latch."""
        with pytest.raises(StageInoperable) as exc_info:
            latch_copy(build_line(12, breaks=[4]), [1, 1])
        assert exc_info.value.stage_index == 4

    def test_already_latched(self):
        """Test latching twice is rejected."""
        line = latch_copy(build_line(12), [1])
        with pytest.raises(ValueError):
            latch_copy(line, [1])

    def test_load_pattern_rejects_non_bits(self):
        """Test patterns may only hold 0 and 1."""
        with pytest.raises(ValueError):
            load_pattern(build_line(12), [1, 2])


class TestClockPhase:
    """Test single clock phases."""

    def test_phase_orders(self):
        """Test the phase sequence for each direction."""
        assert phase_order(Direction.FORWARD) == (1, 2, 3)
        assert phase_order(Direction.BACKWARD) == (3, 2, 1)

    @pytest.mark.parametrize(
        "state", [StageState.LATCHED_PLUS, StageState.LATCHED_MINUS]
    )
    def test_bit_advances_one_stage_per_phase(self, state):
        """Test a bit moves one stage per phase, three per cycle."""
        line = _with_bit_at(build_line(12), 2, state)
        for expected, phase in zip((3, 4, 5), (1, 2, 3)):
            line = clock_phase(line, phase)
            assert line.latched_indices() == [expected]
            assert line.stages[expected].state is state

    def test_copy_stage_bits_move_one_stage_in_first_cycle(self):
        """Test a freshly latched copy stage only reaches the next stage in one cycle."""
        line = _run_cycle(latch_copy(build_line(12), [1, -1, 1]))
        assert line.latched_indices() == [2, 5, 8]

    def test_unlatched_line_is_unchanged(self):
        """Test clocking an empty line changes nothing."""
        line = build_line(12)
        for phase in (1, 2, 3):
            assert clock_phase(line, phase) == line

    def test_invalid_phase(self):
        """Test phase must be 1, 2 or 3."""
        with pytest.raises(ValueError):
            clock_phase(build_line(12), 0)

    @pytest.mark.parametrize("pattern", list(itertools.product((1, -1), repeat=3)))
    def test_conservation_and_spacing(self, pattern):
        """Test no bit is lost or duplicated and bits stay spaced through every phase."""
        expected = [1 if v > 0 else 0 for v in pattern]
        line = latch_copy(build_line(12), list(pattern))
        for phase in [1, 2, 3] * 5:
            line = clock_phase(line, phase)
            assert spacing_ok(line)
            assert line.data_bits() + list(line.output[::-1]) == expected
        assert line.output == tuple(reversed(expected))


class TestStreamOut:
    """Test reading bits at the active end."""

    @pytest.mark.parametrize("bits", [[1, 0, 1], [1, 0, 0], [0, 0, 0], [1, 1, 1]])
    def test_forward_round_trip(self, bits):
        """Test a loaded pattern is delivered in order."""
        result = stream_out(load_pattern(build_line(12), bits), len(bits))
        assert list(result.bits) == bits

    def test_backward_round_trip(self):
        """Test the backward direction delivers a loaded pattern in order."""
        line = build_line(12, direction=Direction.BACKWARD)
        result = stream_out(load_pattern(line, [1, 0, 0]), 3)
        assert result.bits == (1, 0, 0)

    def test_backward_reverses_order(self):
        """Test the same latched qubits read in opposite orders from the two ends."""
        line = latch_copy(build_line(12), [1, -1, -1])
        assert stream_out(line, 3).bits == (0, 0, 1)
        assert stream_out(line.with_direction(Direction.BACKWARD), 3).bits == (1, 0, 0)

    def test_one_bit_per_cycle(self):
        """Test bits arrive on consecutive cycles."""
        result = stream_out(load_pattern(build_line(12), [1, 0, 1]), 3)
        assert result.cycles == (2, 3, 4)
        assert result.line.latched_indices() == []

    def test_break_blocks_forward(self):
        """Test a break downstream of the data raises BrokenPath."""
        line = load_pattern(build_line(12, breaks=[9]), [1, 0, 1])
        with pytest.raises(BrokenPath) as exc_info:
            stream_out(line, 3)
        assert exc_info.value.stage_index == 9
        assert exc_info.value.direction == "forward"

    def test_break_avoided_backward(self):
        """Test the other end still reads a line broken past the data."""
        line = latch_copy(build_line(12, breaks=[9]), [1, -1, 1])
        result = stream_out(line.with_direction(Direction.BACKWARD), 3)
        assert result.bits == (1, 0, 1)

    def test_more_bits_than_held(self):
        """Test asking for more bits than the line holds is rejected."""
        with pytest.raises(ValueError):
            stream_out(load_pattern(build_line(12), [1]), 2)

    @given(
        bits=st.lists(st.integers(min_value=0, max_value=1), max_size=10),
        direction=st.sampled_from(list(Direction)),
    )
    def test_round_trip_any_pattern(self, bits, direction):
        """Test every pattern up to capacity survives the line in either direction."""
        line = load_pattern(build_line(30, direction=direction), bits)
        assert list(stream_out(line, len(bits)).bits) == bits


ALL_PATTERNS = [
    list(bits) for n in range(9) for bits in itertools.product((0, 1), repeat=n)
]


class TestEveryShortPattern:
    """Test every pattern of up to 8 bits on a 30-stage line in both directions."""

    @pytest.mark.parametrize("direction", list(Direction))
    @pytest.mark.parametrize(
        "bits", ALL_PATTERNS, ids=lambda b: "".join(map(str, b)) or "empty"
    )
    def test_conservation_spacing_and_order(self, bits, direction):
        """Test each phase keeps every bit once and spaced, and delivery keeps order."""
        line = load_pattern(build_line(30, direction=direction), bits)
        latched = line.data_bits()
        for _ in range(3 * (line.n_stages + len(bits) + 1)):
            if not line.latched_indices():
                break
            for phase in phase_order(direction):
                line = clock_phase(line, phase)
                assert spacing_ok(line)
                if direction is Direction.FORWARD:
                    assert line.data_bits() + list(line.output[::-1]) == latched
                else:
                    assert list(line.output) + line.data_bits() == latched
        assert list(line.output) == bits


class TestThroughput:
    """Test line data rates."""

    def test_rates(self):
        """Test three phases per bit divide the filter bandwidth."""
        assert throughput(30e6) == 10e6
        assert throughput(15e6) == pytest.approx(5e6)
        assert throughput(10e6, phases_per_bit=2) == pytest.approx(5e6)

    def test_invalid(self):
        """Test nonpositive bandwidths and phase counts are rejected."""
        with pytest.raises(ValueError):
            throughput(0.0)
        with pytest.raises(ValueError):
            throughput(1e6, phases_per_bit=0)


class TestTopology:
    """Test processor topologies and readout plans."""

    @pytest.mark.parametrize("n_cells,n_sites", [(64, 32), (256, 64)])
    def test_half_of_sites_active(self, n_cells, n_sites):
        """Test one detector per line is active."""
        topology = build_topology(n_cells)
        plan = plan_readout(topology)
        assert len(topology.detector_sites) == n_sites
        assert plan.n_sites == n_sites
        assert len(plan.active) == n_sites // 2
        assert all(site.end is Direction.FORWARD for site in plan.active)

    @pytest.mark.parametrize(
        "breaks,expected",
        [((), Direction.FORWARD), ((28,), Direction.BACKWARD), ((15,), Direction.FORWARD)],
    )
    def test_preferred_direction(self, breaks, expected):
        """Test a break moves the line toward its end with more reachable copy stages."""
        line = build_line(30, breaks=breaks)
        assert preferred_direction(line, Direction.FORWARD) is expected

    def test_not_perfect_square(self):
        """Test the cell count must be a perfect square."""
        with pytest.raises(NotPerfectSquare):
            build_topology(50)

    def test_break_outside_processor(self):
        """Test a break on a missing line is rejected."""
        with pytest.raises(ValueError):
            build_topology(64, breaks=[(16, 3)])

    def test_broken_line_reads_backward(self):
        """Test a break near the forward end switches the line to backward."""
        topology = build_topology(64, breaks=[(0, 28)])
        with patch.object(shift_register.logger, "warning") as mock_warning:
            plan = plan_readout(topology)
        assert plan.direction_of(0) is Direction.BACKWARD
        assert plan.direction_of(1) is Direction.FORWARD
        mock_warning.assert_called_once()

    def test_orientation_filter(self):
        """Test restricting the plan to vertical lines."""
        topology = build_topology(64)
        plan = plan_readout(topology, Orientation.VERTICAL)
        assert len(plan.active) == 8
        assert {site.line_id for site in plan.active} == set(range(8))

    def test_requested_directions(self):
        """Test per-line direction requests are honoured on intact lines."""
        plan = plan_readout(build_topology(16), per_line_direction={2: Direction.BACKWARD})
        assert plan.direction_of(2) is Direction.BACKWARD
        with pytest.raises(KeyError):
            plan.direction_of(99)
