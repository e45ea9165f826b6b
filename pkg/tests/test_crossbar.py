import io
import json
import threading

import numpy as np
import pytest

from pimsim.crossbar import (
    ConfigurationError,
    CrossbarState,
    CycleInstruction,
    GateExecution,
    InitExecution,
    InitMode,
    Partitioning,
    SchedulingError,
    UndefinedCellError,
    make_cycle,
    merge_cycles,
)
from pimsim.gates import GateKind
from pimsim.schedule import Schedule

NOT, MIN3, NOR2 = GateKind.NOT, GateKind.MIN3, GateKind.NOR2


def cycle(state, *execs, conducting=(), phase=""):
    return CycleInstruction(state.layout.config(conducting), execs, phase)


def test_partitioning_geometry():
    p = Partitioning(12, [4, 8])
    assert p.count == 3
    assert [p.partition_of(c) for c in (0, 3, 4, 11)] == [0, 0, 1, 2]
    assert p.column(2, 1) == 9
    with pytest.raises(ConfigurationError):
        p.column(0, 4)
    with pytest.raises(ConfigurationError):
        Partitioning(8, [0])
    with pytest.raises(ConfigurationError):
        Partitioning(8, [5, 3])
    with pytest.raises(ConfigurationError):
        p.config([5])


def test_nor_scenario():
    # 1x3 crossbar, one partition: init c2 to 1 then NOR(c0, c1) -> c2
    s = CrossbarState(1, 3)
    s.write_cells([(0, 0, 0), (0, 1, 0)])
    s.apply_cycle(cycle(s, InitExecution((2,), 1)))
    s.apply_cycle(cycle(s, GateExecution(NOR2, (0, 1), 2)))
    assert s.read_cells([(0, 2)]) == [1]
    report = s.cost_report()
    assert (report.cycles, report.memristors_per_row, report.partitions) == (2, 3, 1)


def test_gate_result_is_and_with_old_value():
    s = CrossbarState(2, 3)
    s.write_column(0, [0, 0])
    s.write_column(2, [0, 1])
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2, init_mode=InitMode.NO_INIT)))
    assert list(s.read_column(2)) == [0, 1]


def test_parallel_gates_in_isolated_partitions():
    s = CrossbarState(1, 8, [4])
    s.write_cells([(0, 0, 1), (0, 4, 0)])
    s.apply_cycle(cycle(s, InitExecution((1, 5), 1)))
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 1), GateExecution(NOT, (4,), 5)))
    assert s.read_cells([(0, 1), (0, 5)]) == [0, 1]


def test_rule_a_gate_across_isolated_boundary():
    s = CrossbarState(1, 8, [4])
    s.write_cells([(0, 0, 1)])
    s.apply_cycle(cycle(s, InitExecution((5,), 1)))
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 5)))
    assert err.value.rule == "a"
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 5), conducting=[4]))
    assert s.read_cells([(0, 5)]) == [0]


def test_rule_a_config_keys_must_match():
    s = CrossbarState(1, 8, [4])
    bad = CycleInstruction(Partitioning(8, [2]).config(), ())
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(bad)
    assert err.value.rule == "a"


def test_rule_b_two_gates_share_segment():
    s = CrossbarState(1, 8, [4])
    s.write_cells([(0, 0, 1), (0, 4, 1)])
    s.apply_cycle(cycle(s, InitExecution((1, 5), 1)))
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 1), GateExecution(NOT, (4,), 5), conducting=[4]))
    assert err.value.rule == "b"


def test_disjoint_row_masks_may_share_a_segment():
    s = CrossbarState(2, 4)
    s.write_column(0, [1, 0])
    s.apply_cycle(cycle(s, InitExecution((1, 2), 1)))
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 1, rows={0}), GateExecution(NOT, (0,), 2, rows={1})))
    assert s.read_cells([(0, 1), (1, 2)]) == [0, 1]


def test_rule_c_arity_and_rows():
    s = CrossbarState(1, 4)
    s.write_cells([(0, 0, 1), (0, 1, 1)])
    s.apply_cycle(cycle(s, InitExecution((2,), 1)))
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, GateExecution(MIN3, (0, 1), 2)))
    assert err.value.rule == "c"
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2, rows={3})))
    assert err.value.rule == "c"
    with pytest.raises(SchedulingError):
        s.apply_cycle(cycle(s, GateExecution(NOR2, (0, 0), 2)))


def test_rule_d_two_inits_share_segment():
    s = CrossbarState(1, 4)
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, InitExecution((0,), 1), InitExecution((1,), 0)))
    assert err.value.rule == "d"
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, InitExecution((0, 0), 1)))
    assert err.value.rule == "d"


def test_rule_e_output_needs_fresh_init():
    s = CrossbarState(1, 3)
    s.write_cells([(0, 0, 0), (0, 2, 1)])
    # written, not initialized: a standard gate may not target it
    with pytest.raises(SchedulingError) as err:
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2)))
    assert err.value.rule == "e"
    s.apply_cycle(cycle(s, InitExecution((2,), 0)))
    with pytest.raises(SchedulingError):
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2)))
    s.apply_cycle(cycle(s, InitExecution((2,), 1)))
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2)))
    # the init is consumed by the gate
    with pytest.raises(SchedulingError):
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2)))


def test_undefined_reads_are_errors():
    s = CrossbarState(1, 3)
    s.apply_cycle(cycle(s, InitExecution((2,), 1)))
    with pytest.raises(UndefinedCellError):
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 2)))
    with pytest.raises(UndefinedCellError):
        s.read_cells([(0, 1)])
    with pytest.raises(IndexError):
        s.read_cells([(0, 9)])


def test_failed_cycle_changes_nothing():
    s = CrossbarState(1, 4)
    s.write_cells([(0, 0, 1)])
    before = s.cells.copy()
    with pytest.raises(SchedulingError):
        s.apply_cycle(cycle(s, InitExecution((1,), 1), InitExecution((2,), 1)))
    assert (s.cells == before).all()
    assert s.cost_report().cycles == 0


def test_make_cycle_conducts_only_spanned_boundaries():
    p = Partitioning(12, [4, 8])
    instr = make_cycle(p, [GateExecution(NOT, (1,), 6)])
    assert instr.config.conducting == {4: True, 8: False}
    merged = merge_cycles(p, [instr, make_cycle(p, [GateExecution(NOT, (9,), 10)], "x")])
    assert len(merged.executions) == 2
    assert merged.phase == "x"


def test_cost_report_counts_distinct_columns_and_phases():
    s = CrossbarState(3, 6)
    s.write_column(0, [1, 0, 1])
    s.apply_cycle(cycle(s, InitExecution((1, 2), 1), phase="init"))
    s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 1), phase="work"))
    r = s.cost_report()
    assert r.memristors_per_row == 3
    assert r.phase_breakdown == {"init": 1, "work": 1}


def test_trace_records_and_roundtrip():
    p = Partitioning(8, [4])
    sched = Schedule(
        [
            make_cycle(p, [InitExecution((1, 5), 1, rows={0, 1})], "init"),
            make_cycle(p, [GateExecution(NOT, (0,), 5, rows={0, 1})], "hop"),
        ]
    )
    fh = io.StringIO()
    s = CrossbarState(2, 8, [4])
    s.trace = fh
    s.write_column(0, [1, 0])
    s.run(sched)
    lines = fh.getvalue().splitlines()
    assert len(lines) == 2
    rec = json.loads(lines[1])
    assert set(rec) >= {"cycle", "config", "executions"}
    assert rec["cycle"] == 1
    assert rec["config"] == {"4": "conducting"}
    assert rec["executions"][0] == {"kind": "NOT", "inputs": [0], "output": 5, "rows": [0, 1], "init_mode": "standard"}
    again = Schedule.load(io.StringIO(fh.getvalue()))
    assert again.instructions == sched.instructions


def test_instances_share_nothing_across_threads():
    results = {}

    def work(bit):
        s = CrossbarState(1, 2)
        s.write_cells([(0, 0, bit)])
        s.apply_cycle(cycle(s, InitExecution((1,), 1)))
        s.apply_cycle(cycle(s, GateExecution(NOT, (0,), 1)))
        results[bit] = s.read_cells([(0, 1)])[0]

    threads = [threading.Thread(target=work, args=(b,)) for b in (0, 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {0: 1, 1: 0}


def test_bad_geometry():
    with pytest.raises(ConfigurationError):
        CrossbarState(0, 4)
    with pytest.raises(ConfigurationError):
        CrossbarState(1, 0)
    assert np.all(CrossbarState(2, 2).cells == 0)
