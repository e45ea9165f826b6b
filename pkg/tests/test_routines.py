import math

import pytest

from pimsim.crossbar import CrossbarState, InitExecution, Partitioning, make_cycle
from pimsim.gates import GateKind
from pimsim.routines import (
    PartitionSpan,
    Polarity,
    broadcast_log,
    broadcast_naive,
    hop_depths,
    shift_naive,
    shift_parallel,
    split_rounds,
)

WIDTH = 2


def crossbar(k, rows=2):
    bounds = [WIDTH * i for i in range(1, k)]
    return Partitioning(WIDTH * k, bounds), CrossbarState(rows, WIDTH * k, bounds)


def init_cells(layout, state, offset, value=1):
    # one init per partition, all in one cycle since partitions are isolated
    execs = [InitExecution((layout.column(p, offset),), value) for p in range(layout.count)]
    state.apply_cycle(make_cycle(layout, execs))


@pytest.mark.parametrize("count", range(1, 40))
def test_split_rounds_reach_everyone_in_ceil_log2(count):
    rounds = split_rounds(count)
    assert len(rounds) == (math.ceil(math.log2(count)) if count > 1 else 0)
    reached = {0}
    for hops in rounds:
        srcs = [s for s, _ in hops]
        assert set(srcs) <= reached
        spans = sorted((min(s, d), max(s, d)) for s, d in hops)
        assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))
        reached |= {d for _, d in hops}
    assert reached == set(range(count))
    assert max(hop_depths(count)) <= len(rounds)


@pytest.mark.parametrize("k", range(2, 33))
@pytest.mark.parametrize("gate", [GateKind.COPY, GateKind.NOT])
def test_broadcast_log(k, gate):
    layout, state = crossbar(k)
    state.write_column(0, [0, 1])
    for p in range(1, k):
        state.write_column(layout.column(p, 0), [0, 0])
    for p in range(1, k):
        state.apply_cycle(make_cycle(layout, [InitExecution((layout.column(p, 0),), 1)]))
    cycles, polarity = broadcast_log(layout, PartitionSpan(0, k), gate)
    assert len(cycles) == math.ceil(math.log2(k))
    start = state.cost_report().cycles
    state.run(cycles)
    assert state.cost_report().cycles - start == len(cycles)
    for p in range(k):
        got = list(state.read_column(layout.column(p, 0)))
        want = [0, 1] if polarity[p] is Polarity.TRUE_VALUE else [1, 0]
        assert got == want


@pytest.mark.parametrize("k", [2, 5, 8])
def test_broadcast_naive_takes_k_minus_1(k):
    layout, state = crossbar(k)
    state.write_column(0, [1, 0])
    for p in range(1, k):
        state.apply_cycle(make_cycle(layout, [InitExecution((layout.column(p, 0),), 1)]))
    cycles, polarity = broadcast_naive(layout, PartitionSpan(0, k))
    assert len(cycles) == k - 1
    state.run(cycles)
    assert all(list(state.read_column(layout.column(p, 0))) == [1, 0] for p in range(k))
    assert set(polarity.values()) == {Polarity.TRUE_VALUE}


@pytest.mark.parametrize("k", range(2, 33))
@pytest.mark.parametrize("gate", [GateKind.COPY, GateKind.NOT])
def test_shift_parallel(k, gate):
    layout, state = crossbar(k)
    values = [[(p >> r) & 1 for r in range(2)] for p in range(k)]
    for p in range(k):
        state.write_column(layout.column(p, 0), values[p])
    init_cells(layout, state, 1)
    cycles = shift_parallel(layout, PartitionSpan(0, k), 1, gate)
    assert len(cycles) == (1 if k == 2 else 2)
    state.run(cycles)
    for p in range(1, k):
        got = list(state.read_column(layout.column(p, 1)))
        want = values[p - 1] if gate is GateKind.COPY else [1 - v for v in values[p - 1]]
        assert got == want


@pytest.mark.parametrize("k", [2, 3, 9])
def test_shift_naive_matches_parallel(k):
    results = []
    for fn in (shift_parallel, shift_naive):
        layout, state = crossbar(k)
        for p in range(k):
            state.write_column(layout.column(p, 0), [p % 2, 1 - p % 2])
        init_cells(layout, state, 1)
        cycles = fn(layout, PartitionSpan(0, k), 1, GateKind.NOT)
        state.run(cycles)
        results.append([list(state.read_column(layout.column(p, 1))) for p in range(1, k)])
    assert results[0] == results[1]
    assert len(shift_naive(layout, PartitionSpan(0, k), 1)) == k - 1


def test_span_checks():
    layout, _ = crossbar(4)
    with pytest.raises(ValueError):
        shift_parallel(layout, PartitionSpan(0, 1), 1)
    with pytest.raises(ValueError):
        shift_parallel(layout, PartitionSpan(2, 3), 1)
