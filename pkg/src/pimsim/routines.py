"""Moving one bit across consecutive partitions: broadcast and neighbour shift."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .crossbar import GateExecution, Partitioning, make_cycle
from .gates import GateKind


class Polarity(enum.Enum):
    TRUE_VALUE = "true_value"
    COMPLEMENTED = "complemented"


@dataclass(frozen=True)
class PartitionSpan:
    first: int
    count: int
    cell_offset: int = 0

    def partitions(self) -> range:
        return range(self.first, self.first + self.count)

    def check(self, layout: Partitioning) -> None:
        if self.count < 1 or self.first < 0 or self.first + self.count > layout.count:
            raise ValueError(f"span {self} exceeds the crossbar's {layout.count} partitions")


def split_rounds(count: int) -> list:
    """Hops of the recursive-halving tree over positions 0..count-1.

    Each round splits every range [lo, hi) of size > 1 at lo + ceil(size/2)
    and sends lo -> mid. Ranges within a round are disjoint, so the hops of a
    round never share partitions. Produces ceil(log2 count) rounds.
    """
    ranges = [(0, count)]
    rounds = []
    while any(hi - lo > 1 for lo, hi in ranges):
        hops, nxt = [], []
        for lo, hi in ranges:
            if hi - lo > 1:
                mid = lo + (hi - lo + 1) // 2
                hops.append((lo, mid))
                nxt += [(lo, mid), (mid, hi)]
            else:
                nxt.append((lo, hi))
        rounds.append(hops)
        ranges = nxt
    return rounds


def hop_depths(count: int) -> list:
    """Number of hops on the tree path from position 0 to each position."""
    depth = [0] * count
    for hops in split_rounds(count):
        for src, dst in hops:
            depth[dst] = depth[src] + 1
    return depth


def tree_polarities(count: int, gate: GateKind) -> list:
    if gate is GateKind.COPY:
        return [Polarity.TRUE_VALUE] * count
    return [Polarity.COMPLEMENTED if d % 2 else Polarity.TRUE_VALUE for d in hop_depths(count)]


def broadcast_cells(layout: Partitioning, columns: Sequence[int], gate: GateKind, phase="", rows=None):
    """Broadcast from ``columns[0]`` to every other column along the split tree.

    ``columns`` must be ordered by partition, so that the hops of one round
    touch disjoint partition ranges. Destination cells must be initialized
    by the caller.
    """
    return [
        make_cycle(
            layout,
            [GateExecution(gate, (columns[s],), columns[d], rows) for s, d in hops],
            phase,
        )
        for hops in split_rounds(len(columns))
    ]


def _span_columns(layout, span):
    span.check(layout)
    return [layout.column(p, span.cell_offset) for p in span.partitions()]


def broadcast_log(layout: Partitioning, span: PartitionSpan, gate: GateKind = GateKind.COPY, rows=None):
    """ceil(log2 k) cycles; returns (cycles, {partition: Polarity})."""
    cycles = broadcast_cells(layout, _span_columns(layout, span), gate, "broadcast", rows)
    pol = dict(zip(span.partitions(), tree_polarities(span.count, gate)))
    return cycles, pol


def broadcast_naive(layout: Partitioning, span: PartitionSpan, gate: GateKind = GateKind.COPY, rows=None):
    """k-1 cycles, every partition fed straight from the source."""
    cols = _span_columns(layout, span)
    cycles = [
        make_cycle(layout, [GateExecution(gate, (cols[0],), c, rows)], "broadcast")
        for c in cols[1:]
    ]
    flip = Polarity.TRUE_VALUE if gate is GateKind.COPY else Polarity.COMPLEMENTED
    pol = {p: (Polarity.TRUE_VALUE if i == 0 else flip) for i, p in enumerate(span.partitions())}
    return cycles, pol


def _hops(layout, span, gate, input_offsets, output_offset, rows):
    span.check(layout)
    if span.count < 2:
        raise ValueError("shifting needs at least two partitions")
    if input_offsets is None:
        input_offsets = (span.cell_offset,)
    parts = list(span.partitions())
    hops = []
    for i, (src, dst) in enumerate(zip(parts, parts[1:]), start=1):
        offs = input_offsets[src] if isinstance(input_offsets, dict) else input_offsets
        ins = tuple(layout.column(src, o) for o in offs)
        hops.append((i, GateExecution(gate, ins, layout.column(dst, output_offset), rows)))
    return hops


def shift_parallel(
    layout: Partitioning,
    span: PartitionSpan,
    output_offset: int,
    gate: GateKind = GateKind.COPY,
    input_offsets=None,
    rows=None,
):
    """Partition i+1 receives gate(inputs of partition i) for every hop.

    Hops leaving odd span positions go first, then those leaving even ones,
    so 2 cycles (1 when k=2). ``input_offsets`` is one offset tuple for all
    partitions or a {partition: offsets} map; it defaults to the span's cell.
    """
    hops = _hops(layout, span, gate, input_offsets, output_offset, rows)
    out = []
    for parity in (1, 0):
        execs = [ex for i, ex in hops if i % 2 == parity]
        if execs:
            out.append(make_cycle(layout, execs, "shift"))
    return out


def shift_naive(
    layout: Partitioning,
    span: PartitionSpan,
    output_offset: int,
    gate: GateKind = GateKind.COPY,
    input_offsets=None,
    rows=None,
):
    """Same result as shift_parallel, one hop per cycle (k-1 cycles)."""
    hops = _hops(layout, span, gate, input_offsets, output_offset, rows)
    return [make_cycle(layout, [ex], "shift") for _, ex in hops]
