"""Carry-save add-shift multiplier schedules on a partitioned crossbar row.

Unit p_j (j = 1..na) holds a_{na-j} complemented and runs one full adder per
stage. Stage k (k < nb) broadcasts b_k to all units, forms the partial
products, adds them into the carry-save pair (s, c) and shifts every sum one
unit down; the bottom unit emits product bit k. The remaining na stages add
zero partial products to flush the carries out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crossbar import (
    CrossbarState,
    GateExecution,
    InitExecution,
    InitMode,
    Partitioning,
    make_cycle,
)
from .gates import GateKind, check_profile
from .routines import Polarity, broadcast_cells, tree_polarities
from .schedule import Schedule

NOT, MIN3 = GateKind.NOT, GateKind.MIN3
NO_INIT = InitMode.NO_INIT

VARIANTS = ("standard", "area")


@dataclass(frozen=True)
class MultiplierConfig:
    n: int = 8
    variant: str = "standard"
    n_a: int | None = None
    n_b: int | None = None
    profile: str = "not_min3"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.na < 2 or self.nb < 2:
            raise ValueError("operand widths must be at least 2")

    @property
    def na(self) -> int:
        return self.n if self.n_a is None else self.n_a

    @property
    def nb(self) -> int:
        return self.n if self.n_b is None else self.n_b


@dataclass
class PartitionRowLayout:
    """Where every operand, unit cell and output bit lives in the row."""

    variant: str
    na: int
    nb: int
    partition_sizes: list
    a_in: list
    b_in: list
    out: list
    units: list  # per unit, role -> column; index 0 is p_1
    polarity: list  # per unit, Polarity of its broadcast copy of b
    stage_end: list = field(default_factory=list)  # cycle index after each first-phase stage

    @property
    def width(self) -> int:
        return sum(self.partition_sizes)

    @property
    def partitions(self) -> int:
        return len(self.partition_sizes)

    def boundaries(self) -> list:
        return list(np.cumsum(self.partition_sizes)[:-1].tolist())

    def partitioning(self) -> Partitioning:
        return Partitioning(self.width, self.boundaries())

    def carry_save_columns(self, stages_done: int):
        """(weight, s column, c column) of every unit after ``stages_done`` stages."""
        out = []
        for j, u in enumerate(self.units, start=1):
            if self.variant == "standard":
                if j == 1:
                    continue
                t = "x" if stages_done % 2 == 0 else "y"
                out.append((self.na - j, u[t + "s"], u[t + "c"]))
            else:
                out.append((self.na - j, u["S"], u["C"]))
        return out


class _Rows:
    """Sequential column allocator that records partition sizes."""

    def __init__(self):
        self.next = 0
        self.sizes = []
        self._start = 0

    def take(self, k=1):
        cols = list(range(self.next, self.next + k))
        self.next += k
        return cols

    def cut(self):
        self.sizes.append(self.next - self._start)
        self._start = self.next


def _standard_layout(na, nb) -> PartitionRowLayout:
    # broadcast positions: input b_k, then p_2..p_na; p_1 shares p_2's copy
    pol = tree_polarities(na, NOT)
    alloc = _Rows()
    a_in, b_in = alloc.take(na), alloc.take(nb)
    units = [{"a": alloc.take()[0], "one": alloc.take()[0]}]
    unit_pol = [Polarity.TRUE_VALUE]
    out = None
    for j in range(2, na + 1):
        if j > 2:
            alloc.cut()
        comp = pol[j - 1] is Polarity.COMPLEMENTED
        roles = ["a", "b"] + (["ab", "one"] if comp else [])
        roles += ["xs", "xc", "xcn", "ys", "yc", "ycn", "t2"]
        units.append({r: alloc.take()[0] for r in roles})
        unit_pol.append(pol[j - 1])
    out = alloc.take(na + nb)
    alloc.cut()
    return PartitionRowLayout("standard", na, nb, alloc.sizes, a_in, b_in, out, units, unit_pol)


def _area_layout(na, nb) -> PartitionRowLayout:
    pol = tree_polarities(na + 1, NOT)
    alloc = _Rows()
    a_in, b_in = alloc.take(na), alloc.take(nb)
    units = []
    for j in range(1, na + 1):
        if j > 1:
            alloc.cut()
        units.append({r: alloc.take()[0] for r in ("A", "P", "S", "C", "F1", "F2")})
    out = alloc.take(na + nb)
    alloc.cut()
    return PartitionRowLayout("area", na, nb, alloc.sizes, a_in, b_in, out, units, pol[1:])


class CycleEmitter:
    def __init__(self, layout: Partitioning):
        self.layout = layout
        self.sched = Schedule()

    def gates(self, execs, phase):
        self.sched.append(make_cycle(self.layout, execs, phase))

    def init(self, cols, phase, value=1):
        self.sched.append(make_cycle(self.layout, [InitExecution(tuple(cols), value)], phase))

    def shift(self, hops, extra_a, extra_b, emission, phase):
        """Two shift cycles; ``hops`` is [(source partition, execution)].

        The bottom unit's emission goes to whichever cycle leaves its
        partition free.
        """
        # hops leaving even-indexed partitions go first, odd ones second
        cyc = [list(extra_a), list(extra_b)]
        for q, ex in hops:
            cyc[q % 2].append(ex)
        if emission is not None:
            busy = {self.layout.partition_of(c) for ex in cyc[0] for c in ex.columns}
            home = self.layout.partition_of(emission.output)
            cyc[1 if home in busy else 0].append(emission)
        self.gates(cyc[0], phase)
        self.gates(cyc[1], phase)


def _standard_schedule(lay: PartitionRowLayout) -> Schedule:
    na, nb = lay.na, lay.nb
    part = lay.partitioning()
    em = CycleEmitter(part)
    top, full = lay.units[0], lay.units[1:]
    comp = [p is Polarity.COMPLEMENTED for p in lay.polarity[1:]]
    pp = [u["ab"] if c else u["b"] for u, c in zip(full, comp)]
    part_of = part.partition_of

    em.init(
        [top["a"], top["one"]]
        + [u[r] for u in full for r in u if r not in ("xs", "xc")]
        + lay.out,
        "init",
    )
    em.init([u[r] for u in full for r in ("xs", "xc")], "init", 0)
    for j, u in enumerate(lay.units, start=1):
        em.gates([GateExecution(NOT, (lay.a_in[na - j],), u["a"])], "load_a")

    def add_and_shift(k, t, last):
        cur, nxt = ("x", "y") if t % 2 == 0 else ("y", "x")
        em.gates([GateExecution(MIN3, (p, u[cur + "s"], u[cur + "c"]), u[nxt + "cn"]) for u, p in zip(full, pp)], "fa")
        em.gates([GateExecution(NOT, (u[nxt + "cn"],), u[nxt + "c"]) for u in full], "fa")
        em.gates([GateExecution(MIN3, (p, u[cur + "s"], u[cur + "cn"]), u["t2"]) for u, p in zip(full, pp)], "fa")

        def sum_gate(u, dest):
            return GateExecution(MIN3, (u[nxt + "c"], u[cur + "cn"], u["t2"]), dest)

        hops = [(part_of(u["t2"]), sum_gate(u, v[nxt + "s"])) for u, v in zip(full, full[1:])]
        if last:
            top_op = InitExecution((full[0][nxt + "s"],), 0)
        else:
            top_op = GateExecution(MIN3, (top["a"], full[0]["b"], top["one"]), full[0][nxt + "s"])
        em.shift(hops, [], [top_op], sum_gate(full[-1], lay.out[k]), "shift")
        reset = [u[cur + r] for u in full for r in ("s", "c", "cn")] + [u["t2"] for u in full]
        if not last:
            reset += [u["b"] for u in full] + [u["ab"] for u, c in zip(full, comp) if c]
        em.init(reset, "stage_init")

    for k in range(nb):
        cols = [lay.b_in[k]] + [u["b"] for u in full]
        em.sched.extend(broadcast_cells(part, cols, NOT, "broadcast"))
        em.gates(
            [
                GateExecution(MIN3, (u["a"], u["b"], u["one"]), u["ab"])
                if c
                else GateExecution(NOT, (u["a"],), u["b"], None, NO_INIT)
                for u, c in zip(full, comp)
            ],
            "pp",
        )
        add_and_shift(k, k, last=False)
        lay.stage_end.append(len(em.sched))
    em.init(pp, "init", 0)
    for t in range(na):
        add_and_shift(nb + t, nb + t, last=True)
    return em.sched


def _area_schedule(lay: PartitionRowLayout) -> Schedule:
    na, nb = lay.na, lay.nb
    part = lay.partitioning()
    em = CycleEmitter(part)
    units = lay.units
    comp = [p is Polarity.COMPLEMENTED for p in lay.polarity]
    part_of = part.partition_of
    col = lambda role: [u[role] for u in units]  # noqa: E731

    em.init(col("A") + col("P") + col("F1") + col("F2") + lay.out, "init")
    em.init(col("S") + col("C"), "init", 0)
    for j, u in enumerate(units, start=1):
        em.gates([GateExecution(NOT, (lay.a_in[na - j],), u["A"])], "load_a")
    # p_1 never receives a sum, so its S keeps the 0 from the start
    lower_s = [u["S"] for u in units[1:]]

    def shift(k, carry, t1, t2, phase):
        def sum_gate(u, dest):
            return GateExecution(MIN3, (u[carry], u[t1], u[t2]), dest)

        hops = [(part_of(u["S"]), sum_gate(u, v["S"])) for u, v in zip(units, units[1:])]
        em.shift(hops, [], [], sum_gate(units[-1], lay.out[k]), phase)

    for k in range(nb):
        cols = [lay.b_in[k]] + [u["F1"] if c else u["P"] for u, c in zip(units, comp)]
        em.sched.extend(broadcast_cells(part, cols, NOT, "broadcast"))
        em.gates(
            [
                GateExecution(MIN3, (u["A"], u["F1"], u["F2"]), u["P"])
                if c
                else GateExecution(NOT, (u["A"],), u["P"], None, NO_INIT)
                for u, c in zip(units, comp)
            ],
            "pp",
        )
        em.init(col("F1"), "fa_init")
        em.gates([GateExecution(NOT, (u["C"],), u["F2"]) for u in units], "fa")
        em.gates([GateExecution(MIN3, (u["P"], u["S"], u["C"]), u["F1"]) for u in units], "fa")
        em.init(col("C"), "fa_init")
        em.gates([GateExecution(NOT, (u["F1"],), u["C"]) for u in units], "fa")
        em.init(col("F1"), "fa_init")
        em.gates([GateExecution(MIN3, (u["P"], u["S"], u["F2"]), u["F1"]) for u in units], "fa")
        em.init(lower_s, "fa_init")
        shift(k, "C", "F2", "F1", "shift")
        em.init(col("P") + col("F1") + col("F2") + (col("A") if k == nb - 1 else []), "stage_init")
        lay.stage_end.append(len(em.sched))
    em.init(col("P"), "init", 0)
    # a' is dead now; A and C take turns holding the carry
    for t in range(na):
        cur, other = ("C", "A") if t % 2 == 0 else ("A", "C")
        em.gates([GateExecution(NOT, (u[cur],), u["F2"]) for u in units], "fa")
        em.gates([GateExecution(MIN3, (u["P"], u["S"], u[cur]), u["F1"]) for u in units], "fa")
        em.gates([GateExecution(NOT, (u["F1"],), u[other]) for u in units], "fa")
        em.init(col(cur), "fa_init")
        em.gates([GateExecution(MIN3, (u["P"], u["S"], u["F2"]), u[cur]) for u in units], "fa")
        em.init(lower_s, "fa_init")
        shift(nb + t, other, "F2", cur, "shift")
        em.init(col("F1") + col("F2") + col(cur), "stage_init")
    return em.sched


def _clog2(x: int) -> int:
    return (x - 1).bit_length()


def predicted_cycles(config: MultiplierConfig) -> int:
    na, nb = config.na, config.nb
    if config.variant == "standard":
        return 3 + na + nb * (_clog2(na) + 7) + 6 * na
    return 3 + na + nb * (_clog2(na + 1) + 12) + 9 * na


def predicted_memristors(config: MultiplierConfig) -> int:
    """Exact row width of the layout.

    Standard rows hold 13N - 7 cells plus two per unit that receives the
    complemented copy of b; that is 14N - 7 at every even N and one off at odd N.
    """
    if config.variant == "standard":
        return _standard_layout(config.na, config.nb).width
    return _area_layout(config.na, config.nb).width


def schedule_multiply(config: MultiplierConfig):
    """Returns (Schedule, PartitionRowLayout, predicted cycle count)."""
    if config.variant == "standard":
        lay = _standard_layout(config.na, config.nb)
        sched = _standard_schedule(lay)
    else:
        lay = _area_layout(config.na, config.nb)
        sched = _area_schedule(lay)
    check_profile(sched.gate_kinds(), config.profile)
    return sched, lay, predicted_cycles(config)


def _bits(values, width):
    v = np.asarray(values, dtype=object)
    return [np.array([(int(x) >> i) & 1 for x in v], dtype=np.uint8) for i in range(width)]


def load_operands(state: CrossbarState, lay: PartitionRowLayout, a_vals, b_vals) -> None:
    for col, bits in zip(lay.a_in, _bits(a_vals, lay.na)):
        state.write_column(col, bits)
    for col, bits in zip(lay.b_in, _bits(b_vals, lay.nb)):
        state.write_column(col, bits)


def read_number(state: CrossbarState, cols) -> list:
    bits = [state.read_column(c).astype(object) for c in cols]
    return [int(sum(int(b[r]) << i for i, b in enumerate(bits))) for r in range(state.rows)]


def run_multiply_batch(a_vals, b_vals, config: MultiplierConfig, probe=None, trace=None):
    """Multiply many pairs at once, one pair per crossbar row.

    ``probe(k, state, layout)`` is called after every first-phase stage
    boundary (k = 0..nb). Returns (products, CostReport).
    """
    a_vals, b_vals = list(a_vals), list(b_vals)
    if len(a_vals) != len(b_vals) or not a_vals:
        raise ValueError("need equally many a and b operands")
    for v, w in [(x, config.na) for x in a_vals] + [(x, config.nb) for x in b_vals]:
        if not 0 <= v < (1 << w):
            raise ValueError(f"operand {v} does not fit in {w} bits")
    sched, lay, _ = schedule_multiply(config)
    state = CrossbarState(len(a_vals), lay.width, lay.boundaries())
    state.trace = trace
    load_operands(state, lay, a_vals, b_vals)
    ends = {e: k + 1 for k, e in enumerate(lay.stage_end)}
    if probe:
        probe(0, state, lay)
    for i, instr in enumerate(sched, start=1):
        state.apply_cycle(instr)
        if probe and i in ends:
            probe(ends[i], state, lay)
    return read_number(state, lay.out), state.cost_report()


def run_multiply(a: int, b: int, config: MultiplierConfig, trace=None):
    products, report = run_multiply_batch([a], [b], config, trace=trace)
    return products[0], report


def stage_invariant_probe(state: CrossbarState, lay: PartitionRowLayout, k: int):
    """Read (emitted low bits, S, C) after ``k`` first-phase stages, per row.

    emitted + 2^k (S + C) equals a * (b mod 2^k).
    """
    if not 0 <= k <= lay.nb:
        raise ValueError(f"no stage boundary {k}")
    s = [0] * state.rows
    c = [0] * state.rows
    if k == 0:
        # nothing emitted and the carry-save cells are not yet initialized
        return [0] * state.rows, s, c
    emitted = read_number(state, lay.out[:k])
    for w, sc, cc in lay.carry_save_columns(k):
        sv, cv = state.read_column(sc), state.read_column(cc)
        for r in range(state.rows):
            s[r] += int(sv[r]) << w
            c[r] += int(cv[r]) << w
    return emitted, s, c


# ---- closed-form cost models ----


def _log2(n):
    return math.log2(n)


LATENCY = {
    "haj_ali": lambda n: 13 * n * n - 14 * n + 6,
    "rime": lambda n: 2 * n * n + 16 * n - 19,
    "multpim": lambda n: round(n * _log2(n)) + 14 * n + 3,
    "multpim_area": lambda n: round(n * _log2(n)) + 23 * n + 3,
}

AREA = {
    "haj_ali": lambda n: 20 * n - 5,
    "rime": lambda n: 15 * n - 12,
    "multpim": lambda n: 14 * n - 7,
    "multpim_area": lambda n: 10 * n,
}


def _model(table, model, n):
    if n < 2:
        raise ValueError("N must be at least 2")
    try:
        return table[model](n)
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(table)}") from None


def baseline_latency(model: str, n: int) -> int:
    return _model(LATENCY, model, n)


def baseline_area(model: str, n: int) -> int:
    return _model(AREA, model, n)
