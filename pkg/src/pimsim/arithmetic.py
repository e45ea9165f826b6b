"""Gate-level adders: the NOT/MIN3 full adder, the OR/NAND baseline, a half adder
and a bit-serial ripple adder."""

from __future__ import annotations

from dataclasses import astuple, dataclass

from .crossbar import GateExecution, InitExecution, InitMode, Partitioning, make_cycle
from .gates import GateKind, check_profile
from .schedule import Schedule

NOT, MIN3 = GateKind.NOT, GateKind.MIN3


def _distinct(cells) -> None:
    cols = [c for c in astuple(cells) if c is not None]
    if len(set(cols)) != len(cols):
        raise ValueError(f"cell layout reuses a column: {cells}")


@dataclass(frozen=True)
class FullAdderCellLayout:
    a: int
    b: int
    cin: int
    t1: int
    cout: int
    t2: int
    s: int
    cin_n: int | None = None


def full_adder_multpim(layout: Partitioning, cells: FullAdderCellLayout, have_cin_complement=False, rows=None):
    """Cout = NOT(MIN3(A,B,Cin)), S = MIN3(Cout, Cin', MIN3(A,B,Cin')).

    Five cycles, or four when Cin' is already resident in ``cells.cin_n``.
    Outputs and intermediates must be initialized by the caller. t1 ends up
    holding Cout'.
    """
    _distinct(cells)
    if cells.cin_n is None:
        raise ValueError("cin_n column is required (as input or as scratch)")
    f = cells
    gates = [] if have_cin_complement else [GateExecution(NOT, (f.cin,), f.cin_n, rows)]
    gates += [
        GateExecution(MIN3, (f.a, f.b, f.cin), f.t1, rows),
        GateExecution(NOT, (f.t1,), f.cout, rows),
        GateExecution(MIN3, (f.a, f.b, f.cin_n), f.t2, rows),
        GateExecution(MIN3, (f.cout, f.cin_n, f.t2), f.s, rows),
    ]
    return Schedule([make_cycle(layout, [g], "fa") for g in gates])


@dataclass(frozen=True)
class FelixCellLayout:
    a: int
    b: int
    cin: int
    t1: int
    t2: int
    cout: int
    s: int


def full_adder_felix(layout: Partitioning, cells: FelixCellLayout, profile="extended", rows=None):
    """Six-cycle baseline adder with two intermediates.

    Each XOR is OR followed by a no-init NAND into the same cell, which
    leaves (x OR y) AND NOT(x AND y).
    """
    _distinct(cells)
    f = cells
    no = InitMode.NO_INIT
    gates = [
        GateExecution(MIN3, (f.a, f.b, f.cin), f.t1, rows),
        GateExecution(NOT, (f.t1,), f.cout, rows),
        GateExecution(GateKind.OR2, (f.a, f.b), f.t2, rows),
        GateExecution(GateKind.NAND2, (f.a, f.b), f.t2, rows, no),
        GateExecution(GateKind.OR2, (f.t2, f.cin), f.s, rows),
        GateExecution(GateKind.NAND2, (f.t2, f.cin), f.s, rows, no),
    ]
    sched = Schedule([make_cycle(layout, [g], "fa") for g in gates])
    check_profile(sched.gate_kinds(), profile)
    return sched


@dataclass(frozen=True)
class HalfAdderCellLayout:
    s: int
    c: int
    c_n: int
    zero: int
    t1: int
    cout: int
    t2: int
    s_out: int


def half_adder(layout: Partitioning, cells: HalfAdderCellLayout, rows=None):
    """The full adder with A tied to a cell holding 0: s + c -> (s_out, cout).

    c' is resident, so this is four gates; inside a multiplier stage the last
    gate rides on the shift and the stage costs 3 + 2 cycles.
    """
    _distinct(cells)
    f = cells
    gates = [
        GateExecution(MIN3, (f.zero, f.s, f.c), f.t1, rows),
        GateExecution(NOT, (f.t1,), f.cout, rows),
        GateExecution(MIN3, (f.zero, f.s, f.c_n), f.t2, rows),
        GateExecution(MIN3, (f.cout, f.c_n, f.t2), f.s_out, rows),
    ]
    return Schedule([make_cycle(layout, [g], "fa") for g in gates])


@dataclass(frozen=True)
class RippleLayout:
    n: int
    x: tuple
    y: tuple
    s: tuple
    work: tuple  # carry pair 0 (c, c'), carry pair 1 (c, c'), t2

    def carry_pair(self, i: int):
        """(carry, carry') entering bit i; pair 0 holds the carry-in."""
        return self.work[2 * (i % 2)], self.work[2 * (i % 2) + 1]

    @property
    def carry_out(self) -> int:
        return self.carry_pair(self.n)[0]

    @property
    def width(self) -> int:
        return 3 * self.n + 5


def ripple_layout(n: int) -> RippleLayout:
    return RippleLayout(
        n,
        tuple(range(n)),
        tuple(range(n, 2 * n)),
        tuple(range(2 * n, 3 * n)),
        tuple(range(3 * n, 3 * n + 5)),
    )


def ripple_adder(n: int, rows=None):
    """x + y + carry-in over n bits in one partition: 5n cycles, 3n+5 cells.

    The carry-in and its complement are operands, written into carry pair 0
    alongside x and y. Each bit is one init cycle (phase "init") followed by
    the four-gate adder, which leaves the complement of its carry-out
    resident for the next bit; the two carry pairs alternate. The carry-out
    lands in ``layout.carry_out``. Returns (Schedule, RippleLayout).
    """
    if n < 1:
        raise ValueError("width must be positive")
    lay = ripple_layout(n)
    part = Partitioning(lay.width)
    t2 = lay.work[4]
    sched = Schedule()
    for i in range(n):
        x, y, s = lay.x[i], lay.y[i], lay.s[i]
        c, cn = lay.carry_pair(i)
        c_out, c_out_n = lay.carry_pair(i + 1)
        sched.append(make_cycle(part, [InitExecution((c_out, c_out_n, t2, s), 1, rows)], "init"))
        gates = [
            GateExecution(MIN3, (x, y, c), c_out_n, rows),
            GateExecution(NOT, (c_out_n,), c_out, rows),
            GateExecution(MIN3, (x, y, cn), t2, rows),
            GateExecution(MIN3, (c_out, cn, t2), s, rows),
        ]
        sched.extend(make_cycle(part, [g], "add") for g in gates)
    return sched, lay
