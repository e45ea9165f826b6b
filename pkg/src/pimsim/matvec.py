"""Inner products on one crossbar row with a fused multiply-accumulate.

Each row holds one row of A and a copy of x. Element pairs are multiplied by
the first-phase stages of the carry-save multiplier, but the units start
from the running sum instead of zero: their sum cells hold its low N bits and
a serial adder in partition 0 feeds the high bits (kept as two N-bit halves,
s and c) into the top unit one bit per stage. Between elements the row moves
the carry-save state back into that shape; after the last element the
carries are flushed once.

Everything wraps modulo 2^(2N).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crossbar import CrossbarState, GateExecution, InitExecution, InitMode, Partitioning, make_cycle
from .gates import GateKind, check_profile
from .routines import hop_depths, split_rounds
from .schedule import Schedule
from .scheduler import VARIANTS, CycleEmitter, _clog2, baseline_latency, read_number

NOT, MIN3 = GateKind.NOT, GateKind.MIN3
NO_INIT = InitMode.NO_INIT


@dataclass(frozen=True)
class MatVecConfig:
    m: int = 1
    n: int = 1
    N: int = 8
    variant: str = "standard"
    profile: str = "not_min3"

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("matrix dimensions must be positive")
        if self.N < 2:
            raise ValueError("element width must be at least 2")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class MatVecRowLayout:
    variant: str
    n: int
    N: int
    partition_sizes: list
    a: list  # a[e][i]: bit i of A[row, e]
    x: list
    feed_s: list  # high half of the incoming sum, one bit per stage
    feed_c: list
    adder: dict  # serial adder in partition 0: c0, cn0, c1, cn1, t
    units: list  # index 0 is the top unit; unit j holds weight N-1-j at element start
    complemented: list
    result: list  # 2N result bits, LSB first
    reserved: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return sum(self.partition_sizes)

    @property
    def partitions(self) -> int:
        return len(self.partition_sizes)

    def boundaries(self) -> list:
        out, acc = [], 0
        for s in self.partition_sizes[:-1]:
            acc += s
            out.append(acc)
        return out

    def partitioning(self) -> Partitioning:
        return Partitioning(self.width, self.boundaries())

    def pp(self, j: int) -> int:
        u = self.units[j]
        if self.variant == "standard":
            return u["ab"] if self.complemented[j] else u["b"]
        return u["P"]

    def bcell(self, j: int) -> int:
        """Cell of unit j that receives the broadcast bit."""
        u = self.units[j]
        if self.variant == "standard":
            return u["b"]
        return u["F1"] if self.complemented[j] else u["P"]


def _unit_complemented(N: int) -> list:
    # b reaches the top unit by one NOT, then spreads along the split tree
    return [(1 + d) % 2 == 1 for d in hop_depths(N)]


def build_layout(n: int, N: int, variant: str = "standard") -> MatVecRowLayout:
    comp = _unit_complemented(N)
    nxt = 0

    def take(k):
        nonlocal nxt
        cols = list(range(nxt, nxt + k))
        nxt += k
        return cols

    a = [take(N) for _ in range(n)]
    x = [take(N) for _ in range(n)]
    feed_s, feed_c = take(N), take(N)
    adder = dict(zip(("c0", "cn0", "c1", "cn1", "t"), take(5)))
    # the area row keeps a ten-cell scratch block in partition 0; the adder uses five
    reserved = take(5) if variant == "area" else []
    sizes = [nxt]
    units = []
    for j in range(N):
        start = nxt
        if variant == "standard":
            roles = ["a", "b"] + (["ab", "one"] if comp[j] else [])
            roles += ["xs", "xc", "xcn", "ys", "yc", "ycn", "t2"]
        else:
            roles = ["A", "P", "S", "C", "F1", "F2"]
        units.append({r: take(1)[0] for r in roles})
        if variant == "standard" and j == N - 1:
            result = take(2 * N)
        sizes.append(nxt - start)
    if variant == "area":
        result = feed_s + feed_c
    return MatVecRowLayout(variant, n, N, sizes, a, x, feed_s, feed_c, adder, units, comp, result, reserved)


class _SerialAdder:
    """feed_s[k] + feed_c[k] + carry, one bit per stage, in partition 0.

    Two (carry, carry') pairs alternate so the carry' of the previous bit is
    still resident when the sum is formed.
    """

    def __init__(self, lay: MatVecRowLayout):
        a = lay.adder
        self.pairs = [(a["c0"], a["cn0"]), (a["c1"], a["cn1"])]
        self.t = a["t"]
        self.fs, self.fc = lay.feed_s, lay.feed_c

    def cur(self, g):
        return self.pairs[g % 2]

    def nxt(self, g):
        return self.pairs[1 - g % 2]

    def carry_n(self, k, g):
        return GateExecution(MIN3, (self.fs[k], self.fc[k], self.cur(g)[0]), self.nxt(g)[1])

    def carry(self, g):
        return GateExecution(NOT, (self.nxt(g)[1],), self.nxt(g)[0])

    def partial(self, k, g):
        return GateExecution(MIN3, (self.fs[k], self.fc[k], self.cur(g)[1]), self.t)

    def sum_into(self, g, dest):
        return GateExecution(MIN3, (self.nxt(g)[0], self.cur(g)[1], self.t), dest)

    def spent(self, g):
        return [*self.cur(g), self.t]


def _init(cols, value=1):
    return InitExecution(tuple(cols), value)


class _Builder:
    def __init__(self, lay: MatVecRowLayout):
        self.lay = lay
        self.part = lay.partitioning()
        self.em = CycleEmitter(self.part)
        self.adder = _SerialAdder(lay)
        self.g = 0  # stages done so far, across elements
        self.element_end = []

    def cycle(self, execs, phase):
        self.em.gates(execs, phase)

    def load_a(self, e):
        N = self.lay.N
        key = "a" if self.lay.variant == "standard" else "A"
        for i in range(N):
            u = self.lay.units[N - 1 - i]
            self.cycle([GateExecution(NOT, (self.lay.a[e][i],), u[key])], "load_a")

    def broadcast(self, e, k, first_round_extra=()):
        lay = self.lay
        cols = [lay.bcell(j) for j in range(lay.N)]
        self.cycle([GateExecution(NOT, (lay.x[e][k],), cols[0])], "broadcast")
        for r, hops in enumerate(split_rounds(lay.N)):
            execs = [GateExecution(NOT, (cols[s],), cols[d]) for s, d in hops]
            self.cycle(execs + (list(first_round_extra) if r == 0 else []), "broadcast")

    def partial_products(self, extra=()):
        lay = self.lay
        execs = []
        for j, u in enumerate(lay.units):
            a = u["a"] if lay.variant == "standard" else u["A"]
            if lay.complemented[j]:
                one = u["one"] if lay.variant == "standard" else u["F2"]
                execs.append(GateExecution(MIN3, (a, lay.bcell(j), one), lay.pp(j)))
            else:
                execs.append(GateExecution(NOT, (a,), lay.pp(j), None, NO_INIT))
        self.cycle(execs + list(extra), "pp")


# ---- standard row: double-buffered units, 3-cycle adder ----


class _StandardBuilder(_Builder):
    def bufs(self):
        return ("x", "y") if self.g % 2 == 0 else ("y", "x")

    def stage(self, e, k, emit_to, flush=False):
        lay, ad, g = self.lay, self.adder, self.g
        units = lay.units
        cur, nxt = self.bufs()
        fa = [
            [GateExecution(MIN3, (lay.pp(j), u[cur + "s"], u[cur + "c"]), u[nxt + "cn"]) for j, u in enumerate(units)],
            [GateExecution(NOT, (u[nxt + "cn"],), u[nxt + "c"]) for u in units],
            [GateExecution(MIN3, (lay.pp(j), u[cur + "s"], u[cur + "cn"]), u["t2"]) for j, u in enumerate(units)],
        ]
        if flush:
            fa[0].append(ad.carry_n(k, g))
            fa[1].append(ad.carry(g))
            fa[2].append(ad.partial(k, g))
        else:
            self.broadcast(e, k, [ad.carry_n(k, g)])
            self.partial_products([ad.carry(g)])
            fa[0].append(ad.partial(k, g))
        for execs in fa:
            self.cycle(execs, "fa")

        def sum_gate(u, dest):
            return GateExecution(MIN3, (u[nxt + "c"], u[cur + "cn"], u["t2"]), dest)

        part_of = self.part.partition_of
        hops = [(part_of(u["t2"]), sum_gate(u, v[nxt + "s"])) for u, v in zip(units, units[1:])]
        hops.append((0, ad.sum_into(g, units[0][nxt + "s"])))
        self.em.shift(hops, [], [], sum_gate(units[-1], emit_to), "shift")
        reset = [u[cur + r] for u in units for r in ("s", "c", "cn")] + [u["t2"] for u in units]
        if not flush:
            reset += [u["b"] for u in units] + [u["ab"] for j, u in enumerate(units) if lay.complemented[j]]
        self.em.init(reset + ad.spent(g), "stage_init")
        self.g += 1

    def start(self, resident_sum=False):
        lay = self.lay
        units = lay.units
        data = {"xs", "xc", "xcn"} if resident_sum else set()
        ones = [c for u in units for r, c in u.items() if r not in data]
        self.em.init(ones + list(lay.adder.values()) + lay.result, "init")
        zeros = [lay.adder["c0"]]
        if not resident_sum:
            zeros += [u[r] for u in units for r in ("xs", "xc")] + lay.feed_s + lay.feed_c
        self.em.init(zeros, "init", 0)

    def transfer(self):
        """Carry-save (S, C) goes to the feed halves, emitted low bits E to the sum cells."""
        lay, N = self.lay, self.lay.N
        units, out = lay.units, lay.result
        cur, _ = self.bufs()
        ph = "transfer"
        self.em.init(lay.feed_s + lay.feed_c, ph)
        self.cycle([GateExecution(NOT, (u[cur + "s"],), u["t2"]) for u in units], ph)
        for j, u in enumerate(units):
            self.cycle([GateExecution(NOT, (u[cur + "cn"],), lay.feed_c[N - 1 - j])], ph)
        # gathering from unit j bridges partitions 0..j+1, scattering into
        # unit j+1 bridges the rest, so the two share a cycle
        for j, u in enumerate(units):
            execs = [GateExecution(NOT, (u["t2"],), lay.feed_s[N - 1 - j])]
            if j + 1 < N:
                execs.append(GateExecution(NOT, (out[N - 2 - j],), units[j + 1]["b"]))
            self.cycle(execs, ph)
        self.cycle([GateExecution(NOT, (out[N - 1],), units[0]["b"])], ph)
        self.em.init([u[cur + r] for u in units for r in ("s", "cn")], ph)
        self.em.init([u[cur + "c"] for u in units], ph, 0)
        self.cycle([GateExecution(NOT, (u["b"],), u[cur + "s"]) for u in units], ph)
        rest = [u[r] for u in units for r in ("a", "b", "ab", "t2") if r in u]
        self.em.init(rest + out[:N], ph)
        c, cn = self.adder.cur(self.g)
        self.em.init([c], ph, 0)
        self.em.init([cn], ph)

    def finish(self):
        lay, N = self.lay, self.lay.N
        c, cn = self.adder.cur(self.g)
        self.em.init([lay.pp(j) for j in range(N)], "final", 0)
        self.em.init(lay.feed_s + lay.feed_c + [c], "final", 0)
        self.em.init([cn], "final")
        for t in range(N):
            self.stage(None, t, lay.result[N + t], flush=True)

    def element(self, e):
        self.load_a(e)
        for k in range(self.lay.N):
            self.stage(e, k, self.lay.result[k])

    def carry_save(self):
        cur, _ = self.bufs()
        return [(u[cur + "s"], u[cur + "c"]) for u in self.lay.units]


# ---- area row: six cells per unit, reinitialized between adder gates ----


class _AreaBuilder(_Builder):
    def adder_steps(self, units, extra_first=(), extra_second=(), reinit_f1=True):
        """The unit full adder with its intermediate inits (7 cycles, 6 if F1 is fresh)."""
        col = lambda r: [u[r] for u in units]  # noqa: E731
        if reinit_f1:
            # F1 carried b' into the partial product
            self.em.sched.append(make_cycle(self.part, [_init(col("F1"))] + list(extra_first), "fa_init"))
        self.cycle([GateExecution(NOT, (u["C"],), u["F2"]) for u in units] + list(extra_second), "fa")
        self.cycle([GateExecution(MIN3, (u["P"], u["S"], u["C"]), u["F1"]) for u in units], "fa")
        self.em.init(col("C"), "fa_init")
        self.cycle([GateExecution(NOT, (u["F1"],), u["C"]) for u in units], "fa")
        self.em.init(col("F1"), "fa_init")
        self.cycle([GateExecution(MIN3, (u["P"], u["S"], u["F2"]), u["F1"]) for u in units], "fa")

    @staticmethod
    def sum_gate(u, dest):
        return GateExecution(MIN3, (u["C"], u["F2"], u["F1"]), dest)

    def stage(self, e, k):
        lay, ad, g = self.lay, self.adder, self.g
        units = lay.units
        self.broadcast(e, k)
        self.partial_products([ad.carry_n(k, g)])
        self.adder_steps(units, [ad.carry(g)], [ad.partial(k, g)])
        # feed_s[k] has been read; it now becomes the target of this stage's emission
        self.em.init([u["S"] for u in units] + [lay.feed_s[k]], "fa_init")
        part_of = self.part.partition_of
        hops = [(part_of(u["S"]), self.sum_gate(u, v["S"])) for u, v in zip(units, units[1:])]
        hops.append((0, ad.sum_into(g, units[0]["S"])))
        self.em.shift(hops, [], [], None, "shift")
        self.cycle([self.sum_gate(units[-1], lay.feed_s[k])], "emit")
        self.em.init([u[r] for u in units for r in ("P", "F1", "F2")] + ad.spent(g), "stage_init")
        self.g += 1

    def flush_stage(self, t):
        lay = self.lay
        units = lay.units
        self.adder_steps(units, reinit_f1=False)
        # the top unit gets no more input; its sum cell holds 0 from here on
        self.em.sched.append(
            make_cycle(self.part, [_init([u["S"] for u in units[1:]]), _init([units[0]["S"]], 0)], "fa_init")
        )
        part_of = self.part.partition_of
        hops = [(part_of(u["S"]), self.sum_gate(u, v["S"])) for u, v in zip(units, units[1:])]
        self.em.shift(hops, [], [], None, "shift")
        self.cycle([self.sum_gate(units[-1], lay.feed_c[t])], "emit")
        self.em.init([u[r] for u in units for r in ("F1", "F2")], "stage_init")

    def start(self, resident_sum=False):
        lay = self.lay
        units = lay.units
        self.em.init([u[r] for u in units for r in ("A", "P", "F1", "F2")] + list(lay.adder.values()), "init")
        zeros = [lay.adder["c0"]]
        if not resident_sum:
            zeros += [u[r] for u in units for r in ("S", "C")] + lay.feed_s + lay.feed_c
        self.em.init(zeros, "init", 0)

    def transfer(self):
        """(S, C) to the feed halves, emitted bits E into the carry cells, S cleared."""
        lay, N = self.lay, self.lay.N
        units = lay.units
        col = lambda r: [u[r] for u in units]  # noqa: E731
        ph = "transfer"
        self.em.init(lay.feed_c, ph)
        self.cycle([GateExecution(NOT, (u["C"],), u["F1"]) for u in units], ph)
        for j, u in enumerate(units):
            self.cycle([GateExecution(NOT, (u["F1"],), lay.feed_c[N - 1 - j])], ph)
        self.em.init(col("F1") + col("C"), ph)
        for j, u in enumerate(units):
            self.cycle([GateExecution(NOT, (lay.feed_s[N - 1 - j],), u["F2"])], ph)
        self.cycle([GateExecution(NOT, (u["F2"],), u["C"]) for u in units], ph)
        self.em.init(lay.feed_s, ph)
        self.cycle([GateExecution(NOT, (u["S"],), u["F1"]) for u in units], ph)
        for j, u in enumerate(units):
            self.cycle([GateExecution(NOT, (u["F1"],), lay.feed_s[N - 1 - j])], ph)
        c, cn = self.adder.cur(self.g)
        self.em.init(col("A") + col("P") + col("F1") + col("F2") + [cn], ph)
        self.em.init(col("S") + [c], ph, 0)

    def finish(self):
        lay, N = self.lay, self.lay.N
        self.em.init(lay.feed_c, "final")
        self.em.init([u["P"] for u in lay.units], "final", 0)
        for t in range(N):
            self.flush_stage(t)

    def element(self, e):
        self.load_a(e)
        for k in range(self.lay.N):
            self.stage(e, k)

    def carry_save(self):
        return [(u["S"], u["C"]) for u in self.lay.units]


_BUILDERS = {"standard": _StandardBuilder, "area": _AreaBuilder}


def predicted_matvec_cycles(n: int, N: int, variant: str = "standard") -> int:
    lg = _clog2(N)
    if variant == "standard":
        return n * (N * lg + 11 * N + 9) + 4 * N - 4
    return n * (N * lg + 18 * N + 8) + 8 * N - 4


def predicted_matvec_width(n: int, N: int, variant: str = "standard") -> int:
    if variant == "standard":
        return 2 * n * N + 14 * N + 5
    return 2 * n * N + 8 * N + 10


def schedule_matvec(config: MatVecConfig):
    """Full inner-product schedule; returns (Schedule, MatVecRowLayout, predicted cycles)."""
    lay = build_layout(config.n, config.N, config.variant)
    b = _BUILDERS[config.variant](lay)
    b.start()
    for e in range(config.n):
        b.element(e)
        b.element_end.append(len(b.em.sched))
        if e < config.n - 1:
            b.transfer()
    b.finish()
    check_profile(b.em.sched.gate_kinds(), config.profile)
    return b.em.sched, lay, predicted_matvec_cycles(config.n, config.N, config.variant)


def schedule_fused_mac(config: MatVecConfig):
    """One multiply-accumulate: s_o + c_o = a*b + s_i + c_i (mod 2^2N).

    The low halves of s_i and c_i must already sit in the units' sum and
    carry cells and the high halves in the feed cells (see ``load_accumulator``).
    Returns (Schedule, MatVecRowLayout, builder) where the builder locates the
    outgoing carry-save cells.
    """
    lay = build_layout(1, config.N, config.variant)
    b = _BUILDERS[config.variant](lay)
    b.start(resident_sum=True)
    b.element(0)
    check_profile(b.em.sched.gate_kinds(), config.profile)
    return b.em.sched, lay, b


def _write_number(state, cols, values):
    for i, col in enumerate(cols):
        state.write_column(col, [(v >> i) & 1 for v in values])


def load_accumulator(state: CrossbarState, lay: MatVecRowLayout, s_in, c_in) -> None:
    """Place 2N-bit s_i and c_i: low halves in the units, high halves in the feed cells."""
    N = lay.N
    mask = (1 << N) - 1
    low_s = [v & mask for v in s_in]
    low_c = [v & mask for v in c_in]
    # unit j holds weight N-1-j, so the unit cells read MSB first
    if lay.variant == "standard":
        s_cols = [u["xs"] for u in reversed(lay.units)]
        c_cols = [u["xc"] for u in reversed(lay.units)]
        _write_number(state, [u["xcn"] for u in reversed(lay.units)], [mask ^ v for v in low_c])
    else:
        s_cols = [u["S"] for u in reversed(lay.units)]
        c_cols = [u["C"] for u in reversed(lay.units)]
    _write_number(state, s_cols, low_s)
    _write_number(state, c_cols, low_c)
    _write_number(state, lay.feed_s, [v >> N for v in s_in])
    _write_number(state, lay.feed_c, [v >> N for v in c_in])


def run_fused_mac_batch(a_vals, b_vals, s_in, c_in, config: MatVecConfig):
    """One fused MAC per row; returns (s_o list, c_o list, CostReport)."""
    N = config.N
    rows = len(a_vals)
    if not rows or not (len(b_vals) == len(s_in) == len(c_in) == rows):
        raise ValueError("need equally many a, b, s_i and c_i values")
    sched, lay, builder = schedule_fused_mac(config)
    state = CrossbarState(rows, lay.width, lay.boundaries())
    _write_number(state, lay.a[0], a_vals)
    _write_number(state, lay.x[0], b_vals)
    # the schedule's first cycle initializes work cells; the resident sum is written after it
    state.apply_cycle(sched[0])
    load_accumulator(state, lay, s_in, c_in)
    for instr in sched.instructions[1:]:
        state.apply_cycle(instr)
    low = read_number(state, lay.result[:N] if lay.variant == "standard" else lay.feed_s)
    pairs = builder.carry_save()
    s_hi = read_number(state, [s for s, _ in reversed(pairs)])
    c_hi = read_number(state, [c for _, c in reversed(pairs)])
    s_out = [lo + (hi << N) for lo, hi in zip(low, s_hi)]
    c_out = [hi << N for hi in c_hi]
    return s_out, c_out, state.cost_report()


def run_matvec(A, x, config: MatVecConfig | None = None, variant: str = "standard", trace=None):
    """y = A x with one matrix row per crossbar row; returns (y, CostReport).

    Elements are N-bit unsigned; y wraps modulo 2^(2N).
    """
    A = [list(map(int, row)) for row in A]
    x = list(map(int, x))
    if not A or any(len(r) != len(x) for r in A) or not x:
        raise ValueError("A must be m x n with n = len(x) > 0")
    if config is None:
        width = max([v.bit_length() for r in A for v in r] + [v.bit_length() for v in x] + [2])
        config = MatVecConfig(len(A), len(x), width, variant)
    if (config.m, config.n) != (len(A), len(x)):
        raise ValueError(f"config is {config.m}x{config.n} but A is {len(A)}x{len(x)}")
    N = config.N
    for v in [v for r in A for v in r] + x:
        if not 0 <= v < (1 << N):
            raise ValueError(f"element {v} does not fit in {N} bits")
    sched, lay, _ = schedule_matvec(config)
    state = CrossbarState(config.m, lay.width, lay.boundaries())
    state.trace = trace
    for e in range(config.n):
        _write_number(state, lay.a[e], [row[e] for row in A])
        # x is duplicated down the rows before the run
        _write_number(state, lay.x[e], [x[e]] * config.m)
    state.run(sched)
    return read_number(state, lay.result), state.cost_report()


# ---- closed-form comparisons ----


def floatpim_cost(n: int, N: int, m: int = 1):
    """(cycles, row width) of the FloatPIM fixed-point inner product."""
    if n < 1 or N < 1 or m < 1:
        raise ValueError("arguments must be positive")
    return n * (13 * N * N + 12 * N + 6), 4 * n * N + 22 * N - 5


def naive_substitution_cycles(n: int, N: int) -> int:
    """Swap only FloatPIM's multiplier for the standard one, keep its adder.

    FloatPIM spends 26N cycles per element on addition on top of the
    quadratic multiplier; that part is unchanged here.
    """
    adder = floatpim_cost(1, N)[0] - baseline_latency("haj_ali", N)
    return n * (baseline_latency("multpim", N) + adder)


def speedups(n: int = 8, N: int = 32) -> dict:
    fp = floatpim_cost(n, N)[0]
    return {
        "fused": fp / predicted_matvec_cycles(n, N),
        "naive": fp / naive_substitution_cycles(n, N),
        "area": fp / predicted_matvec_cycles(n, N, "area"),
    }
