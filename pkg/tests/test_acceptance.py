"""One test per acceptance criterion; each prints a PASS/FAIL line.

Run directly (python3 tests/test_acceptance.py) to get just the nine lines.
"""

import itertools
import math
import random
import time

import pytest

from pimsim.arithmetic import (
    FelixCellLayout,
    FullAdderCellLayout,
    full_adder_felix,
    full_adder_multpim,
    ripple_adder,
)
from pimsim.crossbar import CrossbarState, InitExecution, Partitioning, make_cycle
from pimsim.gates import GateKind, gate_profile
from pimsim.matvec import (
    MatVecConfig,
    build_layout,
    floatpim_cost,
    run_matvec,
    schedule_matvec,
)
from pimsim.routines import PartitionSpan, Polarity, broadcast_log, shift_parallel
from pimsim.scheduler import (
    VARIANTS,
    MultiplierConfig,
    baseline_area,
    baseline_latency,
    run_multiply,
    run_multiply_batch,
    schedule_multiply,
    stage_invariant_probe,
)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:
    ACCEPTANCE_LINES = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def multiply_many(pairs, config):
    products, rep = run_multiply_batch([a for a, _ in pairs], [b for _, b in pairs], config)
    return products == [a * b for a, b in pairs], rep


def test_criterion_1_functional():
    start = time.perf_counter()
    failures = []
    for variant in VARIANTS:
        for n in (2, 3, 4):
            ok, _ = multiply_many(list(itertools.product(range(1 << n), repeat=2)), MultiplierConfig(n, variant))
            if not ok:
                failures.append(f"{variant} N={n} exhaustive")
        for n in (8, 16, 32):
            rng = random.Random(n)
            pairs = [(rng.randrange(1 << n), rng.randrange(1 << n)) for _ in range(1000)]
            ok, _ = multiply_many(pairs, MultiplierConfig(n, variant))
            if not ok:
                failures.append(f"{variant} N={n} random")
    elapsed = time.perf_counter() - start
    report(
        1,
        not failures and elapsed < 60,
        f"exhaustive N=2,3,4 and 1000 seeded pairs at N=8,16,32, both variants, {elapsed:.1f}s"
        + (f"; failed {failures}" if failures else ""),
    )


def cycles(n, variant="standard"):
    return run_multiply(1, 1, MultiplierConfig(n, variant))[1]


def test_criterion_2_latency():
    std = {n: cycles(n).cycles for n in (4, 8, 16, 32)}
    area = {n: cycles(n, "area").cycles for n in (16, 32)}
    want = {n: n * int(math.log2(n)) + 14 * n + 3 for n in (4, 8)}
    ok = std[16] == 291 and std[32] == 611 and all(std[n] == want[n] for n in want) and area == {16: 435, 32: 899}
    report(2, ok, f"standard {std}, area {area}")


def test_criterion_3_area():
    std = {n: cycles(n) for n in (16, 32)}
    area = {n: cycles(n, "area").memristors_per_row for n in (16, 32)}
    mem = {n: r.memristors_per_row for n, r in std.items()}
    parts = {n: r.partitions for n, r in std.items()}
    ok = mem == {16: 217, 32: 441} and area == {16: 160, 32: 320} and parts == {16: 15, 32: 31}
    report(3, ok, f"standard memristors {mem}, area {area}, partitions {parts}")


def test_criterion_4_baselines():
    haj = [baseline_latency("haj_ali", n) for n in (16, 32)]
    rime = [baseline_latency("rime", n) for n in (16, 32)]
    rime_area = [baseline_area("rime", n) for n in (16, 32)]
    ok = haj == [3110, 12870] and rime == [749, 2541] and rime_area == [228, 468]
    report(4, ok, f"Haj-Ali {haj}, RIME {rime}, RIME area {rime_area}")


def test_criterion_5_speedups():
    ours = cycles(32).cycles
    over_rime = round(baseline_latency("rime", 32) / ours, 1)
    over_haj = round(baseline_latency("haj_ali", 32) / ours, 1)
    report(5, (over_rime, over_haj) == (4.2, 21.1), f"{over_rime}x over RIME, {over_haj}x over Haj-Ali at N=32")


def test_criterion_6_matvec():
    rng = random.Random(6)
    functional = []
    for m, n, N in ((2, 2, 4), (4, 3, 8), (2, 8, 32)):
        A = [[rng.randrange(1 << N) for _ in range(n)] for _ in range(m)]
        x = [rng.randrange(1 << N) for _ in range(n)]
        want = [sum(a * b for a, b in zip(row, x)) % (1 << (2 * N)) for row in A]
        for variant in VARIANTS:
            y, rep = run_matvec(A, x, MatVecConfig(m, n, N, variant))
            functional.append(y == want)
            if (n, N) == (8, 32):
                if variant == "standard":
                    std = (rep.cycles, build_layout(n, N).width, rep.partitions)
                else:
                    area = (rep.cycles, build_layout(n, N, variant).width, rep.memristors_per_row)
    fp = floatpim_cost(8, 32)
    ratio = round(fp[0] / std[0], 1)
    ok = all(functional) and std == (4292, 965, 33) and area[:2] == (6204, 778) and fp == (109616, 1723) and ratio == 25.5
    report(
        6,
        ok,
        f"standard cycles/width/partitions {std}; area cycles/width {area[:2]} "
        f"({area[2]} cells touched); FloatPIM {fp}; ratio {ratio}x; functional {sum(functional)}/{len(functional)}",
    )


def _fa_ok():
    rows = list(itertools.product((0, 1), repeat=3))
    results = []
    for resident in (False, True):
        layout = Partitioning(8)
        state = CrossbarState(8, 8)
        for i in range(3):
            state.write_column(i, [r[i] for r in rows])
        scratch = (3, 4, 5, 6)
        if resident:
            state.write_column(7, [1 - r[2] for r in rows])
        else:
            scratch += (7,)
        state.apply_cycle(make_cycle(layout, [InitExecution(scratch, 1)]))
        sched = full_adder_multpim(layout, FullAdderCellLayout(0, 1, 2, 3, 4, 5, 6, 7), resident)
        state.run(sched)
        cout, s = state.read_column(4), state.read_column(6)
        results.append(
            len(sched) == (4 if resident else 5) and all(2 * cout[i] + s[i] == sum(r) for i, r in enumerate(rows))
        )
    felix = full_adder_felix(Partitioning(7), FelixCellLayout(0, 1, 2, 3, 4, 5, 6))
    return all(results), len(felix) == 6


def _routines_ok():
    for k in range(2, 33):
        bounds = [2 * i for i in range(1, k)]
        layout = Partitioning(2 * k, bounds)
        state = CrossbarState(2, 2 * k, bounds)
        state.write_column(0, [0, 1])
        for p in range(k):
            state.write_column(layout.column(p, 1), [p & 1, 1 - (p & 1)])
        state.apply_cycle(make_cycle(layout, [InitExecution((layout.column(p, 0),), 1) for p in range(1, k)]))
        bc, pol = broadcast_log(layout, PartitionSpan(0, k), GateKind.NOT)
        state.run(bc)
        for p in range(k):
            want = [0, 1] if pol[p] is Polarity.TRUE_VALUE else [1, 0]
            if list(state.read_column(layout.column(p, 0))) != want:
                return False
        if len(bc) != math.ceil(math.log2(k)):
            return False
        # shift offset 1 into a fresh offset 0 cell of the next partition
        state.apply_cycle(make_cycle(layout, [InitExecution((layout.column(p, 0),), 1) for p in range(k)]))
        sh = shift_parallel(layout, PartitionSpan(0, k), 0, GateKind.COPY, input_offsets=(1,))
        state.run(sh)
        if len(sh) != (1 if k == 2 else 2):
            return False
        for p in range(1, k):
            if list(state.read_column(layout.column(p, 0))) != [(p - 1) & 1, 1 - ((p - 1) & 1)]:
                return False
    return True


def _ripple_ok():
    sched, lay = ripple_adder(4)
    pairs = list(itertools.product(range(16), repeat=2))
    state = CrossbarState(len(pairs), lay.width)
    for i in range(4):
        state.write_column(lay.x[i], [(x >> i) & 1 for x, _ in pairs])
        state.write_column(lay.y[i], [(y >> i) & 1 for _, y in pairs])
    c, cn = lay.carry_pair(0)
    state.write_column(c, [0] * len(pairs))
    state.write_column(cn, [1] * len(pairs))
    state.run(sched)
    bits = [state.read_column(col) for col in lay.s + (lay.carry_out,)]
    sums = [sum(int(b[r]) << i for i, b in enumerate(bits)) for r in range(len(pairs))]
    return len(sched) == 20 and sums == [x + y for x, y in pairs]


def test_criterion_7_micro_blocks():
    fa, felix = _fa_ok()
    routines = _routines_ok()
    ripple = _ripple_ok()
    report(
        7,
        fa and felix and routines and ripple,
        f"full adder 5/4 cycles on 8 rows {fa}; FELIX 6 cycles {felix}; "
        f"broadcast ceil(log2 k) and shift 2 for k=2..32 {routines}; ripple 5N exhaustive N=4 {ripple}",
    )


def test_criterion_8_stage_invariant():
    failures = []
    for variant in VARIANTS:
        for n in (8, 16):
            rng = random.Random(100 + n)
            a = [rng.randrange(1 << n) for _ in range(100)]
            b = [rng.randrange(1 << n) for _ in range(100)]
            stages = []

            def probe(k, state, lay):
                emitted, s, c = stage_invariant_probe(state, lay, k)
                mask = (1 << k) - 1
                if any(e + ((sv + cv) << k) != x * (y & mask) for x, y, e, sv, cv in zip(a, b, emitted, s, c)):
                    failures.append((variant, n, k))
                stages.append(k)

            run_multiply_batch(a, b, MultiplierConfig(n, variant), probe=probe)
            if stages != list(range(n + 1)):
                failures.append((variant, n, "missing stages"))
    report(8, not failures, "100 seeded pairs at N=8,16, every stage, both variants" + (f"; {failures}" if failures else ""))


def test_criterion_9_legality_and_profile():
    allowed = gate_profile("not_min3")
    audited, bad_profile = 0, []
    schedules = [(f"mult {v} N={n}", MultiplierConfig(n, v)) for v in VARIANTS for n in range(2, 33)]
    for name, config in schedules:
        sched, lay, _ = schedule_multiply(config)
        if not sched.gate_kinds() <= allowed:
            bad_profile.append(name)
        state = CrossbarState(1, lay.width, lay.boundaries())
        rng = random.Random(config.n)
        for col in lay.a_in + lay.b_in:
            state.write_column(col, [rng.randrange(2)])
        state.run(sched)  # raises on the first illegal cycle
        audited += len(sched)
    for variant in VARIANTS:
        for n, N in ((1, 2), (3, 4), (8, 32)):
            sched, lay, _ = schedule_matvec(MatVecConfig(1, n, N, variant))
            if not sched.gate_kinds() <= allowed:
                bad_profile.append(f"matvec {variant} n={n} N={N}")
            state = CrossbarState(1, lay.width, lay.boundaries())
            for col in [c for e in range(n) for c in lay.a[e] + lay.x[e]]:
                state.write_column(col, [1])
            state.run(sched)
            audited += len(sched)
    report(9, not bad_profile, f"{audited} cycles legal across {len(schedules) + 6} schedules; gates within NOT/MIN3")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
