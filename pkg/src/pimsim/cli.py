"""Command-line front end: mult, matvec, tables, verify, trace-replay.

Exit codes: 0 success, 1 a check failed, 2 bad usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import random
import sys

from .crossbar import CrossbarState, GateExecution, InitMode, SchedulingError
from .matvec import (
    MatVecConfig,
    build_layout,
    floatpim_cost,
    naive_substitution_cycles,
    predicted_matvec_cycles,
    predicted_matvec_width,
    run_matvec,
)
from .schedule import Schedule
from .scheduler import (
    AREA,
    LATENCY,
    VARIANTS,
    MultiplierConfig,
    predicted_cycles,
    predicted_memristors,
    run_multiply,
    run_multiply_batch,
    stage_invariant_probe,
)

SEED_ENV = "PIMSIM_SEED"
MODEL_NAMES = {"haj_ali": "Haj-Ali et al.", "rime": "RIME", "multpim": "MultPIM", "multpim_area": "MultPIM-Area"}


class UsageError(Exception):
    pass


def parse_int(text: str) -> int:
    """Decimal or 0x-prefixed hex (also 0b / 0o)."""
    try:
        value = int(str(text).strip().replace("_", ""), 0)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None
    if value < 0:
        raise UsageError(f"negative values are not supported: {text!r}")
    return value


def _fits(value: int, width: int, what: str) -> int:
    if value >= 1 << width:
        raise UsageError(f"{what} = {value:#x} does not fit in {width} bits")
    return value


def _open_trace(path):
    return open(path, "w", encoding="utf-8") if path else None


# ---- mult ----


def cmd_mult(args, out) -> int:
    a = _fits(parse_int(args.a), args.n, "a")
    b = _fits(parse_int(args.b), args.n, "b")
    config = MultiplierConfig(args.n, args.variant)
    trace = _open_trace(args.trace)
    try:
        product, report = run_multiply(a, b, config, trace=trace)
    finally:
        if trace:
            trace.close()
    expected = predicted_cycles(config)
    print(f"product      {product} ({product:#x})", file=out)
    print(f"cycles       {report.cycles}", file=out)
    print(f"memristors   {report.memristors_per_row}", file=out)
    print(f"partitions   {report.partitions}", file=out)
    ok = product == a * b and report.cycles == expected
    if product != a * b:
        print(f"FAIL product differs from integer multiplication ({a * b})", file=out)
    if report.cycles != expected:
        print(f"FAIL cycle count differs from closed form ({expected})", file=out)
    return 0 if ok else 1


# ---- matvec ----


def _parse_matrix(text: str):
    rows = [r for r in text.replace("\n", ";").split(";") if r.strip()]
    return [[parse_int(v) for v in r.replace(",", " ").split()] for r in rows]


def _load_matvec_input(args):
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            data = json.load(fh)
        A = [[parse_int(v) for v in row] for row in data["A"]]
        x = [parse_int(v) for v in data["x"]]
    elif args.A is not None and args.x is not None:
        A = _parse_matrix(args.A)
        x = [parse_int(v) for v in args.x.replace(",", " ").split()]
    else:
        raise UsageError("give either --input FILE or both --A and --x")
    if not A or not x or any(len(r) != len(x) for r in A):
        raise UsageError("A must be m x n with n = len(x)")
    return A, x


def cmd_matvec(args, out) -> int:
    A, x = _load_matvec_input(args)
    for v in [v for r in A for v in r] + x:
        _fits(v, args.N, "element")
    config = MatVecConfig(len(A), len(x), args.N, args.variant)
    trace = _open_trace(args.trace)
    try:
        y, report = run_matvec(A, x, config, trace=trace)
    finally:
        if trace:
            trace.close()
    mod = 1 << (2 * args.N)
    expected = [sum(a * b for a, b in zip(row, x)) % mod for row in A]
    width = build_layout(config.n, config.N, config.variant).width
    predicted = predicted_matvec_cycles(config.n, config.N, config.variant)
    for v in y:
        print(f"y {v}", file=out)
    print(f"cycles       {report.cycles}", file=out)
    print(f"row width    {width}", file=out)
    print(f"memristors   {report.memristors_per_row}", file=out)
    print(f"partitions   {report.partitions}", file=out)
    ok = y == expected and report.cycles == predicted
    if y != expected:
        print(f"FAIL result differs from integer oracle {expected}", file=out)
    if report.cycles != predicted:
        print(f"FAIL cycle count differs from closed form ({predicted})", file=out)
    return 0 if ok else 1


# ---- tables ----


def _simulated_multiply(n: int, variant: str):
    rng = random.Random(n)
    a, b = rng.randrange(1 << n), rng.randrange(1 << n)
    product, report = run_multiply(a, b, MultiplierConfig(n, variant))
    return report, product == a * b


def _cell(value, expected=None, correct=True):
    text = str(value)
    if expected is not None and value != expected:
        return f"{text} FAIL({expected})"
    if not correct:
        return f"{text} FAIL(result)"
    return text


def multiplier_tables(ns):
    """Latency and area rows; simulated for the two MultPIM variants."""
    latency, area, ok = [], [], True
    sims = {(n, v): _simulated_multiply(n, v) for n in ns for v in VARIANTS}
    for model in LATENCY:
        lat_row, area_row = [MODEL_NAMES[model]], [MODEL_NAMES[model]]
        for n in ns:
            if model in ("multpim", "multpim_area"):
                report, correct = sims[(n, "standard" if model == "multpim" else "area")]
                lat_row.append(_cell(report.cycles, LATENCY[model](n), correct))
                area_row.append(_cell(report.memristors_per_row, AREA[model](n), correct))
                ok &= report.cycles == LATENCY[model](n) and report.memristors_per_row == AREA[model](n) and correct
            else:
                lat_row.append(str(LATENCY[model](n)))
                area_row.append(str(AREA[model](n)))
        latency.append(lat_row)
        area.append(area_row)
    return latency, area, ok


def matvec_table(n=8, N=32, m=2):
    rng = random.Random(n * N)
    A = [[rng.randrange(1 << N) for _ in range(n)] for _ in range(m)]
    x = [rng.randrange(1 << N) for _ in range(n)]
    mod = 1 << (2 * N)
    expected = [sum(a * b for a, b in zip(row, x)) % mod for row in A]
    fp_cycles, fp_width = floatpim_cost(n, N, m)
    rows, ok = [["FloatPIM", str(fp_cycles), f"m x {fp_width}", "-"]], True
    for variant, name in (("standard", "MultPIM"), ("area", "MultPIM-Area")):
        y, report = run_matvec(A, x, MatVecConfig(m, n, N, variant))
        width = build_layout(n, N, variant).width
        pc, pw = predicted_matvec_cycles(n, N, variant), predicted_matvec_width(n, N, variant)
        rows.append(
            [name, _cell(report.cycles, pc, y == expected), f"m x {_cell(width, pw)}", str(report.partitions)]
        )
        ok &= report.cycles == pc and width == pw and y == expected
    return rows, ok


def _render(headers, rows, as_csv):
    if as_csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return buf.getvalue()
    widths = [max(len(str(r[i])) for r in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [headers] + rows]
    return "\n".join(lines) + "\n"


def cmd_tables(args, out) -> int:
    ns = args.N or [16, 32]
    for n in ns:
        if n < 2:
            raise UsageError("N must be at least 2")
    ok = True
    which = ["latency", "area", "matvec"] if args.which == "all" else [args.which]
    if "latency" in which or "area" in which:
        latency, area, good = multiplier_tables(ns)
        ok &= good
        heads = ["Algorithm"] + [f"N={n}" for n in ns]
        if "latency" in which:
            if not args.csv:
                print("Latency (clock cycles)", file=out)
            out.write(_render(heads, latency, args.csv))
            if not args.csv:
                std = {n: LATENCY["multpim"](n) for n in ns}
                for n in ns:
                    print(
                        f"speedup N={n}: {LATENCY['rime'](n) / std[n]:.1f}x over RIME, "
                        f"{LATENCY['haj_ali'](n) / std[n]:.1f}x over Haj-Ali et al.",
                        file=out,
                    )
                print(file=out)
        if "area" in which:
            if not args.csv:
                print("Area (memristors per row)", file=out)
            out.write(_render(heads, area, args.csv))
            if not args.csv:
                print(file=out)
    if "matvec" in which:
        rows, good = matvec_table(args.vec_n, args.vec_N)
        ok &= good
        if not args.csv:
            print(f"Matrix-vector multiplication (n={args.vec_n}, N={args.vec_N})", file=out)
        out.write(_render(["Algorithm", "Latency", "Crossbar", "Partitions"], rows, args.csv))
        if not args.csv:
            fp = floatpim_cost(args.vec_n, args.vec_N)[0]
            fused = predicted_matvec_cycles(args.vec_n, args.vec_N)
            naive = naive_substitution_cycles(args.vec_n, args.vec_N)
            print(f"speedup over FloatPIM: {fp / fused:.1f}x fused, {fp / naive:.1f}x naive substitution", file=out)
    return 0 if ok else 1


# ---- verify ----


def _default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer") from None


def verify_multiplier(n: int, variant: str, samples: int, seed: int):
    """Returns a list of (check name, passed) for one configuration."""
    config = MultiplierConfig(n, variant)
    if n <= 4:
        pairs = list(itertools.product(range(1 << n), repeat=2))
        mode = "exhaustive"
    else:
        rng = random.Random(seed)
        pairs = [(rng.randrange(1 << n), rng.randrange(1 << n)) for _ in range(samples)]
        mode = "sampled"
    a_vals, b_vals = [p[0] for p in pairs], [p[1] for p in pairs]
    invariant_ok = True

    def probe(k, state, lay):
        nonlocal invariant_ok
        emitted, s, c = stage_invariant_probe(state, lay, k)
        mask = (1 << k) - 1
        for a, b, e, sv, cv in zip(a_vals, b_vals, emitted, s, c):
            if e + ((sv + cv) << k) != a * (b & mask):
                invariant_ok = False

    products, report = run_multiply_batch(a_vals, b_vals, config, probe=probe)
    model = "multpim" if variant == "standard" else "multpim_area"
    area = predicted_memristors(config)
    checks = [
        (f"{mode} products ({len(pairs)} pairs)", products == [a * b for a, b in pairs]),
        (f"cycles {report.cycles} == {predicted_cycles(config)}", report.cycles == predicted_cycles(config)),
        (f"memristors {report.memristors_per_row} == {area}", report.memristors_per_row == area),
        ("stage invariant", invariant_ok),
    ]
    if n % 2 == 0:
        checks.append((f"layout {area} == closed form {AREA[model](n)}", area == AREA[model](n)))
    if variant == "standard":
        checks.append((f"partitions {report.partitions} == {n - 1}", report.partitions == n - 1))
    return checks


def cmd_verify(args, out) -> int:
    if args.n < 2:
        raise UsageError("N must be at least 2")
    seed = _default_seed() if args.seed is None else args.seed
    variants = VARIANTS if args.variant == "both" else (args.variant,)
    ok = True
    print(f"N={args.n} seed={seed}", file=out)
    for variant in variants:
        for name, passed in verify_multiplier(args.n, variant, args.samples, seed):
            print(f"{'PASS' if passed else 'FAIL'} {variant}: {name}", file=out)
            ok &= passed
    return 0 if ok else 1


# ---- trace-replay ----


def replay(schedule: Schedule, rows: int = 1, seed: int = 0):
    """Re-run a schedule on a fresh crossbar sized from the schedule itself.

    Columns read before anything defines them are taken to be operands and
    are filled with seeded random bits. Returns the CostReport.
    """
    if not len(schedule):
        raise UsageError("trace is empty")
    boundaries = list(schedule[0].config.boundaries)
    cols = 1 + max(
        [c for instr in schedule for ex in instr.executions for c in ex.columns] + boundaries
    )
    defined, operands = set(), set()
    for instr in schedule:
        for ex in instr.executions:
            if isinstance(ex, GateExecution):
                reads = ex.inputs + ((ex.output,) if ex.init_mode is InitMode.NO_INIT else ())
                operands.update(c for c in reads if c not in defined)
        for ex in instr.executions:
            defined.update(ex.columns)
    masks = [r for instr in schedule for ex in instr.executions for r in (ex.rows or ())]
    rows = max([rows] + [r + 1 for r in masks])
    state = CrossbarState(rows, cols, boundaries)
    rng = random.Random(seed)
    for c in sorted(operands):
        state.write_column(c, [rng.randrange(2) for _ in range(rows)])
    state.run(schedule)
    return state.cost_report()


def cmd_trace_replay(args, out) -> int:
    try:
        with open(args.path, encoding="utf-8") as fh:
            schedule = Schedule.load(fh)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read trace {args.path}: {exc}") from None
    try:
        report = replay(schedule, args.rows, args.seed if args.seed is not None else _default_seed())
    except SchedulingError as exc:
        print(f"FAIL illegal cycle: {exc}", file=out)
        return 1
    print(f"cycles       {report.cycles}", file=out)
    print(f"memristors   {report.memristors_per_row}", file=out)
    print(f"partitions   {report.partitions}", file=out)
    ok = True
    for name, want, got in (
        ("cycles", args.expect_cycles, report.cycles),
        ("memristors", args.expect_memristors, report.memristors_per_row),
    ):
        if want is not None and want != got:
            print(f"FAIL {name} {got} != expected {want}", file=out)
            ok = False
    return 0 if ok else 1


# ---- entry point ----


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pimsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mult", help="multiply two N-bit numbers on a simulated row")
    m.add_argument("--n", type=int, default=32, help="operand width N")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--variant", choices=VARIANTS, default="standard")
    m.add_argument("--trace", help="write one JSON record per cycle to this file")
    m.set_defaults(func=cmd_mult)

    mv = sub.add_parser("matvec", help="matrix-vector product, one matrix row per crossbar row")
    mv.add_argument("--N", type=int, default=8, help="element width")
    mv.add_argument("--A", help='matrix rows separated by ";", elements by "," (decimal or hex)')
    mv.add_argument("--x", help="vector elements separated by ','")
    mv.add_argument("--input", help='JSON file {"A": [[...]], "x": [...]}')
    mv.add_argument("--variant", choices=VARIANTS, default="standard")
    mv.add_argument("--trace")
    mv.set_defaults(func=cmd_matvec)

    t = sub.add_parser("tables", help="reproduce the latency, area and matrix-vector tables")
    t.add_argument("--which", choices=("latency", "area", "matvec", "all"), default="all")
    t.add_argument("--N", type=int, nargs="+", help="widths for the multiplier tables (default 16 32)")
    t.add_argument("--vec-n", type=int, default=8)
    t.add_argument("--vec-N", type=int, default=32)
    t.add_argument("--csv", action="store_true", help="comma-separated output")
    t.set_defaults(func=cmd_tables)

    v = sub.add_parser("verify", help="check products, costs and the stage invariant")
    v.add_argument("--n", type=int, default=8)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    v.add_argument("--variant", choices=VARIANTS + ("both",), default="both")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("trace-replay", help="re-execute a trace file and report its costs")
    r.add_argument("path")
    r.add_argument("--rows", type=int, default=1)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--expect-cycles", type=int)
    r.add_argument("--expect-memristors", type=int)
    r.set_defaults(func=cmd_trace_replay)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
