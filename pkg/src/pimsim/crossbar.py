"""Partitioned crossbar state, cycle legality checks and cost accounting."""

from __future__ import annotations

import bisect
import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .gates import GateKind, eval_gate


class ConfigurationError(ValueError):
    """Bad crossbar geometry or a transistor configuration that does not fit it."""


class SchedulingError(RuntimeError):
    """A cycle broke one of the legality rules; ``rule`` names which one."""

    def __init__(self, rule: str, message: str):
        super().__init__(f"rule ({rule}): {message}")
        self.rule = rule


class UndefinedCellError(SchedulingError):
    def __init__(self, message: str):
        super().__init__("undefined", message)


class Partitioning:
    """Column geometry: ``cols`` columns cut into partitions at ``boundaries``.

    A boundary at index j separates column j-1 from column j.
    """

    def __init__(self, cols: int, boundaries: Iterable[int] = ()):
        boundaries = tuple(boundaries)
        if cols < 1:
            raise ConfigurationError("cols must be positive")
        if any(b <= 0 or b >= cols for b in boundaries):
            raise ConfigurationError(f"boundaries must lie strictly inside (0, {cols})")
        if any(x >= y for x, y in zip(boundaries, boundaries[1:])):
            raise ConfigurationError("boundaries must be strictly increasing")
        self.cols = cols
        self.boundaries = boundaries
        self.starts = (0,) + boundaries
        self._part = np.repeat(
            np.arange(len(self.starts)), np.diff(self.starts + (cols,))
        )

    @property
    def count(self) -> int:
        return len(self.starts)

    def partition_of(self, col: int) -> int:
        return bisect.bisect_right(self.boundaries, col)

    def column(self, partition: int, offset: int) -> int:
        col = self.starts[partition] + offset
        end = self.starts[partition + 1] if partition + 1 < self.count else self.cols
        if not 0 <= offset or col >= end:
            raise ConfigurationError(f"offset {offset} outside partition {partition}")
        return col

    def segment_ids(self, config: "TransistorConfig") -> np.ndarray:
        """Maximal conducting segment id of every column under ``config``."""
        if tuple(config.boundaries) != self.boundaries:
            raise ConfigurationError("transistor config keys differ from the crossbar boundaries")
        cuts = np.concatenate(([0], np.cumsum(~np.asarray(config.flags, dtype=bool))))
        return cuts[self._part]

    def config(self, conducting: Iterable[int] = ()) -> "TransistorConfig":
        """Config with the listed boundaries conducting and every other one isolated."""
        conducting = set(conducting)
        unknown = conducting - set(self.boundaries)
        if unknown:
            raise ConfigurationError(f"not boundaries: {sorted(unknown)}")
        return TransistorConfig(self.boundaries, tuple(b in conducting for b in self.boundaries))

    def bridging(self, columns: Iterable[int]) -> set:
        """Boundaries that must conduct so that all ``columns`` share a segment."""
        cols = list(columns)
        lo, hi = min(cols), max(cols)
        return {b for b in self.boundaries if lo < b <= hi}


@dataclass(frozen=True)
class TransistorConfig:
    boundaries: tuple
    flags: tuple  # True = conducting, aligned with boundaries

    @property
    def conducting(self) -> Mapping[int, bool]:
        return dict(zip(self.boundaries, self.flags))


class InitMode(enum.Enum):
    STANDARD = "standard"
    NO_INIT = "no_init"


def _rows_key(rows):
    return None if rows is None else frozenset(rows)


@dataclass(frozen=True)
class GateExecution:
    kind: GateKind
    inputs: tuple
    output: int
    rows: frozenset | None = None  # None means every row
    init_mode: InitMode = InitMode.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rows", _rows_key(self.rows))

    @property
    def columns(self) -> tuple:
        return self.inputs + (self.output,)


@dataclass(frozen=True)
class InitExecution:
    """Set every listed column to ``value`` in the masked rows.

    All targets share one row mask; the target set is ``rows x columns``.
    """

    columns: tuple
    value: int = 1
    rows: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", _rows_key(self.rows))
        if self.value not in (0, 1):
            raise ValueError("init value must be 0 or 1")

    @property
    def targets(self):
        return [(self.rows, c) for c in self.columns]


@dataclass(frozen=True)
class CycleInstruction:
    config: TransistorConfig
    executions: tuple
    phase: str = ""

    def __post_init__(self):
        object.__setattr__(self, "executions", tuple(self.executions))


@dataclass
class CostReport:
    cycles: int = 0
    memristors_per_row: int = 0
    partitions: int = 0
    phase_breakdown: dict = field(default_factory=dict)


class CrossbarState:
    """A rows x cols grid of bits with partition boundaries and cost counters."""

    def __init__(self, rows: int, cols: int, boundaries: Iterable[int] = ()):
        if rows < 1:
            raise ConfigurationError("rows must be positive")
        self.layout = Partitioning(cols, boundaries)
        self.rows = rows
        self.cols = cols
        self.cells = np.zeros((rows, cols), dtype=np.uint8)
        self.defined = np.zeros((rows, cols), dtype=bool)
        # set by an init-to-1 and cleared by any later write
        self.fresh = np.zeros((rows, cols), dtype=bool)
        self.cycles = 0
        self.touched: set = set()
        self.phases: Counter = Counter()
        self.trace: TextIO | None = None
        self._seg_cache: dict = {}

    @property
    def boundaries(self) -> tuple:
        return self.layout.boundaries

    # ---- plain reads and writes (free) ----

    def _check_coord(self, r, c):
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"cell ({r}, {c}) outside {self.rows}x{self.cols} crossbar")

    def write_cells(self, assignments: Iterable[tuple]) -> None:
        for r, c, bit in assignments:
            self._check_coord(r, c)
            self.cells[r, c] = 1 if bit else 0
            self.defined[r, c] = True
            self.fresh[r, c] = False
            self.touched.add(c)

    def write_column(self, col: int, bits: Sequence[int]) -> None:
        """Write one bit per row into ``col`` (vectorised input load)."""
        self._check_coord(0, col)
        self.cells[:, col] = np.asarray(bits, dtype=np.uint8)
        self.defined[:, col] = True
        self.fresh[:, col] = False
        self.touched.add(col)

    def read_cells(self, coords: Iterable[tuple]) -> list:
        out = []
        for r, c in coords:
            self._check_coord(r, c)
            if not self.defined[r, c]:
                raise UndefinedCellError(f"cell ({r}, {c}) was never written or initialized")
            out.append(int(self.cells[r, c]))
        return out

    def read_column(self, col: int) -> np.ndarray:
        if not self.defined[:, col].all():
            raise UndefinedCellError(f"column {col} holds undefined cells")
        return self.cells[:, col].copy()

    def cost_report(self) -> CostReport:
        return CostReport(
            cycles=self.cycles,
            memristors_per_row=len(self.touched),
            partitions=self.layout.count,
            phase_breakdown=dict(self.phases),
        )

    # ---- one clock cycle ----

    def _segments(self, config: TransistorConfig) -> np.ndarray:
        seg = self._seg_cache.get(config)
        if seg is None:
            seg = self._seg_cache[config] = self.layout.segment_ids(config)
        return seg

    def _row_index(self, rows):
        if rows is None:
            return slice(None)
        idx = np.fromiter(sorted(rows), dtype=np.intp)
        if len(idx) == 0 or idx[0] < 0 or idx[-1] >= self.rows:
            raise SchedulingError("c", f"row mask {sorted(rows)} outside 0..{self.rows - 1}")
        return idx

    def validate(self, instr: CycleInstruction) -> list:
        """Check every legality rule; return per-execution row indices."""
        try:
            seg = self._segments(instr.config)
        except ConfigurationError as exc:
            raise SchedulingError("a", str(exc)) from None
        users: dict = {}
        row_idx = []
        for i, ex in enumerate(instr.executions):
            ridx = self._row_index(ex.rows)
            row_idx.append(ridx)
            if isinstance(ex, InitExecution):
                cols = ex.columns
                if len(set(cols)) != len(cols):
                    raise SchedulingError("d", f"duplicate init targets {cols}")
                for c in cols:
                    self._check_coord(0, c)
                touched = {int(seg[c]) for c in cols}
            else:
                if len(ex.inputs) != ex.kind.arity:
                    raise SchedulingError("c", f"{ex.kind.value} given {len(ex.inputs)} inputs")
                if ex.output in ex.inputs or len(set(ex.inputs)) != len(ex.inputs):
                    raise SchedulingError("c", f"columns of one gate must be distinct: {ex.columns}")
                for c in ex.columns:
                    self._check_coord(0, c)
                touched = {int(seg[c]) for c in ex.columns}
                if len(touched) != 1:
                    raise SchedulingError(
                        "a", f"{ex.kind.value} {ex.columns} spans isolated partitions"
                    )
                for c in ex.inputs:
                    if not self.defined[ridx, c].all():
                        raise UndefinedCellError(f"{ex.kind.value} reads undefined column {c}")
                if ex.init_mode is InitMode.STANDARD:
                    if not self.fresh[ridx, ex.output].all():
                        raise SchedulingError(
                            "e", f"{ex.kind.value} output column {ex.output} was not initialized"
                        )
                elif not self.defined[ridx, ex.output].all():
                    raise SchedulingError(
                        "e", f"no-init output column {ex.output} holds undefined cells"
                    )
            for s in touched:
                users.setdefault(s, []).append((i, ex.rows))
        for s, entries in users.items():
            for a in range(len(entries)):
                for b in range(a + 1, len(entries)):
                    (ia, ra), (ib, rb) = entries[a], entries[b]
                    if ia != ib and (ra is None or rb is None or ra & rb):
                        raise SchedulingError(
                            "b" if not _both_init(instr, ia, ib) else "d",
                            f"executions {ia} and {ib} share a conducting segment",
                        )
        return row_idx

    def apply_cycle(self, instr: CycleInstruction) -> None:
        row_idx = self.validate(instr)
        results = []
        for ex, ridx in zip(instr.executions, row_idx):
            if isinstance(ex, GateExecution):
                val = eval_gate(ex.kind, [self.cells[ridx, c] for c in ex.inputs])
                if ex.init_mode is InitMode.NO_INIT:
                    val = val & self.cells[ridx, ex.output]
                results.append((ridx, ex.output, val))
        for ex, ridx in zip(instr.executions, row_idx):
            if isinstance(ex, InitExecution):
                cols = list(ex.columns)
                if isinstance(ridx, slice):
                    sel = (ridx, cols)
                else:
                    sel = np.ix_(ridx, cols)
                self.cells[sel] = ex.value
                self.defined[sel] = True
                self.fresh[sel] = bool(ex.value)
                self.touched.update(cols)
            else:
                self.touched.update(ex.columns)
        for ridx, col, val in results:
            self.cells[ridx, col] = val
            self.defined[ridx, col] = True
            self.fresh[ridx, col] = False
        self.cycles += 1
        self.phases[instr.phase or "untagged"] += 1
        if self.trace is not None:
            self.trace.write(json.dumps(to_record(self.cycles - 1, instr)) + "\n")

    def run(self, instructions: Iterable[CycleInstruction]) -> None:
        for instr in instructions:
            self.apply_cycle(instr)


def _both_init(instr, ia, ib):
    return isinstance(instr.executions[ia], InitExecution) and isinstance(
        instr.executions[ib], InitExecution
    )


# ---- functional interface ----


def create(rows: int, cols: int, boundaries: Iterable[int] = ()) -> CrossbarState:
    return CrossbarState(rows, cols, boundaries)


def write_cells(state: CrossbarState, assignments) -> CrossbarState:
    state.write_cells(assignments)
    return state


def apply_cycle(state: CrossbarState, instr: CycleInstruction) -> CrossbarState:
    state.apply_cycle(instr)
    return state


def read_cells(state: CrossbarState, coords) -> list:
    return state.read_cells(coords)


def cost_report(state: CrossbarState) -> CostReport:
    return state.cost_report()


# ---- building cycles ----


def make_cycle(layout: Partitioning, executions, phase: str = "", extra_conducting=()) -> CycleInstruction:
    """Build a cycle whose config conducts just enough for each gate.

    Only the boundaries spanned by each gate's columns conduct; legality is
    still checked independently when the cycle is applied.
    """
    conducting = set(extra_conducting)
    for ex in executions:
        if isinstance(ex, GateExecution):
            conducting |= layout.bridging(ex.columns)
    return CycleInstruction(layout.config(conducting), tuple(executions), phase)


def merge_cycles(layout: Partitioning, cycles: Sequence[CycleInstruction], phase: str | None = None):
    """Fuse several cycles into one, unioning executions and conducting boundaries."""
    execs = [ex for c in cycles for ex in c.executions]
    conducting = {b for c in cycles for b, on in c.config.conducting.items() if on}
    if phase is None:
        phase = next((c.phase for c in cycles if c.phase), "")
    return CycleInstruction(layout.config(conducting), tuple(execs), phase)


# ---- trace records ----


def _rows_out(rows):
    return "all" if rows is None else sorted(rows)


def _rows_in(rows):
    return None if rows == "all" else frozenset(rows)


def to_record(cycle: int, instr: CycleInstruction) -> dict:
    execs = []
    for ex in instr.executions:
        if isinstance(ex, InitExecution):
            execs.append(
                {
                    "kind": f"INIT{ex.value}",
                    "inputs": [],
                    "output": list(ex.columns),
                    "rows": _rows_out(ex.rows),
                    "init_mode": InitMode.STANDARD.value,
                }
            )
        else:
            execs.append(
                {
                    "kind": ex.kind.value,
                    "inputs": list(ex.inputs),
                    "output": ex.output,
                    "rows": _rows_out(ex.rows),
                    "init_mode": ex.init_mode.value,
                }
            )
    config = {str(b): ("conducting" if on else "isolated") for b, on in instr.config.conducting.items()}
    return {"cycle": cycle, "config": config, "executions": execs, "phase": instr.phase}


def from_record(record: dict) -> CycleInstruction:
    items = sorted((int(b), v == "conducting") for b, v in record["config"].items())
    config = TransistorConfig(tuple(b for b, _ in items), tuple(on for _, on in items))
    execs = []
    for e in record["executions"]:
        if e["kind"].startswith("INIT"):
            execs.append(InitExecution(tuple(e["output"]), int(e["kind"][4:]), _rows_in(e["rows"])))
        else:
            execs.append(
                GateExecution(
                    GateKind(e["kind"]),
                    tuple(e["inputs"]),
                    e["output"],
                    _rows_in(e["rows"]),
                    InitMode(e["init_mode"]),
                )
            )
    return CycleInstruction(config, tuple(execs), record.get("phase", ""))
