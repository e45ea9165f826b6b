"""An ordered list of cycles plus helpers to inspect and serialize it."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .crossbar import CycleInstruction, GateExecution, from_record, to_record


@dataclass
class Schedule:
    instructions: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __getitem__(self, i):
        return self.instructions[i]

    def append(self, instr: CycleInstruction) -> None:
        self.instructions.append(instr)

    def extend(self, instrs: Iterable[CycleInstruction]) -> None:
        self.instructions.extend(instrs)

    def phase_counts(self) -> Counter:
        return Counter(i.phase or "untagged" for i in self.instructions)

    def gate_kinds(self) -> set:
        return {
            ex.kind
            for instr in self.instructions
            for ex in instr.executions
            if isinstance(ex, GateExecution)
        }

    def cycles_excluding(self, *phases: str) -> int:
        return sum(1 for i in self.instructions if i.phase not in phases)

    def dump(self, fh: TextIO) -> None:
        for n, instr in enumerate(self.instructions):
            fh.write(json.dumps(to_record(n, instr)) + "\n")

    @classmethod
    def load(cls, fh: TextIO) -> "Schedule":
        return cls([from_record(json.loads(line)) for line in fh if line.strip()])
