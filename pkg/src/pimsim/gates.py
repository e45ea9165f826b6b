"""Stateful gate kinds, their truth functions and the allowed gate profiles."""

from __future__ import annotations

import enum
from typing import Sequence


class GateError(ValueError):
    """Raised on arity mismatches and unknown or violated gate profiles."""


class GateKind(enum.Enum):
    NOT = "NOT"
    NOR2 = "NOR2"
    OR2 = "OR2"
    NAND2 = "NAND2"
    MIN3 = "MIN3"
    # simulation-only sugar, never part of a hardware profile
    COPY = "COPY"

    @property
    def arity(self) -> int:
        return _ARITY[self]


_ARITY = {
    GateKind.NOT: 1,
    GateKind.NOR2: 2,
    GateKind.OR2: 2,
    GateKind.NAND2: 2,
    GateKind.MIN3: 3,
    GateKind.COPY: 1,
}


def _min3(a, b, c):
    return 1 ^ ((a & b) | (a & c) | (b & c))


_FUNCS = {
    GateKind.NOT: lambda a: 1 ^ a,
    GateKind.NOR2: lambda a, b: 1 ^ (a | b),
    GateKind.OR2: lambda a, b: a | b,
    GateKind.NAND2: lambda a, b: 1 ^ (a & b),
    GateKind.MIN3: _min3,
    GateKind.COPY: lambda a: a,
}


def eval_gate(kind: GateKind, inputs: Sequence):
    """Evaluate ``kind`` on ``inputs``.

    Works on plain 0/1 ints and equally on numpy uint8 arrays holding 0/1,
    which is how the crossbar evaluates a gate across many rows at once.
    """
    if len(inputs) != kind.arity:
        raise GateError(f"{kind.value} takes {kind.arity} inputs, got {len(inputs)}")
    return _FUNCS[kind](*inputs)


PROFILES = {
    "not_min3": frozenset({GateKind.NOT, GateKind.MIN3}),
    "extended": frozenset(
        {GateKind.NOT, GateKind.NOR2, GateKind.OR2, GateKind.NAND2, GateKind.MIN3}
    ),
}


def gate_profile(name: str) -> frozenset:
    try:
        return PROFILES[name]
    except KeyError:
        raise GateError(f"unknown gate profile {name!r}; expected one of {sorted(PROFILES)}") from None


def check_profile(kinds, name: str) -> None:
    """Raise GateError if any kind in ``kinds`` lies outside profile ``name``."""
    allowed = gate_profile(name)
    bad = sorted({k.value for k in kinds} - {k.value for k in allowed})
    if bad:
        raise GateError(f"gates {bad} are not allowed under profile {name!r}")
