"""Cycle-accurate stateful-logic crossbar simulator with partition-parallel multiplier schedules."""
