from flexmg.cycles.dsl import DslError, emit_dsl, parse_dsl, parse_programs, read_cycle_file, write_cycle_file
from flexmg.cycles.enumeration import enumerate_programs
from flexmg.cycles.grammar import Grammar, Node, generate
from flexmg.cycles.program import (
    DEFAULT_FLEX_LEVELS,
    GSB,
    GSF,
    JAC,
    MAX_STEPS,
    WEIGHT_GRID,
    Ascend,
    BaseV,
    CoarseSolve,
    CycleProgram,
    Descend,
    NoOp,
    ProgramError,
    Smooth,
    SmootherKind,
    check,
    level_trace,
    standard_cycle,
    validate,
)
from flexmg.cycles.render import to_dot

__all__ = [
    "DEFAULT_FLEX_LEVELS", "GSB", "GSF", "JAC", "MAX_STEPS", "WEIGHT_GRID",
    "Ascend", "BaseV", "CoarseSolve", "CycleProgram", "Descend", "DslError", "Grammar", "Node", "NoOp",
    "ProgramError", "Smooth", "SmootherKind", "check", "emit_dsl", "enumerate_programs", "generate", "level_trace", "parse_dsl",
    "parse_programs", "read_cycle_file", "standard_cycle", "to_dot", "validate", "write_cycle_file",
]
