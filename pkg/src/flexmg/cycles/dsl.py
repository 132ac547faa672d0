"""Text format for cycle programs.

One program per line, whitespace separated tokens::

    s:gsf:0.80 d s:jac:0.50 u:1.15    # comment

``s:<gsf|gsb|jac>:<w>`` smooth, ``d`` descend, ``u:<w>`` ascend with
scaled correction, ``bv:<w>`` fixed V(1,1) below the flexible region,
``cs`` coarse solve, ``n`` no-op.
"""
from __future__ import annotations

from flexmg.cycles.program import (
    DEFAULT_FLEX_LEVELS,
    Ascend,
    BaseV,
    CoarseSolve,
    CycleProgram,
    Descend,
    NoOp,
    Smooth,
    SmootherKind,
    snap_weight,
    validate,
)

_KINDS = {k.value: k for k in SmootherKind}


class DslError(ValueError):
    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"line {line}, column {column}: {message}")


def _weight(text, line, col):
    try:
        w = float(text)
    except ValueError:
        raise DslError(f"bad weight {text!r}", line, col) from None
    try:
        return snap_weight(w)
    except ValueError:
        raise DslError(f"weight {text} is off the grid 0.10..1.90 step 0.05", line, col) from None


def _token(tok, line, col):
    parts = tok.lower().split(":")
    head = parts[0]
    if head in ("d", "cs", "n") and len(parts) == 1:
        return {"d": Descend(), "cs": CoarseSolve(), "n": NoOp()}[head]
    if head == "s" and len(parts) == 3:
        if parts[1] not in _KINDS:
            raise DslError(f"unknown smoother {parts[1]!r}", line, col)
        return Smooth(_KINDS[parts[1]], _weight(parts[2], line, col))
    if head in ("u", "bv") and len(parts) == 2:
        w = _weight(parts[1], line, col)
        return Ascend(w) if head == "u" else BaseV(w)
    raise DslError(f"unknown token {tok!r}", line, col)


def _tokens(line_text):
    col = 0
    for piece in line_text.split():
        col = line_text.index(piece, col)
        yield piece, col + 1
        col += len(piece)


def _parse_line(text, line, hierarchy_depth, flex_levels):
    body = text.split("#", 1)[0]
    steps, cols = [], []
    for tok, col in _tokens(body):
        steps.append(_token(tok, line, col))
        cols.append(col)
    program = CycleProgram(tuple(steps), flex_levels, hierarchy_depth)
    errors = validate(program, hierarchy_depth, flex_levels)
    if errors:
        first = errors[0]
        col = cols[first.index] if first.index is not None else 1
        raise DslError("; ".join(str(e) for e in errors), line, col)
    return program


def parse_programs(text, hierarchy_depth=None, flex_levels=DEFAULT_FLEX_LEVELS):
    """Parse every non-blank, non-comment line into a program."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.split("#", 1)[0].strip():
            out.append(_parse_line(raw, lineno, hierarchy_depth, flex_levels))
    return out


def parse_dsl(text, hierarchy_depth=None, flex_levels=DEFAULT_FLEX_LEVELS):
    programs = parse_programs(text, hierarchy_depth, flex_levels)
    if len(programs) != 1:
        raise DslError(f"expected exactly one program, found {len(programs)}")
    return programs[0]


def emit_step(st):
    if isinstance(st, Smooth):
        return f"s:{st.kind.value}:{st.weight:.2f}"
    if isinstance(st, Descend):
        return "d"
    if isinstance(st, Ascend):
        return f"u:{st.weight:.2f}"
    if isinstance(st, BaseV):
        return f"bv:{st.weight:.2f}"
    if isinstance(st, CoarseSolve):
        return "cs"
    if isinstance(st, NoOp):
        return "n"
    raise TypeError(f"not a step: {st!r}")


def emit_dsl(program):
    steps = program.steps if isinstance(program, CycleProgram) else program
    return " ".join(emit_step(st) for st in steps)


def read_cycle_file(path, hierarchy_depth=None, flex_levels=DEFAULT_FLEX_LEVELS):
    with open(path) as fh:
        return parse_programs(fh.read(), hierarchy_depth, flex_levels)


def write_cycle_file(path, program, comment=None):
    with open(path, "w") as fh:
        if comment:
            for ln in comment.splitlines():
                fh.write(f"# {ln}\n")
        fh.write(emit_dsl(program) + "\n")
