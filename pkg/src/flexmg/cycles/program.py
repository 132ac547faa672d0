"""Flat step-list representation of a flexible multigrid cycle."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

WEIGHT_GRID = tuple(round(0.10 + 0.05 * k, 2) for k in range(37))
DEFAULT_FLEX_LEVELS = 5
MAX_STEPS = 40


class SmootherKind(enum.Enum):
    GS_FORWARD = "gsf"
    GS_BACKWARD = "gsb"
    JACOBI = "jac"

    @property
    def mnemonic(self):
        return self.value


GSF, GSB, JAC = SmootherKind.GS_FORWARD, SmootherKind.GS_BACKWARD, SmootherKind.JACOBI


def on_grid(w, grid=WEIGHT_GRID):
    return any(abs(w - g) < 1e-9 for g in grid)


def snap_weight(w, grid=WEIGHT_GRID):
    """Return the grid value equal to ``w`` (raises if off grid)."""
    for g in grid:
        if abs(w - g) < 1e-9:
            return g
    raise ValueError(f"weight {w} is not on the grid")


def weight_step(w, direction, grid=WEIGHT_GRID):
    """Move ``w`` one grid step up (+1) or down (-1), clamped at the ends."""
    i = grid.index(snap_weight(w, grid))
    return grid[min(max(i + direction, 0), len(grid) - 1)]


@dataclass(frozen=True)
class Smooth:
    kind: SmootherKind
    weight: float


@dataclass(frozen=True)
class Descend:
    pass


@dataclass(frozen=True)
class Ascend:
    weight: float


@dataclass(frozen=True)
class BaseV:
    weight: float


@dataclass(frozen=True)
class CoarseSolve:
    pass


@dataclass(frozen=True)
class NoOp:
    pass


@dataclass(frozen=True)
class CycleProgram:
    steps: tuple
    flex_levels: int = field(default=DEFAULT_FLEX_LEVELS, compare=False)
    hierarchy_depth: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def with_depth(self, depth):
        return CycleProgram(self.steps, self.flex_levels, depth)

    def level_trace(self):
        return level_trace(self.steps)

    def max_level(self):
        return max([0] + level_trace(self.steps))


def level_trace(steps):
    """Level after each step, starting from level 0."""
    level, out = 0, []
    for st in steps:
        if isinstance(st, Descend):
            level += 1
        elif isinstance(st, Ascend):
            level -= 1
        out.append(level)
    return out


@dataclass(frozen=True)
class Violation:
    index: int | None
    message: str

    def __str__(self):
        where = "program" if self.index is None else f"step {self.index}"
        return f"{where}: {self.message}"


class ProgramError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def validate(program, hierarchy_depth=None, flex_levels=None, max_steps=None, grid=WEIGHT_GRID):
    """Return every structural violation of ``program`` (empty list when valid).

    ``hierarchy_depth=None`` skips the checks that need a concrete hierarchy
    (placement of ``bv`` and ``cs``, depth bound below the flexible region).
    """
    steps = program.steps if isinstance(program, CycleProgram) else tuple(program)
    if flex_levels is None:
        flex_levels = program.flex_levels if isinstance(program, CycleProgram) else DEFAULT_FLEX_LEVELS
    if hierarchy_depth is None and isinstance(program, CycleProgram):
        hierarchy_depth = program.hierarchy_depth
    errors = []
    if not steps:
        errors.append(Violation(None, "empty program"))
    if max_steps is not None and len(steps) > max_steps:
        errors.append(Violation(None, f"program has {len(steps)} steps, limit is {max_steps}"))
    top = flex_levels - 1 if hierarchy_depth is None else min(flex_levels, hierarchy_depth) - 1
    level = 0
    for i, st in enumerate(steps):
        if isinstance(st, (Smooth, Ascend, BaseV)) and not on_grid(st.weight, grid):
            errors.append(Violation(i, f"weight {st.weight} is off the weight grid"))
        if isinstance(st, Smooth) and not isinstance(st.kind, SmootherKind):
            errors.append(Violation(i, f"unknown smoother {st.kind!r}"))
        if isinstance(st, Descend):
            level += 1
            if level > top:
                errors.append(Violation(i, f"level {level} exceeds flexible region (max level {top})"))
        elif isinstance(st, Ascend):
            level -= 1
            if level < 0:
                errors.append(Violation(i, "level underflow (ascend above the finest level)"))
                level = 0
        elif isinstance(st, BaseV):
            if level != flex_levels - 1:
                errors.append(Violation(i, f"bv only allowed at level {flex_levels - 1}, found at level {level}"))
            elif hierarchy_depth is not None and hierarchy_depth <= flex_levels:
                errors.append(Violation(i, f"bv needs a hierarchy deeper than {flex_levels} levels"))
        elif isinstance(st, CoarseSolve):
            if hierarchy_depth is None:
                if level > flex_levels - 1:
                    errors.append(Violation(i, "cs outside the flexible region"))
            elif hierarchy_depth > flex_levels:
                errors.append(Violation(i, "cs not allowed when the hierarchy extends below the flexible region"))
            elif level != hierarchy_depth - 1:
                errors.append(Violation(i, f"cs only allowed on the coarsest level {hierarchy_depth - 1}"))
        elif not isinstance(st, (Smooth, NoOp)):
            errors.append(Violation(i, f"unknown step {st!r}"))
    if level != 0:
        errors.append(Violation(None, f"final level {level} != 0 (unbalanced descend/ascend)"))
    return errors


def check(program, hierarchy_depth=None, flex_levels=None, max_steps=None):
    errors = validate(program, hierarchy_depth, flex_levels, max_steps)
    if errors:
        raise ProgramError(errors)
    return program


def standard_cycle(nu1, nu2, pre=GSF, post=GSB, weight=1.0, depth=2, flex_levels=DEFAULT_FLEX_LEVELS):
    """V(nu1, nu2) unrolled into a flat step list.

    Below the flexible region the cycle hands over to ``bv`` (fixed V(1,1));
    in a shallow hierarchy the bottom is an exact coarse solve.
    """
    if nu1 < 0 or nu2 < 0:
        raise ValueError("sweep counts must be non-negative")
    top = min(flex_levels, depth) - 1
    weight = snap_weight(weight)

    def build(level):
        if level == top and depth <= flex_levels:
            return [CoarseSolve()]
        pre_s = [Smooth(pre, weight)] * nu1
        post_s = [Smooth(post, weight)] * nu2
        if level == top:
            return pre_s + [BaseV(1.0)] + post_s
        return pre_s + [Descend()] + build(level + 1) + [Ascend(1.0)] + post_s

    return CycleProgram(tuple(build(0)), flex_levels, depth)
