"""Brute-force enumeration of valid programs over tiny alphabets.

Independent of the grammar: it walks every token string and keeps those the
validator accepts. Used as a test oracle.
"""
from __future__ import annotations

import itertools

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
    validate,
)

MAX_STRINGS = 2_000_000


def alphabet(kinds, weights):
    out = [Smooth(k, w) for k in kinds for w in weights]
    out += [NoOp(), Descend(), CoarseSolve()]
    out += [Ascend(w) for w in weights]
    out += [BaseV(w) for w in weights]
    return out


def enumerate_programs(max_steps, depth, kinds=(SmootherKind.GS_FORWARD,), weights=(1.0,),
                       flex_levels=DEFAULT_FLEX_LEVELS):
    alpha = alphabet(kinds, weights)
    total = sum(len(alpha) ** k for k in range(1, max_steps + 1))
    if total > MAX_STRINGS:
        raise ValueError(f"enumeration would visit {total} strings (limit {MAX_STRINGS})")
    found = []
    for length in range(1, max_steps + 1):
        for steps in itertools.product(alpha, repeat=length):
            if not validate(steps, depth, flex_levels):
                found.append(CycleProgram(steps, flex_levels, depth))
    return found
