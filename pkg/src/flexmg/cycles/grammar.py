"""Level-indexed context-free grammar over cycle programs.

Productions, for every level ``l`` of the flexible region::

    Program -> Step_0 Seq_0
    Seq_l   -> Step_l Seq_l | <empty>
    Step_l  -> s:<kind>:<w> | n
             | d Seq_{l+1} u:<w>        (l below the deepest flexible level)
             | bv:<w>                   (l = flex_levels-1, deep hierarchy)
             | cs                       (l = coarsest level, shallow hierarchy)

Derivation trees store ``Seq`` nodes with their steps as a flat child list
(the right recursion unrolled), so tree depth tracks nesting rather than
sequence length.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from flexmg.cycles.program import (
    DEFAULT_FLEX_LEVELS,
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
    validate,
)

SMOOTH, NOOP, CGC, BASEV, COARSE = "smooth", "noop", "cgc", "basev", "coarse"


@dataclass(frozen=True)
class Node:
    """Derivation-tree node. ``symbol`` is ``"seq"`` or ``"step"``."""

    symbol: str
    level: int
    production: str = "seq"
    children: tuple = ()
    kind: SmootherKind | None = None
    weight: float | None = None

    @property
    def nonterminal(self):
        return (self.symbol, self.level)

    def height(self):
        return 1 + max((c.height() for c in self.children), default=0)

    def n_steps(self):
        if self.symbol == "seq":
            return sum(c.n_steps() for c in self.children)
        if self.production == CGC:
            return 2 + self.children[0].n_steps()
        return 1

    def walk(self, path=()):
        """Yield ``(path, node)`` pairs in pre-order."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.walk(path + (i,))

    def get(self, path):
        node = self
        for i in path:
            node = node.children[i]
        return node

    def replace_at(self, path, new):
        if not path:
            return new
        i = path[0]
        kids = list(self.children)
        kids[i] = kids[i].replace_at(path[1:], new)
        return replace(self, children=tuple(kids))


def decode_steps(node):
    if node.symbol == "seq":
        out = []
        for c in node.children:
            out.extend(decode_steps(c))
        return out
    p = node.production
    if p == SMOOTH:
        return [Smooth(node.kind, node.weight)]
    if p == NOOP:
        return [NoOp()]
    if p == BASEV:
        return [BaseV(node.weight)]
    if p == COARSE:
        return [CoarseSolve()]
    return [Descend()] + decode_steps(node.children[0]) + [Ascend(node.weight)]


@dataclass(frozen=True)
class Grammar:
    hierarchy_depth: int
    flex_levels: int = DEFAULT_FLEX_LEVELS
    kinds: tuple = tuple(SmootherKind)
    weights: tuple = WEIGHT_GRID
    # Relative production preferences used by random generation only.
    bias: dict = field(default_factory=lambda: {SMOOTH: 5.0, NOOP: 0.5, CGC: 3.0, BASEV: 2.0, COARSE: 2.0},
                       compare=False, hash=False)
    stop_prob: float = field(default=0.35, compare=False)

    def __post_init__(self):
        if self.hierarchy_depth < 1 or self.flex_levels < 1:
            raise ValueError("hierarchy_depth and flex_levels must be >= 1")

    @property
    def top(self):
        """Deepest level a program may visit."""
        return min(self.flex_levels, self.hierarchy_depth) - 1

    def productions(self, level):
        prods = [SMOOTH, NOOP]
        if level < self.top:
            prods.append(CGC)
        if level == self.flex_levels - 1 and self.hierarchy_depth > self.flex_levels:
            prods.append(BASEV)
        if level == self.hierarchy_depth - 1 and self.hierarchy_depth <= self.flex_levels:
            prods.append(COARSE)
        return prods

    def decode(self, node) -> CycleProgram:
        return CycleProgram(tuple(decode_steps(node)), self.flex_levels, self.hierarchy_depth)

    def parse_tree(self, program) -> Node:
        """Inverse of :meth:`decode` for valid programs."""
        steps = program.steps if isinstance(program, CycleProgram) else tuple(program)
        errors = validate(steps, self.hierarchy_depth, self.flex_levels)
        if errors:
            raise ProgramError(errors)
        pos = 0

        def seq(level):
            nonlocal pos
            kids = []
            while pos < len(steps) and not isinstance(steps[pos], Ascend):
                st = steps[pos]
                pos += 1
                if isinstance(st, Smooth):
                    kids.append(Node("step", level, SMOOTH, kind=st.kind, weight=st.weight))
                elif isinstance(st, NoOp):
                    kids.append(Node("step", level, NOOP))
                elif isinstance(st, BaseV):
                    kids.append(Node("step", level, BASEV, weight=st.weight))
                elif isinstance(st, CoarseSolve):
                    kids.append(Node("step", level, COARSE))
                else:
                    inner = seq(level + 1)
                    w = steps[pos].weight
                    pos += 1
                    kids.append(Node("step", level, CGC, (inner,), weight=w))
            return Node("seq", level, children=tuple(kids))

        return seq(0)

    # ------------------------------------------------------------------
    # random generation
    # ------------------------------------------------------------------
    def _pick_weight(self, rng):
        return self.weights[int(rng.integers(len(self.weights)))]

    def _gen_step(self, rng, level, budget, max_level, force_cgc=False):
        """Return ``(node, steps_used)``; ``budget >= 1`` is guaranteed by callers."""
        prods = [p for p in self.productions(level) if p != CGC or (level < max_level and budget >= 3)]
        if force_cgc and CGC in prods:
            choice = CGC
        else:
            w = [self.bias[p] for p in prods]
            total = sum(w)
            choice = prods[int(rng.choice(len(prods), p=[x / total for x in w]))]
        if choice == SMOOTH:
            kind = self.kinds[int(rng.integers(len(self.kinds)))]
            return Node("step", level, SMOOTH, kind=kind, weight=self._pick_weight(rng)), 1
        if choice in (BASEV,):
            return Node("step", level, BASEV, weight=self._pick_weight(rng)), 1
        if choice == NOOP:
            return Node("step", level, NOOP), 1
        if choice == COARSE:
            return Node("step", level, COARSE), 1
        inner, used = self._gen_seq(rng, level + 1, budget - 2, max_level, nonempty=True,
                                    reach=max_level if force_cgc else -1)
        return Node("step", level, CGC, (inner,), weight=self._pick_weight(rng)), used + 2

    def _gen_seq(self, rng, level, budget, max_level, nonempty, reach=-1):
        kids, used = [], 0
        need_reach = reach > level
        while budget - used > 0:
            if need_reach and budget - used < 3:
                need_reach = False
            stop = (kids or not nonempty) and rng.random() < self.stop_prob
            if stop and not need_reach:
                break
            force = need_reach and (stop or rng.random() < 0.5)
            node, n = self._gen_step(rng, level, budget - used, max_level, force_cgc=force)
            if node.production == CGC and force:
                need_reach = False
            kids.append(node)
            used += n
        return Node("seq", level, children=tuple(kids)), used

    def generate_tree(self, rng, max_steps=MAX_STEPS, max_depth=None, method="grow"):
        """Random derivation tree.

        ``max_depth`` caps the number of levels used; ``method="full"``
        forces the cycle down to its deepest allowed level.
        """
        if max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        max_level = self.top if max_depth is None else min(self.top, max_depth - 1)
        reach = max_level if method == "full" else -1
        tree, _ = self._gen_seq(rng, 0, max_steps, max_level, nonempty=True, reach=reach)
        return tree

    def regrow(self, rng, node, budget, root=False):
        """Fresh subtree for the nonterminal of ``node`` within ``budget`` steps."""
        budget = max(budget, 1)
        if node.symbol == "seq":
            return self._gen_seq(rng, node.level, budget, self.top, nonempty=True)[0]
        return self._gen_step(rng, node.level, budget, self.top)[0]

    # ------------------------------------------------------------------
    # exhaustive derivation
    # ------------------------------------------------------------------
    def derivations(self, max_steps):
        """Every derivation tree whose program has at most ``max_steps`` steps."""

        def steps_at(level, budget):
            for prod in self.productions(level):
                if prod == SMOOTH:
                    for k in self.kinds:
                        for w in self.weights:
                            yield Node("step", level, SMOOTH, kind=k, weight=w), 1
                elif prod == NOOP:
                    yield Node("step", level, NOOP), 1
                elif prod == COARSE:
                    yield Node("step", level, COARSE), 1
                elif prod == BASEV:
                    for w in self.weights:
                        yield Node("step", level, BASEV, weight=w), 1
                elif budget >= 2:
                    for inner, used in seqs_at(level + 1, budget - 2):
                        for w in self.weights:
                            yield Node("step", level, CGC, (inner,), weight=w), used + 2

        def seqs_at(level, budget, nonempty=False):
            if not nonempty:
                yield Node("seq", level), 0
            if budget < 1:
                return
            for first, used in steps_at(level, budget):
                for rest, more in seqs_at(level, budget - used):
                    yield Node("seq", level, children=(first,) + rest.children), used + more

        for tree, _ in seqs_at(0, max_steps, nonempty=True):
            yield tree


def generate(grammar, rng, max_steps=MAX_STEPS, max_depth=None):
    """Random valid program; method (full/grow) and depth are ramped from ``rng``."""
    max_level = grammar.top if max_depth is None else min(grammar.top, max_depth - 1)
    depth = 1 + int(rng.integers(max_level + 1))
    method = "full" if rng.random() < 0.5 else "grow"
    return grammar.decode(grammar.generate_tree(rng, max_steps, depth, method))
