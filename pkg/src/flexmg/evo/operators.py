"""Tournament selection and grammar-preserving variation on derivation trees."""
from __future__ import annotations

from dataclasses import replace

from flexmg.cycles.grammar import BASEV, CGC, SMOOTH, Grammar, Node
from flexmg.cycles.program import MAX_STEPS, weight_step

MAX_TREE_DEPTH = 17


def select_parent(pop, rng):
    """Binary tournament on (rank, crowding), ties broken by a fair coin."""
    a = pop[int(rng.integers(len(pop)))]
    b = pop[int(rng.integers(len(pop)))]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def _fits(tree, max_steps):
    return tree.n_steps() <= max_steps and tree.height() <= MAX_TREE_DEPTH


def crossover(g1: Node, g2: Node, rng, max_steps=MAX_STEPS):
    """Swap two subtrees rooted at the same level-indexed nonterminal.

    Identical parents are returned unchanged.
    """
    if g1 == g2:
        return g1, g2
    by_symbol = {}
    for path, node in g2.walk():
        if path:
            by_symbol.setdefault(node.nonterminal, []).append(path)
    candidates = [path for path, node in g1.walk() if path and node.nonterminal in by_symbol]
    if not candidates:
        return g1, g2
    p1 = candidates[int(rng.integers(len(candidates)))]
    matches = by_symbol[g1.get(p1).nonterminal]
    p2 = matches[int(rng.integers(len(matches)))]
    c1 = g1.replace_at(p1, g2.get(p2))
    c2 = g2.replace_at(p2, g1.get(p1))
    if not (_fits(c1, max_steps) and _fits(c2, max_steps)):
        return g1, g2
    return c1, c2


def perturb_terminal(node: Node, rng, grammar: Grammar):
    """Resample the smoother kind or move the weight one grid step."""
    if node.production == SMOOTH and rng.random() < 0.5:
        others = [k for k in grammar.kinds if k is not node.kind]
        if others:
            return replace(node, kind=others[int(rng.integers(len(others)))])
    direction = 1 if rng.random() < 0.5 else -1
    return replace(node, weight=weight_step(node.weight, direction, grammar.weights))


def mutate(g: Node, rng, grammar: Grammar, max_steps=MAX_STEPS):
    nodes = list(g.walk())
    terminals = [(p, n) for p, n in nodes if n.production in (SMOOTH, CGC, BASEV)]
    if terminals and rng.random() < 0.5:
        path, node = terminals[int(rng.integers(len(terminals)))]
        return g.replace_at(path, perturb_terminal(node, rng, grammar))
    path, node = nodes[int(rng.integers(len(nodes)))]
    budget = max_steps - (g.n_steps() - node.n_steps())
    child = g.replace_at(path, grammar.regrow(rng, node, budget))
    if not _fits(child, max_steps):
        return g
    return child
