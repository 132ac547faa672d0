import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexmg.cycles import Grammar, emit_dsl, parse_dsl, standard_cycle, validate
from flexmg.cycles.grammar import CGC, SMOOTH, Node
from flexmg.cycles.program import GSF
from flexmg.engine import PENALTY, FitnessProblem
from flexmg.evo import (
    FRONT_COLUMNS,
    EvoConfig,
    Evaluator,
    FrontEntry,
    Individual,
    ParetoFront,
    crossover,
    crowding_distance,
    dominates,
    evaluate_population,
    evolve,
    export_front,
    import_front,
    init_population,
    mutate,
    nsga2_rank,
    perturb_terminal,
    select_parent,
    select_survivors,
    stream,
)
from flexmg.evo.operators import MAX_TREE_DEPTH


def oracle_ranks(points):
    """Peel non-dominated layers with an O(n^2) scan per layer."""
    n = len(points)
    ranks = [0] * n
    left = set(range(n))
    r = 0
    while left:
        r += 1
        layer = [i for i in left if not any(dominates(points[j], points[i]) for j in left if j != i)]
        for i in layer:
            ranks[i] = r
        left -= set(layer)
    return ranks


class Stub:
    def __init__(self, rank, crowding, tag):
        self.rank, self.crowding, self.tag = rank, crowding, tag


class TestNsga2:
    def test_small_example(self):
        np.testing.assert_array_equal(nsga2_rank([(1, 2), (2, 1), (2, 2)]), [1, 1, 2])

    def test_single(self):
        assert list(nsga2_rank([(3, 4)])) == [1]
        assert crowding_distance([(3, 4)])[0] == math.inf

    def test_crowding_values(self):
        d = crowding_distance([(0, 4), (1, 2), (2, 1), (4, 0)])
        assert d[0] == d[3] == math.inf
        assert d[1] == pytest.approx((2 - 0) / 4 + (4 - 1) / 4)
        assert d[2] == pytest.approx((4 - 1) / 4 + (2 - 0) / 4)

    @pytest.mark.parametrize("seed", range(5))
    def test_ranks_vs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pts = [tuple(p) for p in rng.integers(0, 15, size=(120, 2)).astype(float)]
        np.testing.assert_array_equal(nsga2_rank(pts), oracle_ranks(pts))

    def test_survivors_keep_extremes(self):
        rng = np.random.default_rng(1)
        pts = [tuple(p) for p in rng.random((50, 2))]
        chosen, ranks, crowd = select_survivors(pts, 7)
        assert len(chosen) == 7 and len(set(chosen)) == 7
        first = [i for i in range(50) if ranks[i] == 1]
        if len(first) > 7:
            assert set(chosen) <= set(first)
        for m in range(2):
            best = min(p[m] for p in pts)
            assert min(pts[i][m] for i in chosen) == best

    def test_survivors_fill_by_rank(self):
        pts = [(1, 1), (2, 2), (3, 3), (0, 5)]
        chosen, ranks, _ = select_survivors(pts, 3)
        assert sorted(chosen) == [0, 1, 3]
        np.testing.assert_array_equal(ranks, [1, 2, 3, 1])


class TestSelection:
    def test_lower_rank_wins(self):
        pop = [Stub(1, 0.0, "a"), Stub(2, math.inf, "b")]
        rng = np.random.default_rng(0)
        # both contestants are drawn with replacement; the rank-2 one only wins against itself
        wins = sum(select_parent(pop, rng).tag == "a" for _ in range(4000))
        assert wins / 4000 == pytest.approx(0.75, abs=0.03)

    def test_crowding_breaks_ties(self):
        pop = [Stub(1, math.inf, "a"), Stub(1, 0.3, "b")]
        rng = np.random.default_rng(1)
        wins = sum(select_parent(pop, rng).tag == "a" for _ in range(4000))
        assert wins / 4000 == pytest.approx(0.75, abs=0.03)

    def test_full_tie_is_fair(self):
        pop = [Stub(1, 0.5, "a"), Stub(1, 0.5, "b")]
        rng = np.random.default_rng(2)
        n = 10_000
        a = sum(select_parent(pop, rng).tag == "a" for _ in range(n))
        chi2 = (a - n / 2) ** 2 / (n / 2) + (n - a - n / 2) ** 2 / (n / 2)
        assert chi2 < 10.83  # p = 0.001, one degree of freedom


class TestVariation:
    def setup_method(self):
        self.g = Grammar(7)

    def test_identical_parents(self):
        rng = np.random.default_rng(0)
        t = self.g.generate_tree(rng, 30, method="full")
        for _ in range(50):
            c1, c2 = crossover(t, t, rng)
            assert {emit_dsl(self.g.decode(c)) for c in (c1, c2)} == {emit_dsl(self.g.decode(t))}

    def test_disjoint_nonterminals_copied(self):
        a = Node("seq", 0, children=(Node("step", 0, SMOOTH, kind=GSF, weight=1.0),))
        b = self.g.parse_tree(parse_dsl("d s:gsf:1.00 u:1.00", 7))
        # below the root, a has only ("step", 0); give b nothing but level-1 material
        b_inner = Node("seq", 0, children=(Node("step", 1, SMOOTH, kind=GSF, weight=1.0),))
        c1, c2 = crossover(a, b_inner, np.random.default_rng(0))
        assert c1 == a and c2 == b_inner
        assert crossover(a, b, np.random.default_rng(0))[0].nonterminal == ("seq", 0)

    def test_perturb_clamp_and_step(self):
        rng = np.random.default_rng(0)
        low = Node("step", 1, CGC, (Node("seq", 2),), weight=0.10)
        seen_low = {perturb_terminal(low, rng, self.g).weight for _ in range(100)}
        assert seen_low == {0.10, 0.15}
        one = Node("step", 0, CGC, (Node("seq", 1),), weight=1.0)
        assert {perturb_terminal(one, rng, self.g).weight for _ in range(100)} == {0.95, 1.05}

    def test_oversize_crossover_rejected(self):
        rng = np.random.default_rng(3)
        big = self.g.parse_tree(parse_dsl(" ".join(["s:gsf:1.00"] * 39), 7))
        small = self.g.parse_tree(parse_dsl("s:gsb:1.00 s:gsb:1.00 s:gsb:1.00", 7))
        for _ in range(50):
            c1, c2 = crossover(big, small, rng, max_steps=40)
            assert c1.n_steps() <= 40 and c2.n_steps() <= 40

    def test_many_variations_validate(self):
        rng = np.random.default_rng(11)
        pool = [self.g.generate_tree(rng, 40, method=m) for m in ("full", "grow") for _ in range(20)]
        for _ in range(2000):
            a = pool[int(rng.integers(len(pool)))]
            b = pool[int(rng.integers(len(pool)))]
            kids = list(crossover(a, b, rng)) + [mutate(a, rng, self.g)]
            for k in kids:
                assert validate(self.g.decode(k), 7, 5, max_steps=40) == []
                assert k.height() <= MAX_TREE_DEPTH
            pool[int(rng.integers(len(pool)))] = kids[int(rng.integers(3))]


class TestPopulation:
    def test_single(self):
        pop = init_population(Grammar(7), 1, np.random.default_rng(0))
        assert len(pop) == 1 and validate(pop[0].program, 7) == []

    def test_deterministic_and_valid(self):
        g = Grammar(7)
        a = init_population(g, 2048, stream(5, "init"))
        b = init_population(g, 2048, stream(5, "init"))
        assert [i.dsl for i in a] == [i.dsl for i in b]
        assert all(validate(i.program, 7, 5, max_steps=40) == [] for i in a)
        assert len({i.dsl for i in a}) > 500

    def test_streams_independent(self):
        x = stream(1, "init").random(4)
        y = stream(1, "selection").random(4)
        assert not np.allclose(x, y)
        np.testing.assert_array_equal(x, stream(1, "init").random(4))


@pytest.fixture(scope="module")
def problem16(aniso_16):
    A, H = aniso_16
    x0 = stream(0, "evaluation").random(A.nrows)
    return FitnessProblem(H, np.zeros(A.nrows), x0)


class TestEvaluation:
    def test_noop_penalized(self, problem16):
        g = Grammar(problem16.hierarchy.depth)
        ind = Individual.from_genotype(g, g.parse_tree(parse_dsl("n")))
        (fit,) = evaluate_population([ind], problem16, EvoConfig(mu=2, lam=2))
        assert fit.objectives() == (PENALTY, PENALTY)

    def test_identical_fitness_and_memo(self, problem16):
        g = Grammar(problem16.hierarchy.depth)
        tree = g.parse_tree(standard_cycle(1, 1, depth=problem16.hierarchy.depth))
        a, b = Individual.from_genotype(g, tree), Individual.from_genotype(g, tree)
        with Evaluator(problem16, batch_size=4) as ev:
            ev.evaluate([a, b])
            assert ev.evaluations == 1
        assert a.fitness == b.fitness and not a.fitness.penalty
        assert 0 < a.fitness.conv_factor < 1

    def test_parallel_matches_serial(self, problem16):
        g = Grammar(problem16.hierarchy.depth)
        pop = init_population(g, 24, np.random.default_rng(4))
        serial = evaluate_population(pop, problem16, EvoConfig(mu=2, lam=2, batch_size=5))
        fresh = [Individual.from_genotype(g, i.genotype) for i in pop]
        par = evaluate_population(fresh, problem16, EvoConfig(mu=2, lam=2, batch_size=5, worker_count=2))
        assert serial == par


class TestArchive:
    def test_non_dominated_and_unique(self):
        front = ParetoFront()
        assert front.add(FrontEntry("a", 2.0, 0.5, 0))
        assert not front.add(FrontEntry("b", 3.0, 0.6, 1))  # dominated
        assert not front.add(FrontEntry("a", 1.0, 0.1, 1))  # same text
        assert front.add(FrontEntry("c", 1.0, 0.7, 1))
        assert front.add(FrontEntry("d", 1.0, 0.4, 2))  # dominates a and c
        assert [e.dsl for e in front.sorted()] == ["d"]

    def test_export_import(self, tmp_path):
        front = ParetoFront([FrontEntry("s:gsf:1.00", 1.0, 0.9, 0), FrontEntry("d cs u:1.00", 3.5, 0.2, 4),
                             FrontEntry("s:gsf:1.00 s:gsb:1.00", 2.0, 0.5, 1)])
        path = export_front(front, tmp_path)
        with open(path) as fh:
            header = next(csv.reader(fh))
        assert header == FRONT_COLUMNS == ["cost_per_iter", "conv_factor", "generation", "dsl"]
        back = import_front(path)
        assert [e.cost_per_iter for e in back] == [1.0, 2.0, 3.5]
        for a in back:
            assert not any(dominates(b.objectives(), a.objectives()) for b in back)
        assert len(list((tmp_path / "cycles").glob("*.cycle"))) == 3

    def test_singleton_and_empty(self, tmp_path):
        path = export_front(ParetoFront([FrontEntry("n", 0.0, 0.5, 0)]), tmp_path)
        assert len(path.read_text().splitlines()) == 2
        with pytest.raises(ValueError):
            export_front(ParetoFront(), tmp_path / "x")


class TestEvolve:
    def test_generations_zero(self, problem16):
        g = Grammar(problem16.hierarchy.depth)
        cfg = EvoConfig(mu=8, lam=8, generations=0, initial_pop=40, master_seed=3)
        res = evolve(g, problem16, cfg)
        pop = init_population(g, 40, stream(3, "init"))
        evaluate_population(pop, problem16, cfg)
        ok = [i for i in pop if not i.fitness.penalty]
        expect = {i.dsl for i in ok if not any(dominates(j.objectives(), i.objectives()) for j in ok)}
        got = {e.dsl for e in res.front}
        # equal objective vectors keep only the first text
        assert got <= expect
        assert {tuple(e.objectives()) for e in res.front} == {
            i.objectives() for i in ok if i.dsl in expect}

    def test_short_run_monotone_and_reproducible(self, problem16):
        g = Grammar(problem16.hierarchy.depth)
        cfg = EvoConfig(mu=8, lam=8, generations=4, initial_pop=16, master_seed=9)
        a = evolve(g, problem16, cfg)
        b = evolve(g, problem16, cfg)
        assert [(e.dsl, e.cost_per_iter, e.conv_factor) for e in a.front] == \
               [(e.dsl, e.cost_per_iter, e.conv_factor) for e in b.front]
        for s0, s1 in zip(a.stats, a.stats[1:]):
            assert s1.min_cost_per_iter <= s0.min_cost_per_iter
            assert s1.min_conv_factor <= s0.min_conv_factor
        assert all(e.cost_per_iter < PENALTY for e in a.front)
        assert all(i.rank >= 1 for i in a.population)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EvoConfig(mu=1)
        with pytest.raises(ValueError):
            EvoConfig(crossover_prob=0.8, mutation_prob=0.3)
        with pytest.raises(ValueError):
            EvoConfig(fitness_mode="other")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**32 - 1))
def test_rank_property(n, seed):
    rng = np.random.default_rng(seed)
    pts = [tuple(p) for p in np.round(rng.random((n, 2)), 1)]
    ranks = nsga2_rank(pts)
    np.testing.assert_array_equal(ranks, oracle_ranks(pts))
    for i in range(n):
        for j in range(n):
            if dominates(pts[i], pts[j]):
                assert ranks[i] < ranks[j]
