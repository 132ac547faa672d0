from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexmg.cycles import (
    GSB,
    GSF,
    JAC,
    WEIGHT_GRID,
    Ascend,
    BaseV,
    CoarseSolve,
    CycleProgram,
    Descend,
    DslError,
    Grammar,
    NoOp,
    ProgramError,
    Smooth,
    check,
    emit_dsl,
    enumerate_programs,
    generate,
    parse_dsl,
    parse_programs,
    read_cycle_file,
    standard_cycle,
    to_dot,
    validate,
    write_cycle_file,
)
from flexmg.cycles.program import snap_weight, weight_step

DATA = Path(__file__).parent / "data"
GOLDEN_12 = "s:gsf:0.80 d s:jac:0.50 d s:gsb:1.20 cs n u:1.15 s:gsf:0.65 u:0.90 s:gsb:1.05 n"


def corpus():
    for line in (DATA / "dsl_corpus.txt").read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        raw, canonical = line.split(" ||| ")
        yield raw, canonical


def dyck_ok(steps, depth, flex):
    """Independent restatement of the structural rules."""
    top = min(flex, depth) - 1
    level = 0
    for s in steps:
        if isinstance(s, Descend):
            level += 1
            if level > top:
                return False
        elif isinstance(s, Ascend):
            level -= 1
            if level < 0:
                return False
        elif isinstance(s, BaseV):
            if not (depth > flex and level == flex - 1):
                return False
        elif isinstance(s, CoarseSolve):
            if not (depth <= flex and level == depth - 1):
                return False
    return len(steps) > 0 and level == 0


class TestWeightGrid:
    def test_grid(self):
        assert len(WEIGHT_GRID) == 37
        assert WEIGHT_GRID[0] == 0.10 and WEIGHT_GRID[-1] == 1.90
        np.testing.assert_allclose(np.diff(WEIGHT_GRID), 0.05, atol=1e-12)

    def test_snap_and_step(self):
        assert snap_weight(0.8000000001) == 0.80
        with pytest.raises(ValueError):
            snap_weight(0.82)
        assert weight_step(1.0, 1) == 1.05
        assert weight_step(0.10, -1) == 0.10
        assert weight_step(1.90, 1) == 1.90


class TestValidate:
    def test_single_smooth(self):
        assert validate([Smooth(GSF, 1.0)]) == []

    def test_lone_descend(self):
        errs = validate([Descend()], hierarchy_depth=3)
        assert any("final level" in str(e) for e in errs)

    def test_descend_ascend(self):
        assert validate([Descend(), Ascend(1.0)], hierarchy_depth=2) == []

    def test_exceeds_flexible_region(self):
        steps = [Descend()] * 5 + [Ascend(1.0)] * 5
        errs = validate(steps, hierarchy_depth=7, flex_levels=5)
        assert any("exceeds flexible region" in str(e) and e.index == 4 for e in errs)

    def test_depth_bounds_trace(self):
        assert validate([Descend(), Descend(), Ascend(1.0), Ascend(1.0)], hierarchy_depth=2)

    def test_underflow_and_empty(self):
        assert any("underflow" in str(e) for e in validate([Ascend(1.0)]))
        assert any("empty" in str(e) for e in validate([]))

    def test_off_grid_weight(self):
        errs = validate([Smooth(JAC, 0.33)])
        assert errs and errs[0].index == 0

    def test_basev_placement(self):
        deep = [Descend()] * 4 + [BaseV(1.0)] + [Ascend(1.0)] * 4
        assert validate(deep, hierarchy_depth=7) == []
        assert validate(deep, hierarchy_depth=5)  # hierarchy not deeper than flex region
        assert validate([BaseV(1.0)], hierarchy_depth=7)

    def test_coarse_solve_placement(self):
        assert validate([Descend(), CoarseSolve(), Ascend(1.0)], hierarchy_depth=2) == []
        assert validate([CoarseSolve()], hierarchy_depth=2)
        assert validate([Descend(), CoarseSolve(), Ascend(1.0)], hierarchy_depth=7)

    def test_all_violations_reported(self):
        errs = validate([Smooth(GSF, 0.33), Ascend(1.0), Smooth(GSB, 2.5)])
        assert {e.index for e in errs} >= {0, 1, 2}

    def test_check_raises(self):
        with pytest.raises(ProgramError):
            check([Descend()])

    def test_max_steps(self):
        assert validate([NoOp()] * 41, max_steps=40)


class TestDsl:
    def test_example(self):
        p = parse_dsl("s:gsf:0.80 d s:jac:0.50 u:1.15")
        assert p.steps == (Smooth(GSF, 0.80), Descend(), Smooth(JAC, 0.50), Ascend(1.15))

    def test_underflow_is_parse_error(self):
        with pytest.raises(DslError) as exc:
            parse_dsl("u:1.00")
        assert exc.value.line == 1 and exc.value.column == 1

    def test_unknown_token_position(self):
        with pytest.raises(DslError) as exc:
            parse_programs("n\ns:gsf:1.00 zz n")
        assert (exc.value.line, exc.value.column) == (2, 12)

    def test_off_grid_weight(self):
        with pytest.raises(DslError, match="off the grid"):
            parse_dsl("s:gsf:0.83")

    def test_validation_error_column(self):
        with pytest.raises(DslError) as exc:
            parse_dsl("n d d d d d u:1 u:1 u:1 u:1 u:1", hierarchy_depth=7)
        assert exc.value.column == 11

    @pytest.mark.parametrize("raw,canonical", list(corpus()))
    def test_corpus(self, raw, canonical):
        p = parse_dsl(raw)
        assert emit_dsl(p) == canonical
        assert parse_dsl(canonical) == p
        assert emit_dsl(parse_dsl(emit_dsl(p))) == canonical

    def test_corpus_size(self):
        assert len(list(corpus())) == 50

    def test_cycle_file_round_trip(self, tmp_path):
        p = parse_dsl(GOLDEN_12, hierarchy_depth=3)
        path = tmp_path / "x.cycle"
        write_cycle_file(path, p, comment="two\nlines")
        assert read_cycle_file(path, hierarchy_depth=3) == [p]


class TestStandardCycle:
    def test_v11_depth2(self):
        p = standard_cycle(1, 1, depth=2)
        assert p.steps == (Smooth(GSF, 1.0), Descend(), CoarseSolve(), Ascend(1.0), Smooth(GSB, 1.0))

    def test_v00(self):
        assert standard_cycle(0, 0, depth=2).steps == (Descend(), CoarseSolve(), Ascend(1.0))

    def test_v21_deep(self):
        p = standard_cycle(2, 1, depth=7)
        assert validate(p, 7) == []
        text = emit_dsl(p)
        assert text.count("bv:1.00") == 1
        assert text.count("s:gsf:1.00 s:gsf:1.00 d") == 4
        assert text.count("u:1.00 s:gsb:1.00") == 4
        assert text.startswith("s:gsf:1.00 s:gsf:1.00 d")

    def test_single_level(self):
        assert standard_cycle(1, 1, depth=1).steps == (CoarseSolve(),)

    def test_negative(self):
        with pytest.raises(ValueError):
            standard_cycle(-1, 0)


class TestEnumerate:
    def test_one_step_one_level(self):
        progs = enumerate_programs(1, 1)
        assert {emit_dsl(p) for p in progs} == {"s:gsf:1.00", "n", "cs"}

    def test_descend_ascend_present(self):
        assert "d u:1.00" in {emit_dsl(p) for p in enumerate_programs(2, 2)}

    def test_count_matches_transfer_matrix(self):
        # states: level 0, level 1. Tokens s, n at either level; cs only at level 1
        # (the coarsest of a 2-level hierarchy); d: 0 -> 1; u: 1 -> 0.
        T = np.array([[2, 1], [1, 3]])
        count = sum(np.linalg.matrix_power(T, k)[0, 0] for k in range(1, 5))
        assert len(enumerate_programs(4, 2)) == count

    def test_refuses_large(self):
        with pytest.raises(ValueError):
            enumerate_programs(12, 3, kinds=(GSF, GSB, JAC), weights=WEIGHT_GRID)


class TestGrammar:
    def test_completeness_small(self):
        g = Grammar(2, kinds=(GSF,), weights=(1.0,))
        derived = [emit_dsl(g.decode(t)) for t in g.derivations(4)]
        assert len(derived) == len(set(derived))  # unambiguous
        assert set(derived) == {emit_dsl(p) for p in enumerate_programs(4, 2)}

    @pytest.mark.parametrize("depth,flex", [(1, 5), (3, 2), (7, 2)])
    def test_completeness_other_shapes(self, depth, flex):
        g = Grammar(depth, flex, kinds=(GSF,), weights=(1.0,))
        derived = {emit_dsl(g.decode(t)) for t in g.derivations(4)}
        assert derived == {emit_dsl(p) for p in enumerate_programs(4, depth, flex_levels=flex)}

    def test_one_step_one_level(self):
        g = Grammar(1)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(200):
            p = generate(g, rng, max_steps=1)
            assert len(p) == 1
            seen.add(type(p.steps[0]))
        assert seen == {Smooth, NoOp, CoarseSolve}

    def test_generation_deterministic(self):
        g = Grammar(7)
        a = generate(g, np.random.default_rng(42))
        b = generate(g, np.random.default_rng(42))
        assert a == b

    def test_generated_valid_many_shapes(self):
        rng = np.random.default_rng(1)
        for depth in (1, 2, 3, 5, 6, 8):
            g = Grammar(depth)
            for _ in range(300):
                p = generate(g, rng, max_steps=int(rng.integers(1, 41)))
                assert validate(p, depth, 5, max_steps=40) == []

    def test_full_method_reaches_bottom(self):
        g = Grammar(7)
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = g.decode(g.generate_tree(rng, 40, method="full"))
            assert p.max_level() == 4

    def test_parse_tree_inverts_decode(self):
        g = Grammar(7)
        rng = np.random.default_rng(5)
        for _ in range(200):
            tree = g.generate_tree(rng, 40)
            assert g.parse_tree(g.decode(tree)) == tree

    def test_tree_paths(self):
        g = Grammar(3)
        tree = g.parse_tree(parse_dsl(GOLDEN_12, hierarchy_depth=3))
        assert tree.n_steps() == 12
        for path, node in tree.walk():
            assert tree.get(path) is node
        path = next(p for p, n in tree.walk() if n.production == "cgc")
        swapped = tree.replace_at(path, tree.get(path))
        assert swapped == tree

    def test_regrow_respects_nonterminal(self):
        g = Grammar(7)
        rng = np.random.default_rng(9)
        tree = g.generate_tree(rng, 40, method="full")
        for path, node in tree.walk():
            new = g.regrow(rng, node, 6)
            assert new.nonterminal == node.nonterminal
            assert new.n_steps() <= 6
            assert validate(g.decode(tree.replace_at(path, new)), 7) == []


class TestRender:
    def test_single_smooth(self):
        dot = to_dot(CycleProgram((Smooth(GSF, 1.0),)))
        assert dot.count("fillcolor") == 1
        assert 'fillcolor="yellow"' in dot and 'label="1.00"' in dot

    def test_v_shape(self):
        dot = to_dot(standard_cycle(1, 1, depth=2))
        ys = [float(line.split('pos="')[1].split(",")[1].rstrip('!"];')) for line in dot.splitlines()
              if "pos=" in line]
        assert ys == [0.0, -1.0, -1.0, 0.0, 0.0]

    def test_colours(self):
        dot = to_dot(parse_dsl("s:gsb:1.00 s:jac:0.50 d cs u:1.00 n", hierarchy_depth=2))
        for colour in ("red", "purple", "black", "white"):
            assert f'fillcolor="{colour}"' in dot
        assert '-> n4 [label="1.00"]' in dot

    def test_golden_12(self):
        p = parse_dsl(GOLDEN_12, hierarchy_depth=3)
        assert len(p) == 12
        assert to_dot(p) == (DATA / "golden_12.dot").read_text()


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 9), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_generated_programs_validate(depth, flex, seed):
    g = Grammar(depth, flex)
    rng = np.random.default_rng(seed)
    p = generate(g, rng, max_steps=int(rng.integers(1, 41)))
    assert validate(p, depth, flex, max_steps=40) == []
    assert parse_dsl(emit_dsl(p), depth, flex) == p


_tokens = st.sampled_from([Smooth(GSF, 1.0), NoOp(), Descend(), Ascend(0.5), BaseV(1.0), CoarseSolve()])


@settings(max_examples=500, deadline=None)
@given(st.lists(_tokens, max_size=10), st.integers(1, 8), st.integers(1, 5))
def test_validate_matches_dyck_rules(steps, depth, flex):
    assert (validate(steps, depth, flex) == []) == dyck_ok(steps, depth, flex)


def test_level_trace_recovers_descend_ascend_pattern():
    g = Grammar(7)
    rng = np.random.default_rng(17)
    for _ in range(500):
        p = generate(g, rng)
        trace = [0] + p.level_trace()
        moves = np.diff(trace)
        assert min(trace) == 0 and trace[-1] == 0
        for step, dl in zip(p.steps, moves):
            assert dl == (1 if isinstance(step, Descend) else -1 if isinstance(step, Ascend) else 0)
