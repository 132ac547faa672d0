"""``flexmg`` command line.

Exit codes: 0 success, 2 configuration or parse error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from flexmg.amg import SetupError, build_hierarchy
from flexmg.bench import (
    PRECOND_REFERENCES,
    TimeStepSuite,
    compare_table,
    initial_guess,
    precond_suite,
    sizes_csv,
    sizes_table,
)
from flexmg.config import ConfigError, load_config
from flexmg.cycles.dsl import DslError, read_cycle_file
from flexmg.cycles.grammar import Grammar
from flexmg.cycles.program import ProgramError
from flexmg.cycles.render import to_dot
from flexmg.engine import FitnessProblem, pcg, solve
from flexmg.evo.evolve import evolve, export_front, stream, write_stats
from flexmg.sparse import (
    ProblemSpec,
    SingularMatrixError,
    assemble_anisotropic_7pt,
    make_rhs,
    read_matrix_market,
    write_matrix_market,
)

log = logging.getLogger("flexmg")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(RuntimeError):
    pass


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg, out):
    text = cfg.to_text()
    (out / "resolved.cfg").write_text(text)
    log.info("resolved config written to %s", out / "resolved.cfg")


def _load_problem(cfg):
    if cfg.matrix:
        A = read_matrix_market(cfg.matrix)
        spec = cfg.problem
        if spec.n != A.nrows:
            spec = ProblemSpec(A.nrows, 1, 1, spec.a, spec.b, spec.c, spec.rhs_kind, spec.rhs_seed)
    else:
        spec = cfg.problem
        A = assemble_anisotropic_7pt(spec)
    return spec, A, make_rhs(spec)


def _programs(paths, depth, flex_levels):
    progs = {}
    for path in paths:
        loaded = read_cycle_file(path, depth, flex_levels)
        for i, p in enumerate(loaded):
            label = Path(path).stem if len(loaded) == 1 else f"{Path(path).stem}[{i}]"
            progs[label] = p
    return progs


def cmd_problem(cfg, args):
    out = _out_dir(cfg)
    spec, A, _ = _load_problem(cfg)
    write_matrix_market(A, out / "matrix.mtx")
    (out / "problem.json").write_text(json.dumps(
        {"nx": spec.nx, "ny": spec.ny, "nz": spec.nz, "a": spec.a, "b": spec.b, "c": spec.c,
         "rhs": spec.rhs_kind, "rhs_seed": spec.rhs_seed, "n": A.nrows, "nnz": A.nnz}, indent=2))
    _echo(cfg, out)
    print(f"wrote {out / 'matrix.mtx'} ({A.nrows} rows, {A.nnz} nonzeros)")


def _fitness_problem(cfg, A, f, H):
    x0 = stream(cfg.evo.master_seed, "evaluation").random(A.nrows) if not np.any(f) else np.zeros(A.nrows)
    return FitnessProblem(H, f, x0, cfg.mode, cfg.evo.fitness_mode)


def cmd_optimize(cfg, args):
    out = _out_dir(cfg)
    _echo(cfg, out)
    _, A, f = _load_problem(cfg)
    H = build_hierarchy(A, cfg.setup)
    (out / "hierarchy.json").write_text(H.summary_json())
    grammar = Grammar(H.depth, cfg.flex_levels)
    problem = _fitness_problem(cfg, A, f, H)

    def report(s):
        log.info("gen %3d  min cost/iter %.4g  min rho %.4g  archive %d", s.generation, s.min_cost_per_iter,
                 s.min_conv_factor, s.archive_size)

    result = evolve(grammar, problem, cfg.evo, callback=report)
    if not len(result.front):
        raise NumericalFailure("no program converged; archive is empty")
    csv_path = export_front(result.front, out)
    write_stats(result.stats, out / "stats.csv")
    print(f"archive: {len(result.front)} programs -> {csv_path}")


def _run_one(cfg, H, A, f, program):
    x0 = initial_guess(A.nrows, cfg.problem.rhs_kind)
    if cfg.mode == "preconditioner":
        return pcg(A, H, program, f, x0, cfg.tol, cfg.max_iter)
    return solve(H, program, f, x0, cfg.tol, cfg.max_iter)


def cmd_eval(cfg, args):
    if not args.cycles:
        raise ConfigError("eval needs at least one .cycle file")
    _, A, f = _load_problem(cfg)
    H = build_hierarchy(A, cfg.setup)
    progs = _programs(args.cycles, H.depth, cfg.flex_levels)
    records = []
    for label, program in progs.items():
        res = _run_one(cfg, H, A, f, program)
        rec = {"program": label, "mode": cfg.mode, **res.to_record()}
        records.append(rec)
        print(f"{label}: iterations={res.iterations} converged={res.converged} wall_time={res.wall_time:.4g}s "
              f"work_units={res.work_units:.4g} conv_factor={res.conv_factor:.4g}")
    if args.out:
        out = _out_dir(cfg)
        (out / "eval.json").write_text(json.dumps(records, indent=2))
    if any(r["diverged"] for r in records):
        raise NumericalFailure("a program diverged")


def cmd_compare(cfg, args):
    out = _out_dir(cfg)
    _echo(cfg, out)
    depth_probe = build_hierarchy(assemble_anisotropic_7pt(ProblemSpec.cube(cfg.compare_n)), cfg.setup).depth
    progs = _programs(args.cycles, depth_probe, cfg.flex_levels)
    table = compare_table(progs, cfg.compare_n, cfg.setup, references=cfg.references, tol=cfg.tol,
                          max_iter=cfg.max_iter, flex_levels=cfg.flex_levels)
    (out / "compare.csv").write_text(table.to_csv())
    text = table.to_text() + "\n" + table.to_text(field="work")
    (out / "compare.txt").write_text(text)
    print(text, end="")


def cmd_precond_suite(cfg, args):
    out = _out_dir(cfg)
    _echo(cfg, out)
    s = cfg.suite
    suite = TimeStepSuite(ProblemSpec.cube(s.n, a=s.a, b=s.b, c=s.c, rhs_kind=s.rhs), s.steps)
    H1 = build_hierarchy(assemble_anisotropic_7pt(suite.spec_at(1)), cfg.setup)
    progs = _programs(args.cycles, H1.depth, cfg.flex_levels)
    table = precond_suite(suite, progs, cfg.setup, PRECOND_REFERENCES, cfg.tol, max(cfg.max_iter, 500),
                          flex_levels=cfg.flex_levels)
    (out / "precond_suite.csv").write_text(table.to_csv())
    text = table.to_text() + "\n" + table.to_text(field="work")
    (out / "precond_suite.txt").write_text(text)
    print(text, end="")
    if not all(c.converged for _, cells in table.rows for c in cells):
        raise NumericalFailure("a preconditioned solve did not converge")


def cmd_render(cfg, args):
    if not args.cycles:
        raise ConfigError("render needs at least one .cycle file")
    out = _out_dir(cfg) if args.out else None
    for path in args.cycles:
        for i, program in enumerate(read_cycle_file(path, None, cfg.flex_levels)):
            dot = to_dot(program)
            if out is None:
                print(dot, end="")
            else:
                suffix = "" if i == 0 else f"_{i}"
                (out / f"{Path(path).stem}{suffix}.dot").write_text(dot)


def cmd_sizes(cfg, args):
    out = _out_dir(cfg)
    _echo(cfg, out)
    progs = {}
    for path in args.cycles:
        for i, p in enumerate(read_cycle_file(path, None, cfg.flex_levels)):
            progs[Path(path).stem if i == 0 else f"{Path(path).stem}[{i}]"] = p
    base = cfg.problem
    rows = sizes_table(progs, cfg.sizes, base, cfg.setup, cfg.tol, cfg.max_iter, flex_levels=cfg.flex_levels)
    text = sizes_csv(rows)
    (out / "sizes.csv").write_text(text)
    print(text, end="")


COMMANDS = {
    "problem": cmd_problem,
    "optimize": cmd_optimize,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "precond-suite": cmd_precond_suite,
    "render": cmd_render,
    "sizes": cmd_sizes,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="flexmg", description="AMG with evolved flexible cycles")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("cycles", nargs="*", help=".cycle program files")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration entry (repeatable)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--fitness", choices=["work", "time"])
    ap.add_argument("--out")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, args.seed, args.workers, args.fitness, args.out)
        COMMANDS[args.command](cfg, args)
    except (ConfigError, DslError, ProgramError, OSError) as exc:
        print(f"flexmg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SetupError, SingularMatrixError, FloatingPointError) as exc:
        print(f"flexmg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
