"""Comparison harnesses: reference-cycle tables, the drifting-coefficient
preconditioner suite and the problem-size sweep."""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, replace

import numpy as np

from flexmg.amg import SetupParams, build_hierarchy
from flexmg.cycles.program import DEFAULT_FLEX_LEVELS, ProgramError, standard_cycle, validate
from flexmg.engine import pcg, solve
from flexmg.sparse import ProblemSpec, assemble_anisotropic_7pt, make_rhs

# (rhs kind, anisotropy in x) columns of the solver comparison
SOLVER_VARIANTS = (("zero", 0.01), ("zero", 0.001), ("zero", 0.0001), ("ones", 0.001), ("random", 0.001))
SOLVER_REFERENCES = ("V(2,1)", "V(3,2)", "V(3,3)")
PRECOND_REFERENCES = ("V(1,1)", "V(1,2)", "V(2,2)")
INITIAL_GUESS_SEED = 12345
SUITE_LABEL = "synthetic drifting-coefficient diffusion (stand-in for application matrices)"


def initial_guess(n, rhs_kind, seed=INITIAL_GUESS_SEED):
    """Random start for homogeneous problems, zero otherwise."""
    if rhs_kind == "zero":
        return np.random.default_rng(seed).random(n)
    return np.zeros(n)


def reference_program(name, depth, flex_levels=DEFAULT_FLEX_LEVELS):
    m = re.fullmatch(r"\s*V\((\d+),\s*(\d+)\)\s*", name)
    if not m:
        raise ValueError(f"reference cycle must look like V(n1,n2), got {name!r}")
    return standard_cycle(int(m.group(1)), int(m.group(2)), depth=depth, flex_levels=flex_levels)


def _checked(name, program, hierarchy):
    errors = validate(program, hierarchy.depth, program.flex_levels)
    if errors:
        raise ProgramError([f"{name}: {e}" for e in errors])
    return program


@dataclass
class Cell:
    time: float
    iterations: int
    work_units: float
    converged: bool

    def text(self):
        flag = "" if self.converged else "*"
        return f"({self.time:.3g}, {self.iterations}{flag})"


@dataclass
class Table:
    title: str
    columns: list
    rows: list  # (row label, [Cell, ...])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["program", "column", "time_s", "iterations", "work_units", "converged"])
        for label, cells in self.rows:
            for col, cell in zip(self.columns, cells):
                w.writerow([label, col, repr(float(cell.time)), cell.iterations, repr(float(cell.work_units)),
                            int(cell.converged)])
        return buf.getvalue()

    def to_text(self, field="time"):
        def fmt(c):
            return c.text() if field == "time" else f"({c.work_units:.1f}, {c.iterations})"

        header = ["program"] + list(self.columns)
        body = [[label] + [fmt(c) for c in cells] for label, cells in self.rows]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = [self.title, "  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in body]
        return "\n".join(lines) + "\n"


def read_table_csv(text):
    """Parse :meth:`Table.to_csv` output into ``{(program, column): Cell}``."""
    out = {}
    for r in csv.DictReader(io.StringIO(text)):
        out[(r["program"], r["column"])] = Cell(float(r["time_s"]), int(r["iterations"]), float(r["work_units"]),
                                                bool(int(r["converged"])))
    return out


def read_sizes_csv(text):
    return [(r["program"], int(r["grid"]), Cell(float(r["time_s"]), int(r["iterations"]), float(r["work_units"]),
                                                bool(int(r["converged"]))))
            for r in csv.DictReader(io.StringIO(text))]


def _cell(res):
    return Cell(res.wall_time, res.iterations, res.work_units, res.converged)


def compare_table(programs, n=32, setup=None, variants=SOLVER_VARIANTS, references=SOLVER_REFERENCES,
                  tol=1e-8, max_iter=200, flex_levels=DEFAULT_FLEX_LEVELS):
    """Solve time and iterations of every program on every (rhs, a) variant.

    ``programs`` maps labels to programs; references are rebuilt per
    hierarchy so they always span its depth.
    """
    setup = setup or SetupParams()
    columns = [f"f={'0' if k == 'zero' else '1' if k == 'ones' else 'rand'},a={a:g}" for k, a in variants]
    labels = list(references) + list(programs)
    cells = {label: [] for label in labels}
    for rhs_kind, a in variants:
        spec = ProblemSpec.cube(n, a=a, rhs_kind=rhs_kind)
        A = assemble_anisotropic_7pt(spec)
        H = build_hierarchy(A, setup)
        f = make_rhs(spec)
        x0 = initial_guess(A.nrows, rhs_kind)
        todo = {name: reference_program(name, H.depth, flex_levels) for name in references}
        todo.update({name: _checked(name, p, H) for name, p in programs.items()})
        for label in labels:
            res = solve(H, todo[label], f, x0, tol, max_iter)
            cells[label].append(_cell(res))
    return Table(f"(solve time [s], iterations) on {n}^3", columns, [(lb, cells[lb]) for lb in labels])


@dataclass(frozen=True)
class TimeStepSuite:
    """Sequence of slowly changing diffusion operators.

    At step ``t`` the y and z coefficients are scaled by ``1 + 0.05 t``.
    """

    base: ProblemSpec
    steps: int = 10
    drift: float = 0.05

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("suite needs at least one time step")

    def spec_at(self, t):
        s = 1.0 + self.drift * t
        return replace(self.base, b=self.base.b * s, c=self.base.c * s)

    def times(self):
        return range(1, self.steps + 1)


def precond_suite(suite: TimeStepSuite, programs, setup=None, references=PRECOND_REFERENCES, tol=1e-8,
                  max_iter=500, include_cg=False, flex_levels=DEFAULT_FLEX_LEVELS):
    """PCG iterations per time step; ``programs`` stay fixed across steps."""
    setup = setup or SetupParams()
    labels = list(references) + list(programs) + (["CG"] if include_cg else [])
    rows = []
    for t in suite.times():
        spec = suite.spec_at(t)
        A = assemble_anisotropic_7pt(spec)
        H = build_hierarchy(A, setup)
        f = make_rhs(spec)
        x0 = initial_guess(A.nrows, spec.rhs_kind)
        todo = {name: reference_program(name, H.depth, flex_levels) for name in references}
        todo.update({name: _checked(name, p, H) for name, p in programs.items()})
        cells = []
        for label in labels:
            res = pcg(A, H, todo.get(label), f, x0, tol, max_iter)
            cells.append(_cell(res))
        rows.append((f"t={t}", cells))
    return Table(f"(solve time [s], CG iterations) per time step; {SUITE_LABEL}", labels, rows)


def sizes_table(programs, grids=(16, 32, 48, 64), base=None, setup=None, tol=1e-8, max_iter=200,
                references=("V(1,1)",), flex_levels=DEFAULT_FLEX_LEVELS):
    """Iterations and work of unchanged program text across grid sizes."""
    base = base or ProblemSpec.cube(16)
    setup = setup or SetupParams()
    labels = list(references) + list(programs)
    out = []
    for n in grids:
        spec = replace(base, nx=n, ny=n, nz=n)
        A = assemble_anisotropic_7pt(spec)
        H = build_hierarchy(A, setup)
        f = make_rhs(spec)
        x0 = initial_guess(A.nrows, spec.rhs_kind)
        for label in labels:
            if label in programs:
                prog = _checked(label, programs[label], H)
            else:
                prog = reference_program(label, H.depth, flex_levels)
            res = solve(H, prog, f, x0, tol, max_iter)
            out.append((label, n, _cell(res)))
    return out


def sizes_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["program", "grid", "iterations", "work_units", "time_s", "converged"])
    for label, n, c in rows:
        w.writerow([label, n, c.iterations, repr(float(c.work_units)), repr(float(c.time)), int(c.converged)])
    return buf.getvalue()
