"""Flat ``key = value`` run configuration with dotted section prefixes.

Example::

    # anisotropic solver run
    mode = solver
    problem.n = 32
    problem.a = 0.001
    evo.mu = 32
    evo.generations = 25
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields, replace

from flexmg.amg import SetupParams
from flexmg.cycles.program import DEFAULT_FLEX_LEVELS
from flexmg.evo.evolve import EvoConfig
from flexmg.sparse import ProblemSpec


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    steps: int = 10
    n: int = 40
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    rhs: str = "ones"


@dataclass
class RunConfig:
    problem: ProblemSpec = field(default_factory=lambda: ProblemSpec.cube(64))
    matrix: str | None = None
    setup: SetupParams = field(default_factory=SetupParams)
    evo: EvoConfig = field(default_factory=EvoConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    mode: str = "solver"
    out: str = "flexmg_out"
    flex_levels: int = DEFAULT_FLEX_LEVELS
    tol: float = 1e-8
    max_iter: int = 200
    compare_n: int = 32
    sizes: tuple = (16, 32, 48, 64)
    references: tuple = ("V(2,1)", "V(3,2)", "V(3,3)")

    def __post_init__(self):
        if self.mode not in ("solver", "preconditioner"):
            raise ConfigError(f"mode must be solver or preconditioner, got {self.mode!r}")

    def to_text(self):
        """Fully resolved configuration in the same format :func:`parse_config` reads."""
        p, s, e, t = self.problem, self.setup, self.evo, self.suite
        lines = [
            f"mode = {self.mode}",
            f"out = {self.out}",
            f"flex_levels = {self.flex_levels}",
            f"tol = {self.tol!r}",
            f"max_iter = {self.max_iter}",
            f"compare.n = {self.compare_n}",
            f"sizes.grids = {','.join(str(g) for g in self.sizes)}",
            f"compare.references = {', '.join(self.references)}",
            f"problem.nx = {p.nx}",
            f"problem.ny = {p.ny}",
            f"problem.nz = {p.nz}",
            f"problem.a = {p.a!r}",
            f"problem.b = {p.b!r}",
            f"problem.c = {p.c!r}",
            f"problem.rhs = {p.rhs_kind}",
            f"problem.rhs_seed = {p.rhs_seed}",
        ]
        if self.matrix:
            lines.append(f"problem.matrix = {self.matrix}")
        lines += [
            f"setup.theta = {s.strength_threshold!r}",
            f"setup.max_levels = {s.max_levels}",
            f"setup.coarse_max_size = {s.coarse_max_size}",
            f"setup.seed = {s.coarsen_seed}",
        ]
        lines += [f"evo.{f.name} = {getattr(e, f.name)!r}".replace("'", "") for f in fields(e)]
        lines += [f"suite.{f.name} = {getattr(t, f.name)!r}".replace("'", "") for f in fields(t)]
        return "\n".join(lines) + "\n"


def parse_kv(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


_PROBLEM_KEYS = {"nx": int, "ny": int, "nz": int, "a": float, "b": float, "c": float, "rhs": str, "rhs_seed": int}
_SETUP_KEYS = {"theta": ("strength_threshold", float), "max_levels": ("max_levels", int),
               "coarse_max_size": ("coarse_max_size", int), "seed": ("coarsen_seed", int)}


def _convert(kind, value, key):
    try:
        if kind is bool:
            return value.lower() in ("1", "true", "yes", "on")
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot convert {value!r} to {kind.__name__}") from None


def build_config(values: dict) -> RunConfig:
    values = dict(values)
    prob = {}
    if "problem.n" in values:
        n = _convert(int, values.pop("problem.n"), "problem.n")
        prob.update(nx=n, ny=n, nz=n)
    setup, evo, suite, top = {}, {}, {}, {}
    evo_types = {f.name: f.type for f in fields(EvoConfig)}
    suite_types = {f.name: f.type for f in fields(SuiteConfig)}
    for key, value in values.items():
        section, _, name = key.rpartition(".")
        if section == "problem":
            if name == "matrix":
                top["matrix"] = value
            elif name in _PROBLEM_KEYS:
                prob["rhs_kind" if name == "rhs" else name] = _convert(_PROBLEM_KEYS[name], value, key)
            else:
                raise ConfigError(f"unknown key {key}")
        elif section == "setup":
            if name not in _SETUP_KEYS:
                raise ConfigError(f"unknown key {key}")
            attr, kind = _SETUP_KEYS[name]
            setup[attr] = _convert(kind, value, key)
        elif section == "evo":
            if name not in evo_types:
                raise ConfigError(f"unknown key {key}")
            kind = {"int": int, "float": float, "str": str}[evo_types[name]]
            evo[name] = _convert(kind, value, key)
        elif section == "suite":
            if name not in suite_types:
                raise ConfigError(f"unknown key {key}")
            kind = {"int": int, "float": float, "str": str}[suite_types[name]]
            suite[name] = _convert(kind, value, key)
        elif key == "compare.n":
            top["compare_n"] = _convert(int, value, key)
        elif key == "compare.references":
            refs = re.findall(r"V\(\s*\d+\s*,\s*\d+\s*\)", value)
            if not refs or re.sub(r"V\(\s*\d+\s*,\s*\d+\s*\)|[\s,]", "", value):
                raise ConfigError(f"{key}: expected a list like V(2,1), V(3,2), got {value!r}")
            top["references"] = tuple(r.replace(" ", "") for r in refs)
        elif key == "sizes.grids":
            top["sizes"] = tuple(_convert(int, v, key) for v in value.split(",") if v.strip())
        elif key in ("mode", "out"):
            top[key] = value
        elif key in ("flex_levels", "max_iter"):
            top[key] = _convert(int, value, key)
        elif key == "tol":
            top[key] = _convert(float, value, key)
        else:
            raise ConfigError(f"unknown key {key}")
    try:
        base = ProblemSpec.cube(64)
        problem = replace(base, **prob)
        return RunConfig(problem=problem, setup=SetupParams(**setup), evo=EvoConfig(**evo),
                         suite=SuiteConfig(**suite), **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides=(), seed=None, workers=None, fitness=None, out=None) -> RunConfig:
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_kv(fh.read()))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if seed is None and "evo.master_seed" not in values and os.environ.get("FLEXMG_SEED"):
        seed = os.environ["FLEXMG_SEED"]
    if seed is not None:
        values["evo.master_seed"] = str(seed)
    if workers is not None:
        values["evo.worker_count"] = str(workers)
    if fitness is not None:
        values["evo.fitness_mode"] = {"work": "work_units", "time": "wall_time"}.get(fitness, fitness)
    if out is not None:
        values["out"] = out
    return build_config(values)
