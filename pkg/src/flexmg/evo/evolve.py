"""(mu + lambda) grammar-guided GP with NSGA-II survivor selection."""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from flexmg.cycles.dsl import emit_dsl, parse_dsl, write_cycle_file
from flexmg.cycles.grammar import Grammar, Node
from flexmg.cycles.program import MAX_STEPS
from flexmg.engine import EvalContext, FitnessPair, FitnessProblem, evaluate_fitness
from flexmg.evo.nsga2 import dominates, select_survivors
from flexmg.evo.operators import crossover, mutate, select_parent

log = logging.getLogger(__name__)

STREAMS = {"init": 1, "selection": 2, "variation": 3, "evaluation": 4}


def stream(master_seed, name):
    return np.random.default_rng([int(master_seed), STREAMS[name]])


@dataclass
class EvoConfig:
    mu: int = 256
    lam: int = 256
    generations: int = 100
    initial_pop: int = 2048
    batch_size: int = 16
    crossover_prob: float = 0.7
    mutation_prob: float = 0.3
    master_seed: int = 0
    fitness_mode: str = "work_units"
    worker_count: int = 1
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if self.mu < 2 or self.lam < 2:
            raise ValueError("mu and lambda must be >= 2")
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ValueError("operator probabilities must lie in [0, 1]")
        if self.crossover_prob + self.mutation_prob > 1 + 1e-12:
            raise ValueError("crossover_prob + mutation_prob must not exceed 1")
        if self.initial_pop < 1 or self.batch_size < 1 or self.worker_count < 1:
            raise ValueError("initial_pop, batch_size and worker_count must be >= 1")
        if self.fitness_mode not in ("work_units", "wall_time"):
            raise ValueError(f"unknown fitness mode {self.fitness_mode!r}")


@dataclass(eq=False)
class Individual:
    genotype: Node
    program: object
    dsl: str
    fitness: FitnessPair | None = None
    rank: int = 0
    crowding: float = 0.0

    @classmethod
    def from_genotype(cls, grammar, genotype):
        program = grammar.decode(genotype)
        return cls(genotype, program, emit_dsl(program))

    def objectives(self):
        return self.fitness.objectives()


def init_population(grammar: Grammar, n, rng, max_steps=MAX_STEPS):
    """Ramped half-and-half: level depth cycles through 1..top+1, alternating full/grow."""
    depths = grammar.top + 1
    pop = []
    for i in range(n):
        depth = 1 + (i // 2) % depths
        method = "full" if i % 2 == 0 else "grow"
        tree = grammar.generate_tree(rng, max_steps, depth, method)
        pop.append(Individual.from_genotype(grammar, tree))
    dupes = n - len({ind.dsl for ind in pop})
    if dupes:
        log.info("initial population has %d duplicate programs", dupes)
    return pop


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

_worker_problem = None
_worker_ctx = None


def _worker_init(problem):
    global _worker_problem, _worker_ctx
    _worker_problem = problem
    _worker_ctx = EvalContext(problem.hierarchy)


def _eval_batch(texts):
    out = []
    for text in texts:
        program = parse_dsl(text, _worker_problem.hierarchy.depth)
        out.append(evaluate_fitness(program, _worker_problem, _worker_ctx))
    return out


class Evaluator:
    """Memoized, batched fitness evaluation.

    Programs are keyed by canonical DSL text. With ``workers > 1`` batches go
    to a process pool whose workers each hold the problem and a private
    context.
    """

    def __init__(self, problem: FitnessProblem, batch_size=16, workers=1):
        self.problem = problem
        self.batch_size = batch_size
        self.workers = workers
        self.memo = {}
        self.evaluations = 0
        self._ctx = EvalContext(problem.hierarchy)
        self._pool = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _run(self, texts):
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if self.workers == 1:
            results = []
            for batch in batches:
                for text in batch:
                    program = parse_dsl(text, self.problem.hierarchy.depth)
                    results.append(evaluate_fitness(program, self.problem, self._ctx))
            return results
        if self._pool is None:
            self._pool = ProcessPoolExecutor(self.workers, initializer=_worker_init, initargs=(self.problem,))
        results = []
        for chunk in self._pool.map(_eval_batch, batches):
            results.extend(chunk)
        return results

    def evaluate(self, individuals):
        pending = []
        for ind in individuals:
            if ind.fitness is None and ind.dsl not in self.memo and ind.dsl not in pending:
                pending.append(ind.dsl)
        if pending:
            for text, fit in zip(pending, self._run(pending)):
                self.memo[text] = fit
            self.evaluations += len(pending)
        for ind in individuals:
            if ind.fitness is None:
                ind.fitness = self.memo[ind.dsl]
        return [ind.fitness for ind in individuals]


def evaluate_population(individuals, problem: FitnessProblem, config: EvoConfig):
    with Evaluator(problem, config.batch_size, config.worker_count) as ev:
        return ev.evaluate(individuals)


# --------------------------------------------------------------------------
# archive
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FrontEntry:
    dsl: str
    cost_per_iter: float
    conv_factor: float
    generation: int

    def objectives(self):
        return (self.cost_per_iter, self.conv_factor)


class ParetoFront:
    """Non-dominated, penalty-free programs seen so far (one entry per DSL text)."""

    def __init__(self, entries=()):
        self.entries = []
        for e in entries:
            self.add(e)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.sorted())

    def add(self, entry: FrontEntry):
        obj = entry.objectives()
        for e in self.entries:
            if e.dsl == entry.dsl or dominates(e.objectives(), obj):
                return False
        self.entries = [e for e in self.entries if not dominates(obj, e.objectives())]
        self.entries.append(entry)
        return True

    def update(self, individuals, generation):
        for ind in individuals:
            if ind.fitness is not None and not ind.fitness.penalty:
                self.add(FrontEntry(ind.dsl, ind.fitness.cost_per_iter, ind.fitness.conv_factor, generation))

    def sorted(self):
        return sorted(self.entries, key=lambda e: (e.cost_per_iter, e.conv_factor, e.dsl))


FRONT_COLUMNS = ["cost_per_iter", "conv_factor", "generation", "dsl"]
STATS_COLUMNS = ["generation", "min_cost_per_iter", "min_conv_factor", "archive_size"]


def export_front(front: ParetoFront, out_dir, cycle_files=True):
    """Write ``pareto.csv`` and one ``.cycle`` file per member; returns the CSV path."""
    if not len(front):
        raise ValueError("cannot export an empty archive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "pareto.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FRONT_COLUMNS)
        for e in front.sorted():
            w.writerow([repr(float(e.cost_per_iter)), repr(float(e.conv_factor)), e.generation, e.dsl])
    if cycle_files:
        cyc = out / "cycles"
        cyc.mkdir(exist_ok=True)
        for i, e in enumerate(front.sorted()):
            write_cycle_file(cyc / f"front_{i:03d}.cycle", parse_dsl(e.dsl),
                             comment=f"cost_per_iter={float(e.cost_per_iter)!r} conv_factor={float(e.conv_factor)!r} "
                                     f"generation={e.generation}")
    return path


def import_front(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [FrontEntry(r["dsl"], float(r["cost_per_iter"]), float(r["conv_factor"]), int(r["generation"]))
            for r in rows]


# --------------------------------------------------------------------------
# main loop
# --------------------------------------------------------------------------

@dataclass
class GenerationStats:
    generation: int
    min_cost_per_iter: float
    min_conv_factor: float
    archive_size: int
    evaluations: int = field(default=0, compare=False)


def write_stats(stats, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_COLUMNS)
        for s in stats:
            w.writerow([s.generation, repr(float(s.min_cost_per_iter)), repr(float(s.min_conv_factor)), s.archive_size])


def read_stats(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [GenerationStats(int(r["generation"]), float(r["min_cost_per_iter"]), float(r["min_conv_factor"]),
                            int(r["archive_size"])) for r in rows]


@dataclass
class EvolutionResult:
    front: ParetoFront
    stats: list
    population: list
    evaluations: int


def _truncate(pool, mu):
    points = [ind.objectives() for ind in pool]
    chosen, ranks, crowd = select_survivors(points, mu)
    for i, ind in enumerate(pool):
        ind.rank = int(ranks[i])
        ind.crowding = float(crowd[i])
    return [pool[i] for i in chosen]


def _stats(generation, pop, front, evaluations):
    return GenerationStats(generation, min(i.fitness.cost_per_iter for i in pop),
                           min(i.fitness.conv_factor for i in pop), len(front), evaluations)


def evolve(grammar: Grammar, problem: FitnessProblem, config: EvoConfig, callback=None):
    rng_init = stream(config.master_seed, "init")
    rng_sel = stream(config.master_seed, "selection")
    rng_var = stream(config.master_seed, "variation")
    front = ParetoFront()
    with Evaluator(problem, config.batch_size, config.worker_count) as ev:
        pop = init_population(grammar, config.initial_pop, rng_init, config.max_steps)
        ev.evaluate(pop)
        front.update(pop, 0)
        pop = _truncate(pop, config.mu)
        stats = [_stats(0, pop, front, ev.evaluations)]
        if callback:
            callback(stats[-1])
        for gen in range(1, config.generations + 1):
            offspring = []
            while len(offspring) < config.lam:
                p1 = select_parent(pop, rng_sel)
                u = rng_var.random()
                if u < config.crossover_prob:
                    p2 = select_parent(pop, rng_sel)
                    kids = crossover(p1.genotype, p2.genotype, rng_var, config.max_steps)
                elif u < config.crossover_prob + config.mutation_prob:
                    kids = (mutate(p1.genotype, rng_var, grammar, config.max_steps),)
                else:
                    kids = (p1.genotype,)
                for g in kids[: config.lam - len(offspring)]:
                    offspring.append(Individual.from_genotype(grammar, g))
            ev.evaluate(offspring)
            front.update(offspring, gen)
            pop = _truncate(pop + offspring, config.mu)
            stats.append(_stats(gen, pop, front, ev.evaluations))
            if callback:
                callback(stats[-1])
        return EvolutionResult(front, stats, pop, ev.evaluations)
