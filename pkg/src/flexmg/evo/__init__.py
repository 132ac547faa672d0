"""Grammar-guided multi-objective search over cycle programs."""
from flexmg.evo.evolve import (
    FRONT_COLUMNS,
    STATS_COLUMNS,
    EvoConfig,
    EvolutionResult,
    Evaluator,
    FrontEntry,
    GenerationStats,
    Individual,
    ParetoFront,
    evaluate_population,
    evolve,
    export_front,
    import_front,
    init_population,
    read_stats,
    stream,
    write_stats,
)
from flexmg.evo.nsga2 import crowding_distance, dominates, fast_non_dominated_sort, nsga2_rank, select_survivors
from flexmg.evo.operators import crossover, mutate, perturb_terminal, select_parent

__all__ = [
    "FRONT_COLUMNS", "STATS_COLUMNS", "EvoConfig", "EvolutionResult", "Evaluator", "FrontEntry",
    "GenerationStats", "Individual", "ParetoFront", "crossover", "crowding_distance", "dominates",
    "evaluate_population", "evolve", "export_front", "fast_non_dominated_sort", "import_front",
    "init_population", "mutate", "nsga2_rank", "perturb_terminal", "read_stats", "select_parent", "select_survivors",
    "stream", "write_stats",
]
