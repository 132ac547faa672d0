"""Classical AMG setup: strength of connection, PMIS splitting, direct
interpolation and Galerkin coarse operators.

The hierarchy is built once per matrix and never modified afterwards; all
solve-phase work vectors live in :class:`flexmg.engine.EvalContext`.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from flexmg import _kernels
from flexmg.sparse import CsrMatrix, DenseFactor, DimensionError, dense_lu_factor, spgemm, transpose

log = logging.getLogger(__name__)


class SetupError(RuntimeError):
    pass


@dataclass(frozen=True)
class SetupParams:
    strength_threshold: float = 0.25
    max_levels: int = 10
    coarse_max_size: int = 50
    coarsen_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.strength_threshold < 1.0:
            raise ValueError("strength_threshold must lie in (0, 1)")
        if self.coarse_max_size < 1 or self.max_levels < 1:
            raise ValueError("coarse_max_size and max_levels must be >= 1")


def strength_graph(A: CsrMatrix, theta: float = 0.25) -> CsrMatrix:
    """Classical strength of connection.

    ``j`` is a strong influence on ``i`` when ``-a_ij >= theta * max_k(-a_ik)``
    over off-diagonal ``k``. The result is a pattern matrix (all values 1);
    rows whose largest negative coupling is not positive stay empty.
    """
    ptr, ind = _kernels.strength_rows(A.row_offsets, A.col_indices, A.values, float(theta))
    return CsrMatrix(A.nrows, A.ncols, ptr, ind, np.ones(len(ind)))


def symmetrize(S: CsrMatrix) -> CsrMatrix:
    rows = np.repeat(np.arange(S.nrows), np.diff(S.row_offsets))
    both_r = np.concatenate([rows, S.col_indices])
    both_c = np.concatenate([S.col_indices, rows])
    G = CsrMatrix.from_coo(S.nrows, S.ncols, both_r, both_c, np.ones(len(both_r)))
    return CsrMatrix(G.nrows, G.ncols, G.row_offsets, G.col_indices, np.ones(G.nnz))


def pmis_weights(S: CsrMatrix, seed: int) -> np.ndarray:
    """Degree in the symmetrized strength graph plus a seeded fraction in [0, 1)."""
    G = symmetrize(S)
    return np.diff(G.row_offsets).astype(np.float64) + np.random.default_rng(seed).random(S.nrows)


def pmis_coarsen(S: CsrMatrix, seed: int = 0, weights=None) -> np.ndarray:
    """C/F splitting by parallel maximal independent set.

    Returns a boolean array, ``True`` for C points. Points without strong
    neighbours are F points.
    """
    G = symmetrize(S)
    if weights is None:
        weights = pmis_weights(S, seed)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    label = _kernels.pmis_split(S.row_offsets, S.col_indices, G.row_offsets, G.col_indices, weights)
    return label == 1


def direct_interpolation(A: CsrMatrix, S: CsrMatrix, splitting) -> CsrMatrix:
    """Direct interpolation from strong C neighbours.

    C rows inject; an F row ``i`` with strong C set ``C_i`` gets
    ``w_ij = -(a_ij / a_ii) * sum_{k != i} a_ik / sum_{k in C_i} a_ik``.
    F rows without strong C neighbours (or with a vanishing denominator)
    are left zero.
    """
    splitting = np.asarray(splitting, dtype=bool)
    if len(splitting) != A.nrows:
        raise DimensionError("splitting length does not match matrix")
    label = splitting.astype(np.int64)
    coarse_index = np.cumsum(label) - 1
    ptr, ind, dat, degenerate = _kernels.direct_interp(
        A.row_offsets, A.col_indices, A.values, S.row_offsets, S.col_indices, label, coarse_index
    )
    if degenerate:
        log.warning("direct interpolation: %d rows with zero C-coupling sum fell back to zero rows", degenerate)
    return CsrMatrix(A.nrows, int(label.sum()), ptr, ind, dat)


def galerkin(A: CsrMatrix, P: CsrMatrix, R: CsrMatrix | None = None) -> CsrMatrix:
    if A.ncols != P.nrows or A.nrows != A.ncols:
        raise DimensionError(f"galerkin: A {A.shape} incompatible with P {P.shape}")
    if R is None:
        R = transpose(P)
    return spgemm(R, spgemm(A, P))


@dataclass(frozen=True, eq=False)
class Level:
    A: CsrMatrix
    diag: np.ndarray
    P: CsrMatrix | None = None
    R: CsrMatrix | None = None
    splitting: np.ndarray | None = None

    @property
    def n(self):
        return self.A.nrows


@dataclass(frozen=True, eq=False)
class AmgHierarchy:
    levels: tuple
    coarse_factor: DenseFactor
    params: SetupParams = field(default_factory=SetupParams)

    @property
    def depth(self):
        return len(self.levels)

    @property
    def sizes(self):
        return [lvl.n for lvl in self.levels]

    def operator_complexity(self):
        nnz = [lvl.A.nnz for lvl in self.levels]
        return sum(nnz) / nnz[0]

    def summary(self):
        base = self.levels[0].A.nnz
        return {
            "levels": [
                {"level": i, "rows": lvl.n, "nnz": lvl.A.nnz, "nnz_ratio": lvl.A.nnz / base}
                for i, lvl in enumerate(self.levels)
            ],
            "depth": self.depth,
            "operator_complexity": self.operator_complexity(),
            "params": {
                "strength_threshold": self.params.strength_threshold,
                "max_levels": self.params.max_levels,
                "coarse_max_size": self.params.coarse_max_size,
                "coarsen_seed": self.params.coarsen_seed,
            },
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2)


def build_hierarchy(A: CsrMatrix, params: SetupParams | None = None) -> AmgHierarchy:
    params = params or SetupParams()
    levels = []
    current = A
    while True:
        diag = current.diagonal()
        if np.any(diag == 0):
            raise SetupError(f"level {len(levels)} has a zero diagonal entry")
        if current.nrows <= params.coarse_max_size or len(levels) + 1 >= params.max_levels:
            levels.append(Level(current, diag))
            break
        S = strength_graph(current, params.strength_threshold)
        split = pmis_coarsen(S, params.coarsen_seed + len(levels))
        nc = int(split.sum())
        if nc == 0 or nc == current.nrows:
            raise SetupError(f"coarsening stalled on level {len(levels)} ({current.nrows} rows, {nc} C points)")
        P = direct_interpolation(current, S, split)
        R = transpose(P)
        levels.append(Level(current, diag, P, R, split))
        current = galerkin(current, P, R)
    coarse = levels[-1].A
    factor = dense_lu_factor(coarse.toarray())
    log.debug("hierarchy sizes %s", [lvl.n for lvl in levels])
    return AmgHierarchy(tuple(levels), factor, params)
