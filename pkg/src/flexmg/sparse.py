"""Sparse and small dense linear algebra, plus model-problem assembly."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from flexmg import _kernels


class DimensionError(ValueError):
    pass


class InvalidSpecError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free rows.

    Instances are treated as immutable once built; the arrays are flagged
    read-only so they can be shared between concurrent evaluations.
    """

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name, dtype in (("row_offsets", np.int64), ("col_indices", np.int64), ("values", np.float64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    def check(self):
        """Raise ``ValueError`` if any structural invariant is broken."""
        ptr, ind = self.row_offsets, self.col_indices
        if len(ptr) != self.nrows + 1 or ptr[0] != 0:
            raise ValueError("row_offsets has wrong length or does not start at 0")
        if np.any(np.diff(ptr) < 0):
            raise ValueError("row_offsets is decreasing")
        if ptr[-1] != len(ind) or len(ind) != len(self.values):
            raise ValueError("row_offsets[-1] does not match entry count")
        if len(ind) and (ind.min() < 0 or ind.max() >= self.ncols):
            raise ValueError("column index out of range")
        for i in range(self.nrows):
            row = ind[ptr[i]:ptr[i + 1]]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i} columns are not strictly increasing")
        return self

    def diagonal(self):
        return _kernels.csr_diagonal(self.row_offsets, self.col_indices, self.values)

    def toarray(self):
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    @classmethod
    def from_dense(cls, dense, drop_zeros=True):
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise DimensionError("expected a 2-d array")
        mask = dense != 0 if drop_zeros else np.ones(dense.shape, dtype=bool)
        rows, cols = np.nonzero(mask)
        ptr = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.add.at(ptr, rows + 1, 1)
        return cls(dense.shape[0], dense.shape[1], np.cumsum(ptr), cols, dense[rows, cols])

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals):
        """Build from triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            first = np.ones(len(rows), dtype=bool)
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            groups = np.cumsum(first) - 1
            vals = np.bincount(groups, weights=vals)
            rows, cols = rows[first], cols[first]
        ptr = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(ptr, rows + 1, 1)
        return cls(nrows, ncols, np.cumsum(ptr), cols, vals)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n))

    def __matmul__(self, other):
        if isinstance(other, CsrMatrix):
            return spgemm(self, other)
        return spmv(self, other)


@dataclass(frozen=True)
class ProblemSpec:
    """Grid and coefficients of ``-a u_xx - b u_yy - c u_zz = f`` on the unit cube."""

    nx: int
    ny: int
    nz: int
    a: float = 0.001
    b: float = 1.0
    c: float = 1.0
    rhs_kind: str = "zero"
    rhs_seed: int = 0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise InvalidSpecError(f"grid extents must be >= 1, got {(self.nx, self.ny, self.nz)}")
        if min(self.a, self.b, self.c) <= 0:
            raise InvalidSpecError("anisotropy coefficients must be positive")
        if self.rhs_kind not in ("zero", "ones", "random"):
            raise InvalidSpecError(f"unknown rhs_kind {self.rhs_kind!r}")

    @property
    def n(self):
        return self.nx * self.ny * self.nz

    @classmethod
    def cube(cls, m, **kw):
        return cls(m, m, m, **kw)


def assemble_anisotropic_7pt(spec: ProblemSpec) -> CsrMatrix:
    """Seven-point finite-difference operator with Dirichlet unknowns eliminated.

    The mesh width is taken as 1, so the interior diagonal is ``2a+2b+2c``
    and the off-diagonals are ``-a``, ``-b``, ``-c`` along x, y and z.
    Unknowns are ordered with x fastest.
    """
    nx, ny, nz = spec.nx, spec.ny, spec.nz
    n = nx * ny * nz
    idx = np.arange(n).reshape(nz, ny, nx)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [np.full(n, 2.0 * (spec.a + spec.b + spec.c))]
    for axis, coef in ((2, spec.a), (1, spec.b), (0, spec.c)):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        u, v = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        rows += [u, v]
        cols += [v, u]
        vals += [np.full(len(u), -coef)] * 2
    return CsrMatrix.from_coo(n, n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def make_rhs(spec: ProblemSpec) -> np.ndarray:
    if spec.rhs_kind == "zero":
        return np.zeros(spec.n)
    if spec.rhs_kind == "ones":
        return np.ones(spec.n)
    f = np.random.default_rng(spec.rhs_seed).random(spec.n)
    return f / np.linalg.norm(f)


def _as_vector(x, n, what="vector"):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"{what} has length {x.shape}, expected {n}")
    return x


def spmv(A: CsrMatrix, x) -> np.ndarray:
    x = _as_vector(x, A.ncols)
    y = np.empty(A.nrows)
    _kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, x, y)
    return y


def residual(A: CsrMatrix, x, f) -> np.ndarray:
    x = _as_vector(x, A.ncols)
    f = _as_vector(f, A.nrows, "right-hand side")
    r = np.empty(A.nrows)
    _kernels.csr_residual(A.row_offsets, A.col_indices, A.values, x, f, r)
    return r


def norm2(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


def axpy(alpha, x, y) -> np.ndarray:
    """Return ``alpha * x + y`` as a new vector."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"axpy shapes differ: {x.shape} vs {y.shape}")
    return alpha * x + y


def transpose(A: CsrMatrix) -> CsrMatrix:
    ptr, ind, dat = _kernels.csr_transpose(A.nrows, A.ncols, A.row_offsets, A.col_indices, A.values)
    return CsrMatrix(A.ncols, A.nrows, ptr, ind, dat)


def spgemm(A: CsrMatrix, B: CsrMatrix) -> CsrMatrix:
    """Sparse product keeping every structurally generated entry."""
    if A.ncols != B.nrows:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    ptr, ind, dat = _kernels.csr_matmat(
        A.nrows, B.ncols, A.row_offsets, A.col_indices, A.values, B.row_offsets, B.col_indices, B.values
    )
    return CsrMatrix(A.nrows, B.ncols, ptr, ind, dat)


@dataclass(frozen=True, eq=False)
class DenseFactor:
    """Packed LU factors (unit lower L below the diagonal, U on and above) with row pivots."""

    lu: np.ndarray
    perm: np.ndarray
    norm_inf: float = field(default=0.0)

    @property
    def n(self):
        return self.lu.shape[0]


def dense_lu_factor(A) -> DenseFactor:
    """Gaussian elimination with partial pivoting."""
    lu = np.array(A, dtype=np.float64, copy=True)
    if lu.ndim != 2 or lu.shape[0] != lu.shape[1]:
        raise DimensionError(f"LU needs a square matrix, got shape {lu.shape}")
    n = lu.shape[0]
    perm = np.arange(n)
    norm_inf = float(np.abs(lu).sum(axis=1).max()) if n else 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0.0:
            raise SingularMatrixError(f"zero pivot in column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return DenseFactor(lu, perm, norm_inf)


def dense_lu_solve(F: DenseFactor, b) -> np.ndarray:
    b = _as_vector(b, F.n, "right-hand side")
    lu = F.lu
    x = b[F.perm].copy()
    n = F.n
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


# --------------------------------------------------------------------------
# Matrix Market
# --------------------------------------------------------------------------

def write_matrix_market(A: CsrMatrix, path) -> None:
    rows = np.repeat(np.arange(A.nrows), np.diff(A.row_offsets))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
        for i, j, v in zip((rows + 1).tolist(), (A.col_indices + 1).tolist(), A.values.tolist()):
            fh.write(f"{i} {j} {v!r}\n")


def read_matrix_market(path) -> CsrMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket matrix coordinate real"):
        raise ValueError(f"{path}: not a real coordinate Matrix Market file")
    symmetric = "symmetric" in lines[0].lower()
    body = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("%")]
    nrows, ncols, nnz = (int(t) for t in body[0].split())
    data = np.array([ln.split() for ln in body[1:1 + nnz]], dtype=np.float64).reshape(-1, 3)
    rows = data[:, 0].astype(np.int64) - 1
    cols = data[:, 1].astype(np.int64) - 1
    vals = data[:, 2]
    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return CsrMatrix.from_coo(nrows, ncols, rows, cols, vals)
