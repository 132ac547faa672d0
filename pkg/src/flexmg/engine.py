"""Solve phase: run cycle programs on a fixed hierarchy, as a stationary
iteration or inside preconditioned CG, and measure the two objectives.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from flexmg import _kernels
from flexmg.amg import AmgHierarchy
from flexmg.cycles.program import (
    Ascend,
    BaseV,
    CoarseSolve,
    CycleProgram,
    Descend,
    NoOp,
    ProgramError,
    Smooth,
    SmootherKind,
    validate,
)
from flexmg.sparse import CsrMatrix, DimensionError, dense_lu_solve, norm2

PENALTY = 1e6
DIVERGENCE_FACTOR = 1e6


# --------------------------------------------------------------------------
# smoothers on a single operator
# --------------------------------------------------------------------------

def _diag(A, diag):
    return A.diagonal() if diag is None else diag


def smooth_jacobi(A: CsrMatrix, x, f, omega, diag=None):
    """One damped Jacobi sweep; returns a new vector."""
    x = np.array(x, dtype=np.float64)
    work = np.empty_like(x)
    _kernels.jacobi_sweep(A.row_offsets, A.col_indices, A.values, _diag(A, diag), x,
                          np.ascontiguousarray(f, dtype=np.float64), float(omega), work)
    return x


def smooth_gs_forward(A: CsrMatrix, x, f, omega, diag=None):
    x = np.array(x, dtype=np.float64)
    _kernels.gs_forward_sweep(A.row_offsets, A.col_indices, A.values, _diag(A, diag), x,
                              np.ascontiguousarray(f, dtype=np.float64), float(omega))
    return x


def smooth_gs_backward(A: CsrMatrix, x, f, omega, diag=None):
    x = np.array(x, dtype=np.float64)
    _kernels.gs_backward_sweep(A.row_offsets, A.col_indices, A.values, _diag(A, diag), x,
                               np.ascontiguousarray(f, dtype=np.float64), float(omega))
    return x


# --------------------------------------------------------------------------
# program interpreter
# --------------------------------------------------------------------------

class EvalContext:
    """Per-level scratch vectors. One context per concurrent evaluation."""

    def __init__(self, hierarchy: AmgHierarchy):
        self.hierarchy = hierarchy
        sizes = hierarchy.sizes
        self.x = [np.zeros(n) for n in sizes]
        self.f = [np.zeros(n) for n in sizes]
        self.r = [np.zeros(n) for n in sizes]
        self.tmp = [np.zeros(n) for n in sizes]

    # in-place primitives -------------------------------------------------
    def smooth(self, level, kind, omega):
        lvl = self.hierarchy.levels[level]
        A = lvl.A
        args = (A.row_offsets, A.col_indices, A.values, lvl.diag, self.x[level], self.f[level], omega)
        if kind is SmootherKind.GS_FORWARD:
            _kernels.gs_forward_sweep(*args)
        elif kind is SmootherKind.GS_BACKWARD:
            _kernels.gs_backward_sweep(*args)
        else:
            _kernels.jacobi_sweep(*args, self.tmp[level])

    def restrict(self, level):
        """Residual on ``level`` restricted into ``f[level+1]``; zero coarse guess."""
        lvl = self.hierarchy.levels[level]
        A, R = lvl.A, lvl.R
        _kernels.csr_residual(A.row_offsets, A.col_indices, A.values, self.x[level], self.f[level], self.r[level])
        _kernels.csr_matvec(R.row_offsets, R.col_indices, R.values, self.r[level], self.f[level + 1])
        self.x[level + 1][:] = 0.0

    def prolongate(self, level, omega):
        """``x[level] += omega * P x[level+1]``."""
        P = self.hierarchy.levels[level].P
        _kernels.csr_matvec(P.row_offsets, P.col_indices, P.values, self.x[level + 1], self.tmp[level])
        self.x[level] += omega * self.tmp[level]

    def coarse_solve(self, level):
        self.x[level][:] = dense_lu_solve(self.hierarchy.coarse_factor, self.f[level])

    def fixed_vcycle(self, level):
        """V(1,1) with GS forward down, GS backward up, exact solve at the bottom."""
        last = self.hierarchy.depth - 1
        if level == last:
            self.coarse_solve(level)
            return
        self.smooth(level, SmootherKind.GS_FORWARD, 1.0)
        self.restrict(level)
        self.fixed_vcycle(level + 1)
        self.prolongate(level, 1.0)
        self.smooth(level, SmootherKind.GS_BACKWARD, 1.0)


def check_program(program, hierarchy):
    errors = validate(program, hierarchy.depth, program.flex_levels)
    if errors:
        raise ProgramError(errors)


def run_steps(ctx: EvalContext, steps):
    """Execute ``steps`` starting at level 0 on the vectors already in ``ctx``."""
    level = 0
    last = ctx.hierarchy.depth - 1
    for st in steps:
        if isinstance(st, Smooth):
            ctx.smooth(level, st.kind, st.weight)
        elif isinstance(st, Descend):
            ctx.restrict(level)
            level += 1
        elif isinstance(st, Ascend):
            level -= 1
            ctx.prolongate(level, st.weight)
        elif isinstance(st, BaseV):
            ctx.restrict(level)
            ctx.fixed_vcycle(level + 1)
            ctx.prolongate(level, st.weight)
        elif isinstance(st, CoarseSolve):
            if level != last:
                raise ProgramError([f"cs executed on level {level}, coarsest is {last}"])
            ctx.coarse_solve(level)
        elif not isinstance(st, NoOp):
            raise TypeError(f"unknown step {st!r}")


def apply_program(hierarchy: AmgHierarchy, program: CycleProgram, ctx: EvalContext | None, f, x):
    """One application of ``program``; returns the updated approximation."""
    if ctx is None:
        ctx = EvalContext(hierarchy)
    n = hierarchy.levels[0].n
    if len(f) != n or len(x) != n:
        raise DimensionError(f"vectors must have length {n}")
    ctx.f[0][:] = f
    ctx.x[0][:] = x
    run_steps(ctx, program.steps)
    return ctx.x[0].copy()


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass
class SolveResult:
    iterations: int
    converged: bool
    conv_factor: float
    wall_time: float
    work_units: float
    residual_history: list = field(default_factory=list)
    diverged: bool = False
    breakdown: bool = False
    x: np.ndarray | None = field(default=None, repr=False)

    def to_record(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "conv_factor": self.conv_factor,
            "wall_time_s": self.wall_time,
            "work_units": self.work_units,
            "residuals": list(self.residual_history),
            "diverged": self.diverged,
            "breakdown": self.breakdown,
        }

    def to_json(self):
        return json.dumps(self.to_record())


def _conv_factor(history, k):
    if k == 0:
        return 1.0
    if history[0] == 0.0:
        return 0.0
    ratio = history[-1] / history[0]
    if not math.isfinite(ratio):
        return math.inf
    return ratio ** (1.0 / k)


def solve(hierarchy, program, f, x0=None, tol=1e-8, max_iter=100, ctx=None, check=True):
    """Stationary iteration with ``program`` as the iteration operator."""
    if check:
        check_program(program, hierarchy)
    ctx = ctx or EvalContext(hierarchy)
    A = hierarchy.levels[0].A
    f = np.ascontiguousarray(f, dtype=np.float64)
    x = np.zeros(A.nrows) if x0 is None else np.array(x0, dtype=np.float64)
    r = np.empty(A.nrows)
    _kernels.csr_residual(A.row_offsets, A.col_indices, A.values, x, f, r)
    history = [norm2(r)]
    wu = work_units(program, hierarchy)
    if history[0] == 0.0:
        return SolveResult(0, True, 0.0, 0.0, 0.0, history, x=x)
    ctx.f[0][:] = f
    ctx.x[0][:] = x
    converged = diverged = False
    k = 0
    t0 = time.perf_counter()
    while k < max_iter:
        run_steps(ctx, program.steps)
        k += 1
        _kernels.csr_residual(A.row_offsets, A.col_indices, A.values, ctx.x[0], f, r)
        rn = norm2(r)
        history.append(rn)
        if rn <= tol * history[0]:
            converged = True
            break
        if not math.isfinite(rn) or rn > DIVERGENCE_FACTOR * history[0]:
            diverged = True
            break
    elapsed = time.perf_counter() - t0
    return SolveResult(k, converged, _conv_factor(history, k), elapsed, wu * k, history, diverged,
                       x=ctx.x[0].copy())


def pcg(A, hierarchy, program, f, x0=None, tol=1e-8, max_iter=500, flexible=False, ctx=None, check=True):
    """Conjugate gradients with one application of ``program`` per iteration.

    ``program=None`` gives unpreconditioned CG. ``flexible=True`` switches to
    the Polak-Ribiere form of beta, which tolerates preconditioners that are
    not symmetric or change between iterations.
    """
    if program is not None:
        if check:
            check_program(program, hierarchy)
        ctx = ctx or EvalContext(hierarchy)
    f = np.ascontiguousarray(f, dtype=np.float64)
    n = A.nrows
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = np.empty(n)
    _kernels.csr_residual(A.row_offsets, A.col_indices, A.values, x, f, r)
    history = [norm2(r)]
    wu_cycle = 0.0 if program is None else work_units(program, hierarchy)
    wu_iter = wu_cycle + A.nnz / hierarchy.levels[0].A.nnz
    if history[0] == 0.0:
        return SolveResult(0, True, 0.0, 0.0, 0.0, history, x=x)

    zero = np.zeros(n)

    def precondition(res):
        if program is None:
            return res.copy()
        return apply_program(hierarchy, program, ctx, res, zero)

    t0 = time.perf_counter()
    z = precondition(r)
    p = z.copy()
    rz = float(r @ z)
    q = np.empty(n)
    converged = breakdown = diverged = False
    k = 0
    while k < max_iter:
        _kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, p, q)
        pq = float(p @ q)
        if pq <= 0.0 or rz == 0.0 or not math.isfinite(pq):
            breakdown = True
            break
        alpha = rz / pq
        x += alpha * p
        r_old = r.copy() if flexible else None
        r -= alpha * q
        k += 1
        rn = norm2(r)
        history.append(rn)
        if rn <= tol * history[0]:
            converged = True
            break
        if not math.isfinite(rn) or rn > DIVERGENCE_FACTOR * history[0]:
            diverged = True
            break
        z = precondition(r)
        rz_new = float(r @ z)
        beta = (float(z @ (r - r_old)) if flexible else rz_new) / rz
        rz = rz_new
        p = z + beta * p
    elapsed = time.perf_counter() - t0
    return SolveResult(k, converged, _conv_factor(history, k), elapsed, wu_iter * k, history, diverged,
                       breakdown, x=x)


# --------------------------------------------------------------------------
# cost model
# --------------------------------------------------------------------------

def _fixed_vcycle_units(hierarchy, level):
    levels = hierarchy.levels
    last = hierarchy.depth - 1
    if level == last:
        return 2.0 * levels[last].n ** 2
    lvl = levels[level]
    return (2 * lvl.A.nnz + lvl.A.nnz + lvl.R.nnz + lvl.P.nnz) + _fixed_vcycle_units(hierarchy, level + 1)


def step_costs(program, hierarchy):
    """Un-normalized cost of each step (nonzeros touched)."""
    levels = hierarchy.levels
    last = hierarchy.depth - 1
    level = 0
    out = []
    for st in program.steps:
        if isinstance(st, Smooth):
            c = levels[level].A.nnz
        elif isinstance(st, Descend):
            c = levels[level].A.nnz + levels[level].R.nnz
            level += 1
        elif isinstance(st, Ascend):
            level -= 1
            c = levels[level].P.nnz
        elif isinstance(st, BaseV):
            lvl = levels[level]
            c = lvl.A.nnz + lvl.R.nnz + _fixed_vcycle_units(hierarchy, level + 1) + lvl.P.nnz
        elif isinstance(st, CoarseSolve):
            c = 2.0 * levels[last].n ** 2
        else:
            c = 0.0
        out.append(float(c))
    return out


def work_units(program, hierarchy):
    """Cost of one application in fine-level operator applications."""
    return sum(step_costs(program, hierarchy)) / hierarchy.levels[0].A.nnz


# --------------------------------------------------------------------------
# dense error propagation (test oracle)
# --------------------------------------------------------------------------

MAX_DENSE = 200


def error_propagation_dense(hierarchy, program):
    n = hierarchy.levels[0].n
    if n > MAX_DENSE:
        raise ValueError(f"dense error propagation limited to n <= {MAX_DENSE}, got {n}")
    check_program(program, hierarchy)
    ctx = EvalContext(hierarchy)
    zero = np.zeros(n)
    E = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        E[:, j] = apply_program(hierarchy, program, ctx, zero, e)
    return E


def spectral_radius(E, steps=1000, tol=1e-10, seed=0):
    """Largest eigenvalue modulus by power iteration.

    The growth rate is averaged over a trailing window so that complex
    dominant pairs (oscillating iterates) still give the modulus.
    """
    E = np.asarray(E, dtype=np.float64)
    v = np.random.default_rng(seed).standard_normal(E.shape[0])
    v /= np.linalg.norm(v)
    logs = []
    prev = None
    window = 20
    for _ in range(steps):
        w = E @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        logs.append(math.log(nw))
        v = w / nw
        if len(logs) >= 2 * window:
            est = math.exp(sum(logs[-window:]) / window)
            if prev is not None and abs(est - prev) <= tol * max(est, 1.0):
                return est
            prev = est
    return math.exp(sum(logs[-window:]) / window)


# --------------------------------------------------------------------------
# fitness
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FitnessPair:
    cost_per_iter: float
    conv_factor: float
    penalty: bool = False

    @classmethod
    def penalized(cls):
        return cls(PENALTY, PENALTY, True)

    def objectives(self):
        return (self.cost_per_iter, self.conv_factor)


@dataclass
class FitnessProblem:
    """What a program is scored on: a hierarchy plus the evaluation run."""

    hierarchy: AmgHierarchy
    f: np.ndarray
    x0: np.ndarray
    mode: str = "solver"  # or "preconditioner"
    fitness: str = "work_units"  # or "wall_time"
    max_cycles: int = 15
    tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in ("solver", "preconditioner"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.fitness not in ("work_units", "wall_time"):
            raise ValueError(f"unknown fitness {self.fitness!r}")


def evaluate_fitness(program, problem: FitnessProblem, ctx=None):
    """Score one program; any failure maps to the penalty pair."""
    H = problem.hierarchy
    try:
        check_program(program, H)
        if problem.mode == "solver":
            res = solve(H, program, problem.f, problem.x0, problem.tol, problem.max_cycles, ctx, check=False)
        else:
            A = H.levels[0].A
            res = pcg(A, H, program, problem.f, problem.x0, problem.tol, problem.max_cycles, ctx=ctx, check=False)
    except (ProgramError, ArithmeticError, FloatingPointError, ValueError):
        return FitnessPair.penalized()
    rho = res.conv_factor
    if res.diverged or res.breakdown or not math.isfinite(rho) or rho >= 1.0 or res.iterations == 0:
        return FitnessPair.penalized()
    if problem.fitness == "work_units":
        cost = res.work_units / res.iterations
    else:
        cost = res.wall_time / res.iterations
    return FitnessPair(cost, rho)


def work_to_solution(result: SolveResult):
    """Total work units spent; infinite when the run did not converge."""
    return result.work_units if result.converged else math.inf
