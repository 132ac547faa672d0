import numpy as np
import pytest

from flexmg.amg import SetupParams, build_hierarchy
from flexmg.sparse import CsrMatrix, ProblemSpec, assemble_anisotropic_7pt

_acceptance_lines = []


def record_acceptance(number, passed, detail=""):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


def random_sparse(rng, nrows, ncols, density=0.3):
    dense = rng.standard_normal((nrows, ncols))
    dense[rng.random((nrows, ncols)) > density] = 0.0
    return dense


def poisson_1d(n):
    dense = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return CsrMatrix.from_dense(dense)


@pytest.fixture(scope="session")
def aniso_5():
    A = assemble_anisotropic_7pt(ProblemSpec.cube(5, a=0.001))
    return A, build_hierarchy(A)


@pytest.fixture(scope="session")
def iso_32():
    A = assemble_anisotropic_7pt(ProblemSpec.cube(32, a=1.0))
    return A, build_hierarchy(A)


@pytest.fixture(scope="session")
def aniso_16():
    A = assemble_anisotropic_7pt(ProblemSpec.cube(16, a=0.001))
    return A, build_hierarchy(A)


@pytest.fixture(scope="session")
def three_level():
    """Isotropic 5^3 problem coarsened to exactly three levels (small enough for dense oracles)."""
    A = assemble_anisotropic_7pt(ProblemSpec.cube(5, a=1.0))
    H = build_hierarchy(A, SetupParams(coarse_max_size=12))
    assert H.depth == 3
    return A, H
