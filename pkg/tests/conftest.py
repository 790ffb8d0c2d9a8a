"""Shared fixtures.

The k=1/2 eigensystem costs several seconds to assemble (25 bracketed
root solves plus normalization quadratures), so it is built once per
session and shared.  Everything else is cheap enough to construct
inline in the tests that need it.
"""

import pytest

from hfl.model import ModelParams
from hfl.spectral import DensityField, solve_eigen


@pytest.fixture(scope="session")
def p_half():
    return ModelParams(k=0.5, a=1.0, L=1.0)


@pytest.fixture(scope="session")
def p_neg_half():
    return ModelParams(k=-0.5, a=1.0, L=1.0)


@pytest.fixture(scope="session")
def eigen25(p_half):
    return solve_eigen(p_half, n_max=25)


@pytest.fixture(scope="session")
def eigen6(p_half):
    return solve_eigen(p_half, n_max=6)


@pytest.fixture(scope="session")
def field_half(p_half, eigen25):
    return DensityField(p_half, eigen=eigen25)


@pytest.fixture(scope="session")
def field_neg_half(p_neg_half):
    return DensityField(p_neg_half, eigen=None)
