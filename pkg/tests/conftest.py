import numpy as np
import pytest

from zakaibench.families import affine_system, gaussian_density
from zakaibench.spde_solver import Grid


@pytest.fixture
def lg_correlated():
    """The correlated linear-Gaussian benchmark system (reduced scale)."""
    return affine_system(
        F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.5]], Theta=[[0.0, 1.0]], K=16.0, delta=0.4
    )


@pytest.fixture
def lg_uncorrelated():
    return affine_system(
        F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=16.0, delta=0.4
    )


@pytest.fixture
def fp_spec():
    """No observation drift, disjoint noise: deterministic Fokker-Planck."""
    return affine_system(
        F=[[-1.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=16.0, delta=0.4
    )


def unit_gaussian_pi0(grid: Grid, mean=0.0, cov=0.5) -> np.ndarray:
    vals = gaussian_density(grid.nodes(), mean, cov)
    vals[grid.ring_mask(1)] = 0.0
    return vals / (grid.cell_volume * vals.sum())
