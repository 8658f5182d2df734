import math

import numpy as np
import pytest

from zakaibench.diagnostics import (
    APRIORI_CONSTANT,
    apriori_bound_check,
    continuous_dependence_study,
    holder_exponents,
    ito_refinement_study,
    ito_residual,
    mollify_coefficient,
)
from zakaibench.errors import InsufficientScales, MisalignedGrids
from zakaibench.families import kink_divergence_form
from zakaibench.model import DivergenceFormSpec
from zakaibench.sde_sim import generator
from zakaibench.spde_solver import FieldState, Grid, solve


def divspec(d=1, mprime=0, **kw):
    base = dict(
        aij=lambda t, x: np.ones((len(x), 1, 1)),
        aj=None, bi=None, c=None, sigik=None, nuk=None,
        K=8.0, delta=0.3, time_invariant=True,
    )
    base.update(kw)
    return DivergenceFormSpec(d=d, mprime=mprime, **base)


def gauss_state(grid, var=0.25):
    xs = grid.nodes()[:, 0]
    u = np.exp(-(xs**2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    u /= grid.cell_volume * u.sum()
    return FieldState.create(grid, u, 0.0)


def brownian_driver(n, mprime, dt, seed):
    return generator(seed, 0, 0).normal(0.0, math.sqrt(dt), (n, mprime))


class TestItoResidual:
    def test_zero_trajectory_exact_zero(self):
        zero = lambda t, x: np.zeros((len(x), 1, 1))
        spec = divspec(aij=zero, mprime=1,
                       sigik=lambda t, x: np.zeros((len(x), 1, 1)),
                       nuk=lambda t, x: np.zeros((len(x), 1)))
        grid = Grid(d=1, L=2.0, n=41)
        u0 = FieldState.create(grid, np.zeros(grid.size), 0.0)
        dZ = brownian_driver(20, 1, 0.01, 1)
        traj = solve(spec, grid, u0, dZ, 0.01, 0.2)
        rep = ito_residual(traj, spec, p=2.0)
        assert rep.max_abs == 0.0

    def test_heat_flow_energy_identity_two_implementations(self):
        # independent direct energy-identity implementation, p = 2, g = 0
        spec = divspec()
        grid = Grid(d=1, L=4.0, n=81)
        u0 = gauss_state(grid)
        traj = solve(spec, grid, u0, None, 1e-3, 0.1)
        rep = ito_residual(traj, spec, p=2.0)

        w = grid.cell_volume
        h = grid.h
        energy = w * np.sum(traj.values**2, axis=1)
        acc = np.zeros(len(energy))
        int_idx = np.flatnonzero(grid.interior_mask())
        for s in range(traj.n_steps):
            u = traj.values[s]
            du = np.zeros(grid.size)
            du[int_idx] = (u[int_idx + 1] - u[int_idx - 1]) / (2 * h)
            acc[s + 1] = acc[s] + traj.dt * (-2.0) * w * float(np.sum(du**2))
        direct = energy - energy[0] - acc
        np.testing.assert_allclose(rep.residual, direct, atol=1e-10)

    def test_heat_flow_residual_decays_in_dt(self):
        spec = divspec()
        grid = Grid(d=1, L=4.0, n=41)
        u0 = gauss_state(grid)
        reports, slope = ito_refinement_study(spec, grid, u0, dt=0.02, T=0.4, p=2.0, seed=2)
        assert slope is not None and slope >= 0.8

    def test_noise_driven_residual_order_half(self):
        zero = lambda t, x: np.zeros((len(x), 1, 1))
        spec = divspec(aij=zero, mprime=1,
                       sigik=lambda t, x: np.zeros((len(x), 1, 1)),
                       nuk=lambda t, x: np.ones((len(x), 1)))
        grid = Grid(d=1, L=2.0, n=41)
        u0 = gauss_state(grid, var=0.1)
        reports, slope = ito_refinement_study(spec, grid, u0, dt=4e-3, T=0.5, p=2.0, seed=3, levels=4)
        assert 0.35 <= slope <= 0.75

    def test_p_cap_and_alignment_errors(self):
        spec = divspec()
        grid = Grid(d=1, L=2.0, n=21)
        u0 = gauss_state(grid, var=0.1)
        traj = solve(spec, grid, u0, None, 0.01, 0.1)
        with pytest.raises(ValueError):
            ito_residual(traj, spec, p=10.0)
        strided = solve(spec, grid, u0, None, 0.01, 0.1, record_every=5)
        with pytest.raises(MisalignedGrids):
            ito_residual(strided, spec, p=2.0)


class TestAprioriBound:
    def test_zero_trajectory_trivial_margin(self):
        spec = divspec()
        grid = Grid(d=1, L=2.0, n=21)
        u0 = FieldState.create(grid, np.zeros(grid.size), 0.0)
        traj = solve(spec, grid, u0, None, 0.01, 0.1)
        rep = apriori_bound_check(traj, spec, p=2.0, T=0.1)
        assert rep.margin >= 0.0

    def test_heat_flow_margin_positive_for_small_constant(self):
        spec = divspec()
        grid = Grid(d=1, L=4.0, n=81)
        u0 = gauss_state(grid)
        traj = solve(spec, grid, u0, None, 1e-3, 0.25)
        # dissipativity: sup_t ||u||^p is the initial value, margin > 0 already at N = 2
        rep = apriori_bound_check(traj, spec, p=2.0, T=0.25, n_const=2.0)
        lhs_series = grid.cell_volume * np.sum(traj.values**2, axis=1)
        assert np.all(np.diff(lhs_series) <= 1e-12)
        assert rep.margin > 0.0

    def test_frozen_constant_covers_noisy_growth(self):
        spec = divspec(mprime=1,
                       sigik=lambda t, x: 0.3 * np.ones((len(x), 1, 1)),
                       nuk=lambda t, x: 2.0 * np.ones((len(x), 1)))
        grid = Grid(d=1, L=6.0, n=121)
        u0 = gauss_state(grid)
        dt, T = 1e-3, 0.5
        for p in (2.0, 4.0):
            for seed in (100, 101, 102):
                dZ = brownian_driver(int(T / dt), 1, dt, seed)
                traj = solve(spec, grid, u0, dZ, dt, T)
                rep = apriori_bound_check(traj, spec, p=p, T=T, n_const=APRIORI_CONSTANT)
                assert rep.margin > 0.0, f"p={p} seed={seed}"


class TestHolder:
    def test_stationary_flagged_degenerate(self):
        zero = lambda t, x: np.zeros((len(x), 1, 1))
        spec = divspec(aij=zero)
        grid = Grid(d=1, L=2.0, n=41)
        u0 = gauss_state(grid, var=0.1)
        traj = solve(spec, grid, u0, None, 1.0 / 64, 1.0)
        rep = holder_exponents(traj)
        assert rep.degenerate
        assert rep.time_exponent is None

    def test_brownian_multiplicative_time_exponent_half(self):
        zero = lambda t, x: np.zeros((len(x), 1, 1))
        spec = divspec(aij=zero, mprime=1,
                       sigik=lambda t, x: np.zeros((len(x), 1, 1)),
                       nuk=lambda t, x: np.ones((len(x), 1)))
        grid = Grid(d=1, L=2.0, n=41)
        u0 = gauss_state(grid, var=0.1)
        dt = 1.0 / 1024
        dZ = brownian_driver(1024, 1, dt, 5)
        traj = solve(spec, grid, u0, dZ, dt, 1.0)
        rep = holder_exponents(traj)
        assert not rep.degenerate
        assert rep.time_exponent == pytest.approx(0.5, abs=0.1)

    def test_insufficient_scales(self):
        spec = divspec()
        grid = Grid(d=1, L=2.0, n=41)
        u0 = gauss_state(grid, var=0.1)
        traj = solve(spec, grid, u0, None, 0.01, 0.05)
        with pytest.raises(InsufficientScales):
            holder_exponents(traj)


class TestContinuousDependence:
    def test_mollify_kink_closed_form(self):
        # E|x + eps Z| at x = 0 equals eps sqrt(2/pi)
        a = lambda t, x: 1.0 + 0.5 * np.abs(x[:, 0])
        for eps in (0.4, 0.1):
            am = mollify_coefficient(a, eps, dim=1, quad_nodes=401)
            got = am(0.0, np.zeros((1, 1)))[0]
            assert got == pytest.approx(1.0 + 0.5 * eps * math.sqrt(2 / math.pi), rel=2e-4)

    def test_zero_scale_error_exactly_zero(self):
        spec = kink_divergence_form()
        grid = Grid(d=1, L=4.0, n=81)
        u0 = gauss_state(grid)
        dZ = brownian_driver(50, spec.mprime, 2e-3, 7)
        rep = continuous_dependence_study(spec, grid, u0, dZ, 2e-3, 0.1, eps_list=[0.0])
        assert rep.w1p_errors[0] == 0.0
        assert rep.sup_lp_errors[0] == 0.0

    def test_affine_coefficients_mollification_invariant(self):
        spec = divspec(aij=lambda t, x: (2.0 + 0.1 * x[:, 0])[:, None, None],
                       aj=lambda t, x: 0.2 * x)
        grid = Grid(d=1, L=4.0, n=81)
        u0 = gauss_state(grid)
        rep = continuous_dependence_study(spec, grid, u0, None, 2e-3, 0.1, eps_list=[0.3, 0.1])
        assert rep.sup_lp_errors.max() <= 1e-8

    def test_kink_errors_decay_across_halvings(self):
        spec = kink_divergence_form()
        grid = Grid(d=1, L=4.0, n=161)
        u0 = gauss_state(grid)
        dt, T = 1e-3, 0.2
        dZ = brownian_driver(int(T / dt), spec.mprime, dt, 11)
        rep = continuous_dependence_study(spec, grid, u0, dZ, dt, T, eps_list=[0.4, 0.2, 0.1, 0.05])
        assert rep.monotone_decay(slack=0.10)
        assert rep.w1p_errors[-1] < rep.w1p_errors[0]
