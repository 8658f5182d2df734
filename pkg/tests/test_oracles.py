import math

import numpy as np
import pytest

from zakaibench.errors import (
    CorrelatedNoiseUnsupported,
    CovarianceBlowup,
    DimensionMismatch,
    WeightDegeneracy,
)
from zakaibench.families import affine_system
from zakaibench.oracles import (
    LinearGaussianSpec,
    ParticleEnsemble,
    kalman_bucy_solve,
    particle_filter_solve,
    systematic_resample,
)
from zakaibench.sde_sim import simulate_system


class TestKalmanBucy:
    def test_no_information_lyapunov_limit(self):
        # H = 0, uncorrelated: dP = -2P + 1, P_inf = 1/2
        lg = LinearGaussianSpec(
            F=[[-1.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], m0=[0.0], P0=[[0.2]]
        )
        spec = affine_system(F=[[-1.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4)
        paths = simulate_system(spec, [0.0], [0.0], 1e-3, 5.0, seed=0)
        out = kalman_bucy_solve(lg, paths)
        assert out.cov[-1, 0, 0] == pytest.approx(0.5, abs=1e-4)

    def test_static_signal_riccati_closed_form(self):
        # F = 0, theta = 0, H = Theta = 1: P(t) = P0 / (1 + P0 t)
        p0 = 0.8
        lg = LinearGaussianSpec(
            F=[[0.0]], H=[[1.0]], theta=[[0.0, 0.0]], Theta=[[0.0, 1.0]], m0=[0.0], P0=[[p0]]
        )
        spec = affine_system(F=[[0.0]], H=[[1.0]], theta=[[0.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4)
        paths = simulate_system(spec, [0.4], [0.0], 1e-4, 1.0, seed=1)
        out = kalman_bucy_solve(lg, paths)
        assert out.cov[-1, 0, 0] == pytest.approx(p0 / (1 + p0), abs=1e-5)

    def test_uncorrelated_gain_matches_second_implementation(self):
        # independent implementation without the cross term, run on
        # cross-term-free input
        rng = np.random.default_rng(7)
        F = np.array([[-0.8, 0.2], [0.0, -1.2]])
        H = np.array([[1.0, 0.5]])
        theta = np.hstack([np.eye(2) * 0.9, np.zeros((2, 1))])
        Theta = np.array([[0.0, 0.0, 0.7]])
        lg = LinearGaussianSpec(F=F, H=H, theta=theta, Theta=Theta, m0=[0.1, -0.2], P0=0.3 * np.eye(2))
        spec = affine_system(F=F, H=H, theta=theta, Theta=Theta, K=8.0, delta=0.1)
        dt = 1e-3
        paths = simulate_system(spec, [0.1, -0.2], [0.0], dt, 1.0, seed=2)
        out = kalman_bucy_solve(lg, paths)

        # plain textbook KF without correlation handling
        Q = theta @ theta.T
        R = Theta @ Theta.T
        Ri = np.linalg.inv(R)
        m = np.array([0.1, -0.2])
        P = 0.3 * np.eye(2)
        for k in range(paths.n_steps):
            G = P @ H.T @ Ri
            dy = paths.y_path[k + 1] - paths.y_path[k]
            m = m + F @ m * dt + G @ (dy - H @ m * dt)
            rhs = lambda PP: F @ PP + PP @ F.T + Q - (PP @ H.T @ Ri) @ R @ (PP @ H.T @ Ri).T
            half = P + 0.5 * dt * rhs(P)
            P = P + dt * rhs(half)
            P = 0.5 * (P + P.T)
        np.testing.assert_allclose(out.mean[-1], m, atol=1e-10)
        np.testing.assert_allclose(out.cov[-1], P, atol=1e-10)

    def test_covariance_blowup_guard(self):
        lg = LinearGaussianSpec(
            F=[[4.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], m0=[0.0], P0=[[1.0]]
        )
        spec = affine_system(F=[[4.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4)
        paths = simulate_system(spec, [0.0], [0.0], 1e-2, 4.0, seed=3)
        with pytest.raises(CovarianceBlowup):
            kalman_bucy_solve(lg, paths)

    def test_dimension_mismatch(self):
        lg = LinearGaussianSpec(
            F=np.eye(2) * -1, H=[[1.0, 0.0]], theta=np.hstack([np.eye(2), np.zeros((2, 1))]),
            Theta=[[0.0, 0.0, 1.0]], m0=[0.0, 0.0], P0=np.eye(2),
        )
        spec = affine_system(F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4)
        paths = simulate_system(spec, [0.0], [0.0], 1e-2, 0.1, seed=4)
        with pytest.raises(DimensionMismatch):
            kalman_bucy_solve(lg, paths)

    def test_more_observations_never_hurt(self):
        # stacking an observation channel cannot increase trace(P_T)
        base = LinearGaussianSpec(
            F=[[-0.5]], H=[[1.0]], theta=[[1.0, 0.0, 0.0]], Theta=[[0.0, 1.0, 0.0]],
            m0=[0.0], P0=[[0.5]],
        )
        stacked = LinearGaussianSpec(
            F=[[-0.5]], H=[[1.0], [0.5]], theta=[[1.0, 0.0, 0.0]],
            Theta=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], m0=[0.0], P0=[[0.5]],
        )
        spec2 = affine_system(
            F=[[-0.5]], H=[[1.0], [0.5]], theta=[[1.0, 0.0, 0.0]],
            Theta=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], K=8.0, delta=0.2,
        )
        paths2 = simulate_system(spec2, [0.2], [0.0, 0.0], 1e-3, 1.0, seed=5)
        spec1 = affine_system(
            F=[[-0.5]], H=[[1.0]], theta=[[1.0, 0.0, 0.0]], Theta=[[0.0, 1.0, 0.0]], K=8.0, delta=0.2
        )
        paths1 = simulate_system(spec1, [0.2], [0.0], 1e-3, 1.0, seed=5)
        p1 = kalman_bucy_solve(base, paths1).cov[-1].trace()
        p2 = kalman_bucy_solve(stacked, paths2).cov[-1].trace()
        assert p2 <= p1 + 1e-12

    def test_covariance_symmetric(self):
        lg = LinearGaussianSpec(
            F=[[-1.0, 0.3], [0.1, -0.7]], H=[[1.0, 0.0]],
            theta=np.hstack([np.eye(2), np.zeros((2, 1))]), Theta=[[0.0, 0.0, 1.0]],
            m0=[0.0, 0.0], P0=np.eye(2) * 0.4,
        )
        spec = affine_system(
            F=[[-1.0, 0.3], [0.1, -0.7]], H=[[1.0, 0.0]],
            theta=np.hstack([np.eye(2), np.zeros((2, 1))]), Theta=[[0.0, 0.0, 1.0]],
            K=8.0, delta=0.1,
        )
        paths = simulate_system(spec, [0.0, 0.0], [0.0], 1e-3, 0.5, seed=6)
        out = kalman_bucy_solve(lg, paths)
        asym = np.abs(out.cov - np.transpose(out.cov, (0, 2, 1))).max()
        assert asym == 0.0


def _uncorrelated_spec():
    return affine_system(
        F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4
    )


def _gauss_sampler(mean, var):
    def sampler(rng, n):
        return rng.normal(mean, math.sqrt(var), (n, 1))

    return sampler


class TestParticleFilter:
    def test_no_information_keeps_prior_predictive(self):
        spec = affine_system(
            F=[[-1.0]], H=[[0.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4
        )
        paths = simulate_system(spec, [0.0], [0.0], 1e-2, 0.5, seed=10)
        out = particle_filter_solve(spec, paths, 500, seed=1, init_sampler=_gauss_sampler(0.0, 0.5))
        # B = 0: weights stay uniform, ESS pinned at N
        np.testing.assert_allclose(out.ess, 500.0, rtol=1e-9)
        assert len(out.resample_steps) == 0

    def test_matches_kalman_on_linear_gaussian(self):
        spec = _uncorrelated_spec()
        m0, p0 = 0.2, 0.4
        dt, T, n_part = 1e-2, 1.0, 40_000
        paths = simulate_system(spec, lambda rng: rng.normal(m0, math.sqrt(p0), 1), [0.0], dt, T, seed=11)
        lg = LinearGaussianSpec(
            F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], m0=[m0], P0=[[p0]]
        )
        kb = kalman_bucy_solve(lg, paths)
        pf = particle_filter_solve(spec, paths, n_part, seed=2, init_sampler=_gauss_sampler(m0, p0))
        # MC error of the posterior mean ~ posterior std / sqrt(ESS-ish)
        mc = 3.0 * math.sqrt(float(kb.cov[-1, 0, 0])) / math.sqrt(n_part / 4)
        assert abs(pf.mean[-1, 0] - kb.mean[-1, 0]) <= mc + 2 * dt

    def test_single_particle_degenerate_but_legal(self):
        spec = _uncorrelated_spec()
        paths = simulate_system(spec, [0.1], [0.0], 1e-2, 0.2, seed=12)
        out = particle_filter_solve(spec, paths, 1, seed=3, init_sampler=_gauss_sampler(0.0, 0.5))
        np.testing.assert_allclose(out.ess, 1.0, atol=1e-12)

    def test_correlated_noise_rejected(self):
        spec = affine_system(
            F=[[-1.0]], H=[[1.0]], theta=[[1.0, 0.5]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4
        )
        paths = simulate_system(spec, [0.0], [0.0], 1e-2, 0.1, seed=13)
        with pytest.raises(CorrelatedNoiseUnsupported):
            particle_filter_solve(spec, paths, 100, seed=4)

    def test_weight_degeneracy_raises(self):
        spec = affine_system(
            F=[[-1.0]], H=[[1e200]], theta=[[1.0, 0.0]], Theta=[[0.0, 1.0]], K=8.0, delta=0.4
        )
        paths = simulate_system(spec, [1.0], [0.0], 1e-2, 0.1, seed=14)
        with pytest.raises(WeightDegeneracy):
            particle_filter_solve(spec, paths, 50, seed=5, init_sampler=_gauss_sampler(1.0, 0.1))


class TestEnsemble:
    def _ensemble(self, n=1000, seed=0):
        rng = np.random.default_rng(seed)
        particles = rng.normal(size=(n, 2))
        w = rng.uniform(0.1, 1.0, n)
        return ParticleEnsemble.from_unnormalized(particles, w)

    def test_weights_simplex_invariant(self):
        ens = self._ensemble()
        assert ens.weights.min() >= 0.0
        assert 1.0 <= ens.ess <= len(ens.weights)

    def test_exchangeability_exact(self):
        ens = self._ensemble()
        rng = np.random.default_rng(42)
        perm = rng.permutation(len(ens.weights))
        permuted = ParticleEnsemble(particles=ens.particles[perm], weights=ens.weights[perm])
        assert permuted.mean()[0] == ens.mean()[0]
        assert permuted.mean()[1] == ens.mean()[1]
        np.testing.assert_array_equal(permuted.second_moment(), ens.second_moment())
        assert permuted.ess == ens.ess

    def test_resampling_unbiased_mean(self):
        ens = self._ensemble(n=400, seed=3)
        target = ens.mean()[0]
        rng = np.random.default_rng(9)
        n_trials = 1000
        means = np.empty(n_trials)
        for i in range(n_trials):
            idx = systematic_resample(ens.weights, float(rng.uniform()))
            means[i] = ens.particles[idx, 0].mean()
        se = means.std(ddof=1) / math.sqrt(n_trials)
        assert abs(means.mean() - target) <= 3 * max(se, 1e-12)

    def test_systematic_resample_degenerate_weight(self):
        w = np.zeros(10)
        w[3] = 1.0
        idx = systematic_resample(w, 0.37)
        np.testing.assert_array_equal(idx, 3)
