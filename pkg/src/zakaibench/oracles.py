"""Ground-truth references: Kalman-Bucy filter and bootstrap particle filter.

The continuous-time Kalman-Bucy filter handles linear-Gaussian systems
with correlated signal/observation noise; the bootstrap particle filter
covers nonlinear drifts but requires disjoint noise columns (no cross
term).  Both consume the same :class:`~zakaibench.sde_sim.PathBundle` the
filter runs on, so comparisons share one observation path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorrelatedNoiseUnsupported,
    CovarianceBlowup,
    DimensionMismatch,
    WeightDegeneracy,
)
from .model import SystemSpec, eval_batch, inv_sqrt
from .sde_sim import STREAM_PARTICLES, STREAM_RESAMPLE, PathBundle, generator

__all__ = [
    "LinearGaussianSpec",
    "ParticleEnsemble",
    "KalmanOutput",
    "ParticleFilterOutput",
    "kalman_bucy_solve",
    "particle_filter_solve",
    "systematic_resample",
]


@dataclass(frozen=True)
class LinearGaussianSpec:
    """dx = F x dt + theta dw, dy = H x dt + Theta dw, Gaussian prior."""

    F: np.ndarray
    H: np.ndarray
    theta: np.ndarray
    Theta: np.ndarray
    m0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        th = np.atleast_2d(np.asarray(self.theta, dtype=float))
        Th = np.atleast_2d(np.asarray(self.Theta, dtype=float))
        m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        P0 = np.atleast_2d(np.asarray(self.P0, dtype=float))
        for name, val in (("F", F), ("H", H), ("theta", th), ("Theta", Th), ("m0", m0), ("P0", P0)):
            object.__setattr__(self, name, val)
        d = F.shape[0]
        dy, mm = Th.shape
        if F.shape != (d, d) or H.shape != (dy, d) or th.shape != (d, mm):
            raise DimensionMismatch(
                f"inconsistent shapes: F{F.shape} H{H.shape} theta{th.shape} Theta{Th.shape}"
            )
        if m0.shape != (d,) or P0.shape != (d, d):
            raise DimensionMismatch(f"prior shapes m0{m0.shape} P0{P0.shape} do not match d={d}")
        if np.linalg.norm(P0 - P0.T) > 1e-10 or np.linalg.eigvalsh(P0).min() < -1e-12:
            raise ValueError("P0 must be symmetric positive semidefinite")
        inv_sqrt(Th @ Th.T)  # raises NearSingular when degenerate

    @property
    def d(self) -> int:
        return self.F.shape[0]

    @property
    def dy(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class KalmanOutput:
    times: np.ndarray
    mean: np.ndarray  # (N+1, d)
    cov: np.ndarray  # (N+1, d, d)


def kalman_bucy_solve(lg: LinearGaussianSpec, paths: PathBundle, dt: float | None = None) -> KalmanOutput:
    """Continuous-time Kalman-Bucy filter with correlated noise.

    Gain G = (P H* + theta Theta*) (Theta Theta*)^{-1}; the covariance
    Riccati equation dP = (F P + P F* + theta theta* - G (Theta Theta*) G*) dt
    is integrated by deterministic RK2 (it does not see the data), the mean
    by Euler against the observation increments.  P is symmetrized each
    step and eigenvalue-floored at zero with a warning.
    """
    if paths.y_path.shape[1] != lg.dy or paths.x_path.shape[1] != lg.d:
        raise DimensionMismatch(
            f"paths carry (d={paths.x_path.shape[1]}, dy={paths.y_path.shape[1]}), "
            f"spec wants (d={lg.d}, dy={lg.dy})"
        )
    dt = paths.dt if dt is None else float(dt)
    thin = int(round(dt / paths.dt))
    n = paths.n_steps // thin

    F, H = lg.F, lg.H
    Q = lg.theta @ lg.theta.T
    S = lg.theta @ lg.Theta.T
    R = lg.Theta @ lg.Theta.T
    Ri = np.linalg.inv(R)

    def riccati_rhs(P):
        G = (P @ H.T + S) @ Ri
        return F @ P + P @ F.T + Q - G @ R @ G.T

    mean = np.empty((n + 1, lg.d))
    cov = np.empty((n + 1, lg.d, lg.d))
    mean[0] = lg.m0
    cov[0] = lg.P0
    m = lg.m0.copy()
    P = lg.P0.copy()
    floored = False
    for k in range(n):
        G = (P @ H.T + S) @ Ri
        dy_inc = paths.y_path[(k + 1) * thin] - paths.y_path[k * thin]
        m = m + F @ m * dt + G @ (dy_inc - H @ m * dt)

        half = P + 0.5 * dt * riccati_rhs(P)
        P = P + dt * riccati_rhs(half)
        P = 0.5 * (P + P.T)
        w, V = np.linalg.eigh(P)
        if w.min() < 0:
            if not floored:
                warnings.warn(
                    f"covariance eigenvalue {w.min():.3e} floored at 0 (t={(k + 1) * dt:.4g})",
                    stacklevel=2,
                )
                floored = True
            P = (V * np.maximum(w, 0.0)) @ V.T
        if np.linalg.norm(P) > 1e6:
            raise CovarianceBlowup(f"||P|| = {np.linalg.norm(P):.3e} at t={(k + 1) * dt:.4g}")
        mean[k + 1] = m
        cov[k + 1] = P
    return KalmanOutput(times=np.arange(n + 1) * dt, mean=mean, cov=cov)


# ---------------------------------------------------------------------------
# bootstrap particle filter


def _stable_sum(v: np.ndarray) -> float:
    """Permutation-invariant summation (canonical order before reduction)."""
    return float(np.sum(np.sort(v, kind="stable")))


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted particle cloud; moments use permutation-invariant sums."""

    particles: np.ndarray  # (N, d)
    weights: np.ndarray  # simplex vector

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.min() < 0 or abs(_stable_sum(w) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    @classmethod
    def from_unnormalized(cls, particles, weights) -> "ParticleEnsemble":
        """Normalize and absorb the summation residual into the largest
        weight so the simplex invariant holds to 1e-12 for any N."""
        w = np.asarray(weights, dtype=float) / _stable_sum(np.asarray(weights, dtype=float))
        w[np.argmax(w)] -= _stable_sum(w) - 1.0
        return cls(particles=np.asarray(particles, dtype=float), weights=w)

    @property
    def ess(self) -> float:
        return 1.0 / _stable_sum(self.weights**2)

    def expectation(self, values: np.ndarray) -> float:
        return _stable_sum(self.weights * np.asarray(values, dtype=float))

    def mean(self) -> np.ndarray:
        return np.array([self.expectation(self.particles[:, i]) for i in range(self.particles.shape[1])])

    def second_moment(self) -> np.ndarray:
        d = self.particles.shape[1]
        return np.array(
            [
                [self.expectation(self.particles[:, i] * self.particles[:, j]) for j in range(d)]
                for i in range(d)
            ]
        )


def systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    """Systematic resampling indices from one uniform draw u in [0, 1)."""
    n = len(weights)
    positions = (u + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard rounding
    return np.searchsorted(cumulative, positions, side="right").clip(0, n - 1)


@dataclass(frozen=True)
class ParticleFilterOutput:
    times: np.ndarray
    mean: np.ndarray  # (N+1, d)
    second: np.ndarray  # (N+1, d, d)
    ess: np.ndarray  # (N+1,)
    resample_steps: np.ndarray
    final: ParticleEnsemble

    @property
    def variance(self) -> np.ndarray:
        return self.second - np.einsum("ni,nj->nij", self.mean, self.mean)


def particle_filter_solve(
    spec: SystemSpec,
    paths: PathBundle,
    n_particles: int,
    dt: float | None = None,
    seed: int = 0,
    *,
    init_sampler=None,
    ess_fraction: float = 0.5,
) -> ParticleFilterOutput:
    """Bootstrap particle filter along one observation path.

    Requires disjoint signal/observation noise (theta Theta* = 0); raises
    :class:`CorrelatedNoiseUnsupported` otherwise.  Particles propagate
    with fresh noise, log-weights accumulate the Girsanov increment
    (Psi B) . (Psi dy) - |Psi B|^2 dt / 2 and systematic resampling fires
    when ESS < ``ess_fraction`` * N.  ``init_sampler(rng, n) -> (n, d)``
    draws the prior cloud (defaults to the path's x0 as a point mass).
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    dt = paths.dt if dt is None else float(dt)
    thin = int(round(dt / paths.dt))
    n_steps = paths.n_steps // thin
    d, dy, m = spec.d, spec.dy, spec.m

    # cross-term probe on a small sample
    probe = np.linspace(-1.0, 1.0, 5)
    zp = np.zeros((5, spec.d1))
    zp[:, 0] = probe
    th = eval_batch(spec.theta, 0.0, zp, (d, m))
    Th = eval_batch(spec.Theta, 0.0, zp[:, d:], (dy, m))
    cross = np.einsum("kim,kjm->kij", th, Th)
    if np.abs(cross).max() > 1e-10:
        raise CorrelatedNoiseUnsupported(
            f"theta Theta* has magnitude {np.abs(cross).max():.3e}; the bootstrap "
            "construction needs disjoint noise columns"
        )

    rng = generator(seed, paths.replica, STREAM_PARTICLES)
    rng_rs = generator(seed, paths.replica, STREAM_RESAMPLE)
    if init_sampler is None:
        particles = np.tile(paths.x_path[0], (n_particles, 1))
    else:
        particles = np.asarray(init_sampler(rng, n_particles), dtype=float).reshape(n_particles, d)
    logw = np.zeros(n_particles)

    mean = np.empty((n_steps + 1, d))
    second = np.empty((n_steps + 1, d, d))
    ess_series = np.empty(n_steps + 1)
    resampled = []
    sqdt = math.sqrt(dt)

    def normalized(logw):
        # rescale by the max before exponentiation; error only on collapse
        with np.errstate(invalid="ignore"):
            w = np.exp(logw - logw.max())
        tot = float(np.sum(w))
        if not (np.isfinite(tot) and tot > 0):
            raise WeightDegeneracy("particle weights collapsed to zero/overflow")
        return w / tot

    for k in range(n_steps + 1):
        w = normalized(logw)
        mean[k] = w @ particles
        second[k] = (particles * w[:, None]).T @ particles
        ess_series[k] = 1.0 / float(np.sum(w**2))
        if k == n_steps:
            break

        t = k * dt
        y_k = paths.y_path[k * thin]
        z = np.concatenate([particles, np.broadcast_to(y_k, (n_particles, dy))], axis=1)
        fc_Theta = eval_batch(spec.Theta, t, y_k[None], (dy, m))[0]
        Psi = inv_sqrt(fc_Theta @ fc_Theta.T)

        # weight with the state at t (predictable integrand), then propagate
        Bv = eval_batch(spec.B, t, z, (dy,))
        psi_B = Bv @ Psi.T
        dy_inc = paths.y_path[(k + 1) * thin] - y_k
        with np.errstate(invalid="ignore", over="ignore"):  # collapse handled below
            logw = logw + psi_B @ (Psi @ dy_inc) - 0.5 * np.einsum("ki,ki->k", psi_B, psi_B) * dt

        bv = eval_batch(spec.b, t, z, (d,))
        thv = eval_batch(spec.theta, t, z, (d, m))
        xi = rng.normal(0.0, 1.0, (n_particles, m))
        particles = particles + bv * dt + np.einsum("kim,km->ki", thv, xi) * sqdt

        w = normalized(logw)
        if 1.0 / float(np.sum(w**2)) < ess_fraction * n_particles:
            idx = systematic_resample(w, float(rng_rs.uniform()))
            particles = particles[idx]
            logw = np.zeros(n_particles)
            resampled.append(k + 1)

    return ParticleFilterOutput(
        times=np.arange(n_steps + 1) * dt,
        mean=mean,
        second=second,
        ess=ess_series,
        resample_steps=np.asarray(resampled, dtype=int),
        final=ParticleEnsemble.from_unnormalized(particles, normalized(logw)),
    )
