"""Built-in coefficient families (affine, trigonometric, piecewise-Lipschitz).

These are the families a scenario config can name; arbitrary coefficients
are supplied programmatically through :class:`~zakaibench.model.SystemSpec`
or :class:`~zakaibench.model.DivergenceFormSpec` directly.  All callbacks
are vectorized over the leading point axis.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .model import DivergenceFormSpec, SystemSpec

__all__ = [
    "affine_system",
    "trigonometric_system",
    "kink_divergence_form",
    "gaussian_density",
    "bump_density",
    "make_system",
    "make_prior",
]


def _const_matrix_callback(M):
    M = np.asarray(M, dtype=float)

    def fn(t, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(M, (pts.shape[0], *M.shape)).copy()

    return fn


def affine_system(F, H, theta, Theta, K, delta, time_invariant=True) -> SystemSpec:
    """Linear system b = F x, B = H x with constant diffusion matrices."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    d = F.shape[0]
    dy = H.shape[0]
    m = theta.shape[1]
    if F.shape != (d, d) or H.shape != (dy, d):
        raise ConfigError(f"F/H shapes inconsistent: {F.shape}, {H.shape}", field="system.params")
    if theta.shape != (d, m) or Theta.shape != (dy, m):
        raise ConfigError(
            f"theta/Theta shapes inconsistent: {theta.shape}, {Theta.shape}",
            field="system.params",
        )

    def b(t, z):
        z = np.asarray(z, dtype=float)
        return z[:, :d] @ F.T

    def B(t, z):
        z = np.asarray(z, dtype=float)
        return z[:, :d] @ H.T

    def div_a(t, x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[0], d))

    def div_sigma(t, x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[0], dy))

    return SystemSpec(
        d=d,
        d1=d + dy,
        m=m,
        b=b,
        theta=_const_matrix_callback(theta),
        B=B,
        Theta=_const_matrix_callback(Theta),
        K=K,
        delta=delta,
        div_a=div_a,
        div_sigma=div_sigma,
        time_invariant=time_invariant,
    )


def trigonometric_system(
    lin, amp, freq, H, theta, Theta, K, delta, obs_amp=0.0, obs_freq=1.0
) -> SystemSpec:
    """Nonlinear drift b(x) = lin*x + amp*sin(freq*x), observation
    B(x) = H x + obs_amp*sin(obs_freq*x); constant diffusions.

    Lipschitz with constant |lin| + |amp*freq| per component; suitable for
    the bootstrap-particle-filter benchmark when theta and Theta use
    disjoint noise columns.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
    d = theta.shape[0]
    dy = Theta.shape[0]
    m = theta.shape[1]

    def b(t, z):
        z = np.asarray(z, dtype=float)
        x = z[:, :d]
        return lin * x + amp * np.sin(freq * x)

    def B(t, z):
        z = np.asarray(z, dtype=float)
        lin_obs = z[:, :d] @ H.T
        return lin_obs + obs_amp * np.sin(obs_freq * lin_obs)

    def div_a(t, x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[0], d))

    def div_sigma(t, x, y):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[0], dy))

    return SystemSpec(
        d=d,
        d1=d + dy,
        m=m,
        b=b,
        theta=_const_matrix_callback(theta),
        B=B,
        Theta=_const_matrix_callback(Theta),
        K=K,
        delta=delta,
        div_a=div_a,
        div_sigma=div_sigma,
        time_invariant=True,
    )


def kink_divergence_form(
    base=1.0, slope=0.5, sig=0.3, nu=0.2, K=8.0, delta=0.3, mprime=1
) -> DivergenceFormSpec:
    """1D piecewise-Lipschitz diffusion a(x) = base + slope*|x| with constant
    noise coefficients; the canonical non-smooth test bed for the
    continuous-dependence study."""

    def aij(t, x):
        x = np.asarray(x, dtype=float)
        return (base + slope * np.abs(x[:, 0]))[:, None, None]

    def sigik(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((x.shape[0], 1, mprime))
        out[:, 0, 0] = sig
        return out

    def nuk(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((x.shape[0], mprime))
        out[:, 0] = nu
        return out

    return DivergenceFormSpec(
        d=1,
        mprime=mprime,
        aij=aij,
        aj=None,
        bi=None,
        c=None,
        sigik=sigik,
        nuk=nuk,
        K=K,
        delta=delta,
        time_invariant=True,
    )


# ---------------------------------------------------------------------------
# initial densities


def gaussian_density(x, mean, cov):
    """Multivariate normal density on points x of shape (k, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (d,))
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = np.eye(d) * float(cov)
    diff = x - mean
    sol = np.linalg.solve(cov, diff.T).T
    q = np.einsum("ki,ki->k", diff, sol)
    norm = np.sqrt(((2 * np.pi) ** d) * np.linalg.det(cov))
    return np.exp(-0.5 * q) / norm


def bump_density(x, center=0.0, radius=2.0):
    """Smooth compactly supported bump exp(-1/(1-|r|^2)) inside the ball,
    normalized to unit mass numerically on its support (1D exact quadrature
    happens on the solver grid)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    center = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    r2 = np.sum(((x - center) / radius) ** 2, axis=1)
    out = np.zeros(x.shape[0])
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


# ---------------------------------------------------------------------------
# config-facing constructors


def make_system(family: str, params: dict) -> SystemSpec:
    """Build a SystemSpec from a scenario config entry."""
    try:
        if family in ("affine", "linear_gaussian"):
            return affine_system(
                F=params["F"],
                H=params["H"],
                theta=params["theta"],
                Theta=params["Theta"],
                K=params.get("K", 16.0),
                delta=params.get("delta", 0.3),
            )
        if family == "trigonometric":
            return trigonometric_system(
                lin=params.get("lin", -1.0),
                amp=params.get("amp", 0.8),
                freq=params.get("freq", 2.0),
                H=params["H"],
                theta=params["theta"],
                Theta=params["Theta"],
                K=params.get("K", 16.0),
                delta=params.get("delta", 0.2),
            )
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc}", field=f"system.params.{exc.args[0]}") from exc
    raise ConfigError(f"unknown coefficient family '{family}'", field="system.family")


def make_prior(family: str, params: dict):
    """Initial-density evaluator (points -> values) from a config entry."""
    if family == "gaussian":
        mean = params.get("mean", 0.0)
        cov = params.get("cov", 1.0)
        return lambda x: gaussian_density(x, mean, cov)
    if family == "bump":
        center = params.get("center", 0.0)
        radius = params.get("radius", 2.0)
        return lambda x: bump_density(x, center, radius)
    raise ConfigError(f"unknown prior family '{family}'", field="prior.family")
