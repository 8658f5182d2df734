"""Problem specifications, filtering coefficients, assumption validation.

The partially observed system

    dx = b(t, z) dt + theta(t, z) dw,      z = (x, y)
    dy = B(t, z) dt + Theta(t, y) dw

is described by a :class:`SystemSpec`. From it, per observation point
``(t, y)``, :func:`assemble_filter_coefficients` derives the filtering
coefficients (Psi, a, sigma, beta) and :func:`to_divergence_form` rewrites
the adjoint operators as data for the general divergence-form SPDE handled
by :mod:`zakaibench.spde_solver`.  :func:`validate_assumptions` produces a
numerical report for every assumption checkable on a grid, and
:func:`vmo_osc` / :func:`max_oscillation` compute the mean-oscillation
diagnostics of the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import (
    BadRadius,
    DimensionMismatch,
    EllipticityLost,
    NearSingular,
    NonSymmetric,
)

__all__ = [
    "SystemSpec",
    "FilterCoefficients",
    "DivergenceFormSpec",
    "AssumptionCheck",
    "AssumptionReport",
    "SamplePlan",
    "inv_sqrt",
    "assemble_filter_coefficients",
    "to_divergence_form",
    "validate_assumptions",
    "vmo_osc",
    "max_oscillation",
    "static_path",
]


def eval_batch(fn, t, pts, tail):
    """Evaluate a coefficient callback on a batch of points.

    Callbacks are expected to be vectorized over the leading axis
    (``pts`` has shape ``(k, dim)``, the result ``(k, *tail)``); callbacks
    that only handle single points are detected by shape and evaluated in
    a loop.
    """
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    try:
        out = np.asarray(fn(t, pts), dtype=float)
        if out.shape == (n, *tail):
            return out
        if out.shape == tail and n == 1:
            return out[None]
    except (ValueError, IndexError, TypeError):
        pass
    out = np.empty((n, *tail), dtype=float)
    for i in range(n):
        out[i] = np.reshape(np.asarray(fn(t, pts[i]), dtype=float), tail)
    return out


def _zeros_tail(tail):
    def fn(t, x):
        x = np.asarray(x, dtype=float)
        return np.zeros((x.shape[0], *tail))

    return fn


@dataclass(frozen=True)
class SystemSpec:
    """Coefficients and constants of the partially observed system.

    Parameters
    ----------
    d : int
        Signal dimension.
    d1 : int
        Total dimension of z = (x, y); d1 - d >= 1 observation components.
    m : int
        Number of driving Wiener components (shared by both lines).
    b, theta, B : callable
        ``(t, z)`` with z of shape (k, d1); return shapes (k, d),
        (k, d, m) and (k, d1 - d).
    Theta : callable
        ``(t, y)`` with y of shape (k, d1 - d); returns (k, d1 - d, m).
        Depends on y only, by signature.
    K : float
        Uniform bound / Lipschitz constant for all coefficients.
    delta : float
        Ellipticity constant.
    div_a, div_sigma : callable, optional
        Analytic divergences ``(t, x, y) -> (k, d)`` with j-th entry
        sum_i D_i a^{ij}, resp. ``(k, d1 - d)`` with sum_i D_i sigma^{ik}.
        When absent, centered finite differences are used downstream.
    time_invariant : bool
        Set when every coefficient is independent of (t, y); lets drivers
        assemble the filter operator once and reuse it.
    """

    d: int
    d1: int
    m: int
    b: Callable
    theta: Callable
    B: Callable
    Theta: Callable
    K: float
    delta: float
    div_a: Callable | None = None
    div_sigma: Callable | None = None
    time_invariant: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise DimensionMismatch(f"signal dimension d={self.d} must be >= 1")
        if self.d1 - self.d < 1:
            raise DimensionMismatch(f"need d1 > d, got d={self.d}, d1={self.d1}")
        if self.m < 1:
            raise DimensionMismatch(f"need m >= 1 noise components, got {self.m}")
        if not (self.K > 0 and self.delta > 0):
            raise ValueError("K and delta must be positive")

    @property
    def dy(self) -> int:
        return self.d1 - self.d


@dataclass(frozen=True)
class DivergenceFormSpec:
    """Data of the general divergence-form SPDE.

    du = (D_j(a^{ij} D_i u + a^j u) + b^i D_i u + c u + D_i f^i + f^0) dt
         + (sig^{ik} D_i u + nu^k u + g^k) dZ^k

    All coefficient callbacks take ``(t, x)`` with x of shape (k, d).
    Free terms left as ``None`` mean identically zero.
    """

    d: int
    mprime: int
    aij: Callable  # (k, d, d)
    aj: Callable | None  # (k, d)
    bi: Callable | None  # (k, d)
    c: Callable | None  # (k,)
    sigik: Callable | None  # (k, d, mprime)
    nuk: Callable | None  # (k, mprime)
    K: float
    delta: float
    fi: Callable | None = None  # (k, d)
    f0: Callable | None = None  # (k,)
    gk: Callable | None = None  # (k, mprime)
    time_invariant: bool = False

    def eval_aij(self, t, x):
        return eval_batch(self.aij, t, x, (self.d, self.d))

    def eval_aj(self, t, x):
        fn = self.aj or _zeros_tail((self.d,))
        return eval_batch(fn, t, x, (self.d,))

    def eval_bi(self, t, x):
        fn = self.bi or _zeros_tail((self.d,))
        return eval_batch(fn, t, x, (self.d,))

    def eval_c(self, t, x):
        fn = self.c or _zeros_tail(())
        return eval_batch(fn, t, x, ())

    def eval_sigik(self, t, x):
        fn = self.sigik or _zeros_tail((self.d, self.mprime))
        return eval_batch(fn, t, x, (self.d, self.mprime))

    def eval_nuk(self, t, x):
        fn = self.nuk or _zeros_tail((self.mprime,))
        return eval_batch(fn, t, x, (self.mprime,))

    def eval_fi(self, t, x):
        fn = self.fi or _zeros_tail((self.d,))
        return eval_batch(fn, t, x, (self.d,))

    def eval_f0(self, t, x):
        fn = self.f0 or _zeros_tail(())
        return eval_batch(fn, t, x, ())

    def eval_gk(self, t, x):
        fn = self.gk or _zeros_tail((self.mprime,))
        return eval_batch(fn, t, x, (self.mprime,))


@dataclass(frozen=True)
class FilterCoefficients:
    """Filtering coefficients frozen at one observation point (t, y).

    ``a = theta theta*/2``, ``sigma = theta Theta* Psi``, ``beta = Psi B``
    with ``Psi = (Theta Theta*)^{-1/2}``; all evaluators take x of shape
    (k, d) and return batched arrays.
    """

    t: float
    y: np.ndarray
    d: int
    dy: int
    Psi: np.ndarray
    a: Callable
    bdrift: Callable
    sigma: Callable
    beta: Callable
    delta: float
    K: float
    div_a: Callable | None = None
    div_sigma: Callable | None = None


def inv_sqrt(M, eps_min=1e-12, asym_tol=1e-8):
    """Inverse square root of a symmetric positive-definite matrix.

    Returns S with ``S @ M @ S = I`` (to 1e-10 relative Frobenius error),
    S symmetric positive definite.

    Raises
    ------
    NonSymmetric
        Relative asymmetry of M above ``asym_tol``.
    NearSingular
        Smallest eigenvalue at or below ``eps_min``; for observation
        covariances this signals a degenerate Theta Theta*.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.linalg.norm(M)))
    asym = float(np.linalg.norm(M - M.T)) / scale
    if asym > asym_tol:
        raise NonSymmetric(f"relative asymmetry {asym:.3e} exceeds {asym_tol:.1e}")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w.min() <= eps_min:
        raise NearSingular(
            f"smallest eigenvalue {w.min():.3e} <= {eps_min:.1e}; "
            "observation noise covariance is (near) singular"
        )
    S = (V * w**-0.5) @ V.T
    return 0.5 * (S + S.T)


def assemble_filter_coefficients(spec: SystemSpec, t: float, y) -> FilterCoefficients:
    """Build the filtering coefficients at one observation point.

    The returned evaluators close over ``(t, y)``; ``NearSingular``
    propagates from the Psi computation when Theta Theta* degenerates.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (spec.dy,):
        raise DimensionMismatch(f"y must have shape ({spec.dy},), got {y.shape}")
    Theta_t = eval_batch(spec.Theta, t, y[None], (spec.dy, spec.m))[0]
    Psi = inv_sqrt(Theta_t @ Theta_t.T)

    def _z(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, np.broadcast_to(y, (x.shape[0], spec.dy))], axis=1)

    def a_fn(x):
        th = eval_batch(spec.theta, t, _z(x), (spec.d, spec.m))
        return 0.5 * np.einsum("kim,kjm->kij", th, th)

    def sigma_fn(x):
        th = eval_batch(spec.theta, t, _z(x), (spec.d, spec.m))
        return np.einsum("kim,rm,rs->kis", th, Theta_t, Psi)

    def beta_fn(x):
        Bv = eval_batch(spec.B, t, _z(x), (spec.dy,))
        return Bv @ Psi.T

    def bdrift_fn(x):
        return eval_batch(spec.b, t, _z(x), (spec.d,))

    div_a = None
    if spec.div_a is not None:
        div_a = lambda x: eval_batch(  # noqa: E731
            lambda tt, xx: spec.div_a(tt, xx, y), t, x, (spec.d,)
        )
    div_sigma = None
    if spec.div_sigma is not None:
        div_sigma = lambda x: eval_batch(  # noqa: E731
            lambda tt, xx: spec.div_sigma(tt, xx, y), t, x, (spec.dy,)
        )

    return FilterCoefficients(
        t=t,
        y=y,
        d=spec.d,
        dy=spec.dy,
        Psi=Psi,
        a=a_fn,
        bdrift=bdrift_fn,
        sigma=sigma_fn,
        beta=beta_fn,
        delta=spec.delta,
        K=spec.K,
        div_a=div_a,
        div_sigma=div_sigma,
    )


def _fd_divergence(fn, x, h, tail):
    """sum_i D_i fn(x)[i, ...] by centered differences, batched over x."""
    x = np.asarray(x, dtype=float)
    k, d = x.shape
    out = np.zeros((k, *tail[1:]))
    for i in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[:, i] += h
        xm[:, i] -= h
        out += (fn(xp)[:, i] - fn(xm)[:, i]) / (2.0 * h)
    return out


def to_divergence_form(
    fc: FilterCoefficients,
    spec: SystemSpec | None = None,
    *,
    h_deriv: float = 1e-3,
    check_points=None,
    margin_tol: float = 1e-9,
) -> DivergenceFormSpec:
    """Rewrite the adjoint filtering operators as divergence-form SPDE data.

    Output realizes L* and the adjoint noise channels:
    a^{ij} unchanged, a^j = sum_i D_i a^{ij} - b^j, b^i = 0, c = 0,
    sig^{ik} = -sigma^{ik}, nu^k = beta^k - sum_i D_i sigma^{ik}, zero
    free terms.  Divergences come from the spec's analytic callbacks when
    present, else centered differences with spacing ``h_deriv``.

    When ``check_points`` is given, verifies the halved ellipticity margin
    xi . (a - alpha~) xi >= delta/2 |xi|^2 there and raises
    :class:`EllipticityLost` on failure.
    """
    d, dy = fc.d, fc.dy

    if fc.div_a is not None:
        div_a = fc.div_a
    else:
        div_a = lambda x: _fd_divergence(fc.a, x, h_deriv, (d, d))  # noqa: E731
    if fc.div_sigma is not None:
        div_sigma = fc.div_sigma
    else:
        div_sigma = lambda x: _fd_divergence(fc.sigma, x, h_deriv, (d, dy))  # noqa: E731

    def aij(t, x):
        return fc.a(np.asarray(x, dtype=float))

    def aj(t, x):
        x = np.asarray(x, dtype=float)
        return div_a(x) - fc.bdrift(x)

    def sigik(t, x):
        return -fc.sigma(np.asarray(x, dtype=float))

    def nuk(t, x):
        x = np.asarray(x, dtype=float)
        return fc.beta(x) - div_sigma(x)

    out = DivergenceFormSpec(
        d=d,
        mprime=dy,
        aij=aij,
        aj=aj,
        bi=None,
        c=None,
        sigik=sigik,
        nuk=nuk,
        K=fc.K,
        delta=fc.delta,
        time_invariant=spec.time_invariant if spec is not None else False,
    )

    if check_points is not None:
        pts = np.asarray(check_points, dtype=float).reshape(-1, d)
        av = fc.a(pts)
        sv = fc.sigma(pts)
        alpha = 0.5 * np.einsum("kim,kjm->kij", sv, sv)
        sym = 0.5 * (av + np.transpose(av, (0, 2, 1))) - alpha
        lam = np.linalg.eigvalsh(sym)[:, 0]
        worst = int(np.argmin(lam))
        if lam[worst] < 0.5 * fc.delta - margin_tol:
            raise EllipticityLost(
                f"xi.(a - alpha~)xi >= delta/2 fails: min eigenvalue "
                f"{lam[worst]:.6e} < {0.5 * fc.delta:.6e} at x={pts[worst]}"
            )
    return out


# ---------------------------------------------------------------------------
# assumption validation


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic grid plus seeded quasi-random sample points."""

    half_width: float = 4.0
    grid_per_axis: int = 5
    n_random: int = 10_000
    seed: int = 0
    times: tuple = (0.0, 0.5, 1.0)
    eps_pair: float = 0.1  # |x - y| scale for the two-scale ellipticity check
    n_pairs: int = 256  # Lipschitz-quotient sample pairs

    def points(self, dim: int) -> np.ndarray:
        axes = [np.linspace(-self.half_width, self.half_width, self.grid_per_axis)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([g.ravel() for g in mesh], axis=1)
        n_rand = max(0, int(self.n_random))
        if n_rand:
            sob = qmc.Sobol(dim, scramble=True, seed=self.seed)
            u = sob.random(n_rand)
            rand = (2.0 * u - 1.0) * self.half_width
            return np.concatenate([grid, rand], axis=0)
        return grid


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    worst_location: tuple | None = None
    advisory: bool = False
    note: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    """Per-assumption numerical margins; violations reported, never raised."""

    checks: dict = field(default_factory=dict)
    oscillations: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values() if not c.advisory)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "note": self.note,
            "checks": {
                k: {
                    "passed": c.passed,
                    "margin": c.margin,
                    "worst_location": None
                    if c.worst_location is None
                    else [list(np.atleast_1d(v)) if isinstance(v, np.ndarray) else v for v in c.worst_location],
                    "advisory": c.advisory,
                    "note": c.note,
                }
                for k, c in self.checks.items()
            },
            "oscillations": self.oscillations,
        }


def _worst(values, t, pts):
    """Index of the smallest margin with its (t, x) location."""
    i = int(np.argmin(values))
    return float(values[i]), (float(t), np.asarray(pts[i]))


def _system_checks(spec: SystemSpec, plan: SamplePlan, checks: dict):
    zpts = plan.points(spec.d1)
    worst = {}

    def track(name, margins, t, pts):
        m, loc = _worst(margins, t, pts)
        if name not in worst or m < worst[name][0]:
            worst[name] = (m, loc)

    for t in plan.times:
        th = eval_batch(spec.theta, t, zpts, (spec.d, spec.m))
        bv = eval_batch(spec.b, t, zpts, (spec.d,))
        Bv = eval_batch(spec.B, t, zpts, (spec.dy,))
        ypts = zpts[:, spec.d :]
        Th = eval_batch(spec.Theta, t, ypts, (spec.dy, spec.m))

        bound = spec.K - np.maximum.reduce(
            [
                np.linalg.norm(bv, axis=1),
                np.linalg.norm(Bv, axis=1),
                np.linalg.norm(th, axis=(1, 2)),
                np.linalg.norm(Th, axis=(1, 2)),
            ]
        )
        track("bounded_by_K", bound, t, zpts)

        tt = np.einsum("kim,kjm->kij", th, th)
        TT = np.einsum("kim,kjm->kij", Th, Th)
        atilde = np.zeros((zpts.shape[0], spec.d1, spec.d1))
        atilde[:, : spec.d, : spec.d] = tt
        atilde[:, spec.d :, spec.d :] = TT
        lam = np.linalg.eigvalsh(0.5 * atilde)[:, 0]
        track("uniform_nondegeneracy", lam - spec.delta, t, zpts)

        # Theta Theta* invertibility (Psi bounded)
        lamT = np.linalg.eigvalsh(TT)[:, 0]
        track("observation_noise_invertible", lamT, t, zpts)

        # projector inequality theta (I - Theta* Psi^2 Theta) theta* >= delta
        ok = lamT > 1e-12
        if np.any(ok):
            TTi = np.linalg.inv(TT[ok])
            proj = np.eye(spec.m)[None] - np.einsum("krm,krs,ksn->kmn", Th[ok], TTi, Th[ok])
            mat = np.einsum("kim,kmn,kjn->kij", th[ok], proj, th[ok])
            lamP = np.linalg.eigvalsh(0.5 * (mat + np.transpose(mat, (0, 2, 1))))[:, 0]
            track("projector_ellipticity", lamP - spec.delta, t, zpts[ok])

    # empirical Lipschitz quotients (refuting check only)
    rng = np.random.default_rng(plan.seed + 1)
    base = zpts[rng.integers(0, zpts.shape[0], plan.n_pairs)]
    radii = np.exp(rng.uniform(np.log(1e-3), np.log(1.0), plan.n_pairs))
    dirs = rng.normal(size=(plan.n_pairs, spec.d1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    other = base + radii[:, None] * dirs
    t0 = plan.times[0]
    quot = []
    for f, tail in ((spec.b, (spec.d,)), (spec.B, (spec.dy,)), (spec.theta, (spec.d, spec.m))):
        fa = eval_batch(f, t0, base, tail).reshape(plan.n_pairs, -1)
        fb = eval_batch(f, t0, other, tail).reshape(plan.n_pairs, -1)
        quot.append(np.linalg.norm(fa - fb, axis=1) / radii)
    quot = np.maximum.reduce(quot)
    m, loc = _worst(spec.K - quot, t0, base)
    checks["lipschitz_quotients"] = AssumptionCheck(
        "lipschitz_quotients",
        passed=m >= 0,
        margin=m,
        worst_location=loc,
        advisory=True,
        note="sampled difference quotients; can refute, never certify",
    )

    for name, (m, loc) in worst.items():
        checks[name] = AssumptionCheck(name, passed=m >= -1e-12, margin=m, worst_location=loc)


def _divform_checks(spec: DivergenceFormSpec, plan: SamplePlan, checks: dict):
    pts = plan.points(spec.d)
    worst = {}

    def track(name, margins, t, p):
        m, loc = _worst(margins, t, p)
        if name not in worst or m < worst[name][0]:
            worst[name] = (m, loc)

    for t in plan.times:
        a = spec.eval_aij(t, pts)
        sig = spec.eval_sigik(t, pts)
        aj = spec.eval_aj(t, pts)
        bi = spec.eval_bi(t, pts)
        cv = spec.eval_c(t, pts)
        nu = spec.eval_nuk(t, pts)

        track("c_nonpositive", -cv, t, pts)
        bound = spec.K - (
            np.abs(aj).max(axis=1) + np.abs(bi).max(axis=1) + np.abs(cv) + np.linalg.norm(nu, axis=1)
        )
        track("lower_order_bounded_by_K", bound, t, pts)

        sym = 0.5 * (a + np.transpose(a, (0, 2, 1)))
        lam_hi = np.linalg.eigvalsh(sym)[:, -1]
        track("upper_ellipticity", 1.0 / spec.delta - lam_hi, t, pts)

        alpha = 0.5 * np.einsum("kim,kjm->kij", sig, sig)
        lam_lo = np.linalg.eigvalsh(sym - alpha)[:, 0]
        track("lower_ellipticity", lam_lo - spec.delta, t, pts)

        # two-scale variant: (a(x) - alpha(y)) against delta for |x-y| <= eps
        rng = np.random.default_rng(plan.seed + 7)
        shift = rng.normal(size=pts.shape)
        shift *= plan.eps_pair * rng.uniform(0, 1, (pts.shape[0], 1)) / np.linalg.norm(
            shift, axis=1, keepdims=True
        )
        sig_y = spec.eval_sigik(t, pts + shift)
        alpha_y = 0.5 * np.einsum("kim,kjm->kij", sig_y, sig_y)
        lam_pair = np.linalg.eigvalsh(sym - alpha_y)[:, 0]
        track("two_scale_ellipticity", lam_pair - spec.delta, t, pts)

    for name, (m, loc) in worst.items():
        checks[name] = AssumptionCheck(name, passed=m >= -1e-12, margin=m, worst_location=loc)


def validate_assumptions(
    spec: SystemSpec | DivergenceFormSpec,
    plan: SamplePlan | None = None,
    *,
    osc_radius: float = 0.5,
    beta0: float = math.inf,
    beta1: float = math.inf,
) -> AssumptionReport:
    """Numerically check every grid-checkable assumption of ``spec``.

    Violations are reported with their margins and worst locations, never
    raised; a solver may still be run on a failing spec.  Oscillation
    values are compared against ``beta0`` / ``beta1`` which default to
    infinity because the thresholds come from constants external to the
    source material (report-only).
    """
    plan = plan or SamplePlan()
    checks: dict = {}
    oscillations: dict = {}

    if isinstance(spec, SystemSpec):
        _system_checks(spec, plan, checks)
        y0 = np.zeros(spec.dy)
        fc = None
        try:
            fc = assemble_filter_coefficients(spec, plan.times[0], y0)
        except NearSingular:
            pass
        if fc is not None:
            path = static_path(np.zeros(spec.d))
            win = (plan.times[0], plan.times[-1])
            for i in range(spec.d):
                for j in range(spec.d):
                    h = lambda t, x, i=i, j=j: fc.a(np.asarray(x, float))[:, i, j]  # noqa: E731
                    oscillations[f"a[{i}][{j}]"] = vmo_osc(h, osc_radius, path, win)
            for i in range(spec.d):
                h = lambda t, x, i=i: np.linalg.norm(  # noqa: E731
                    fc.sigma(np.asarray(x, float))[:, i, :], axis=1
                )
                oscillations[f"sigma[{i}]"] = vmo_osc(h, osc_radius, path, win)
    else:
        _divform_checks(spec, plan, checks)
        path = static_path(np.zeros(spec.d))
        win = (plan.times[0], plan.times[-1])
        for i in range(spec.d):
            for j in range(spec.d):
                h = lambda t, x, i=i, j=j: spec.eval_aij(t, x)[:, i, j]  # noqa: E731
                oscillations[f"a[{i}][{j}]"] = vmo_osc(h, osc_radius, path, win)

    if math.isfinite(beta0):
        worst_osc = max((v for k, v in oscillations.items() if k.startswith("a[")), default=0.0)
        checks["vmo_osc_below_beta0"] = AssumptionCheck(
            "vmo_osc_below_beta0", passed=worst_osc <= beta0, margin=beta0 - worst_osc
        )
    if math.isfinite(beta1):
        worst_osc = max((v for k, v in oscillations.items() if k.startswith("sigma")), default=0.0)
        checks["sigma_osc_below_beta1"] = AssumptionCheck(
            "sigma_osc_below_beta1", passed=worst_osc <= beta1, margin=beta1 - worst_osc
        )

    return AssumptionReport(
        checks=checks,
        oscillations=oscillations,
        note="validated on all of R^d (sampled box); the source's R^d_+ is read as R^d",
    )


# ---------------------------------------------------------------------------
# mean-oscillation diagnostics


def static_path(point) -> Callable:
    """Path that sits at a fixed point for all times."""
    point = np.atleast_1d(np.asarray(point, dtype=float))

    def path(t):
        return point

    return path


def _ball_offsets(rho: float, dim: int, resolution: int) -> np.ndarray:
    """Cell-centered cube sub-grid restricted to the open ball of radius rho."""
    edges = np.linspace(-rho, rho, resolution + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mesh = np.meshgrid(*([centers] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    if dim == 1:
        return pts
    return pts[np.linalg.norm(pts, axis=1) < rho]


def vmo_osc(
    h,
    rho: float,
    path,
    window,
    *,
    ball_resolution: int = 16,
    time_resolution: int = 8,
    starts: int = 1,
) -> float:
    """Discretized mean oscillation of a coefficient along a path.

    For each candidate start s the time average over [s, s + rho^2] of the
    ball-mean absolute deviation of ``h`` from its average over the ball
    of radius rho centered at the path is computed by midpoint quadrature
    (``time_resolution`` time nodes, ``ball_resolution`` cells per axis);
    the maximum over starts is returned.  Values are centered on the first
    ball sample before averaging so x-independent coefficients return
    exactly 0.0.

    ``h`` is a scalar coefficient callback ``(t, x)`` with x of shape
    (k, d); ``path`` maps t to a point; ``window = (t0, t1)`` is the range
    of candidate starts (t0 == t1 gives the single window [t0, t0+rho^2]).
    """
    if rho <= 0:
        raise BadRadius(f"radius must be positive, got {rho}")
    t0, t1 = float(window[0]), float(window[1])
    if t1 < t0:
        raise ValueError(f"window end {t1} before start {t0}")
    p0 = np.atleast_1d(np.asarray(path(t0), dtype=float))
    dim = p0.shape[0]
    offsets = _ball_offsets(rho, dim, ball_resolution)

    s_candidates = np.linspace(t0, t1, starts) if starts > 1 else np.array([t0])
    best = 0.0
    for s in s_candidates:
        rs = s + rho**2 * (np.arange(time_resolution) + 0.5) / time_resolution
        acc = 0.0
        for r in rs:
            center = np.atleast_1d(np.asarray(path(r), dtype=float))
            vals = eval_batch(h, r, center[None, :] + offsets, ())
            vals = vals - vals[0]
            acc += float(np.mean(np.abs(vals - np.mean(vals))))
        best = max(best, acc / time_resolution)
    return best


def max_oscillation(
    h,
    rho: float,
    y,
    window,
    *,
    n_shifts: int = 5,
    n_radii: int = 4,
    **quad,
) -> float:
    """Maximized oscillation over shifted paths and radii r <= rho.

    Discretizes the sup over paths by constant shifts on a lattice of
    sup-norm <= rho around ``y`` and over a uniform set of radii; a lower
    bound of the continuum functional, tightening as the lattices refine.
    """
    if rho <= 0:
        raise BadRadius(f"radius must be positive, got {rho}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    axes = [np.linspace(-rho, rho, n_shifts)] * y.shape[0]
    mesh = np.meshgrid(*axes, indexing="ij")
    shifts = np.stack([g.ravel() for g in mesh], axis=1)
    radii = rho * (1 + np.arange(n_radii)) / n_radii
    best = 0.0
    for shift in shifts:
        path = static_path(y + shift)
        for r in radii:
            best = max(best, vmo_osc(h, float(r), path, window, **quad))
    return best
