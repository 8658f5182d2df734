"""Filtering pipeline: unnormalized density evolution and conditional statistics.

Per step the filter coefficients are assembled at the current observation
point, rewritten in divergence form and advanced by one IMEX step of
:mod:`zakaibench.spde_solver`, driven by the transformed observation
increments dZ = Psi dy.  Under the physical measure those increments carry
the observation drift automatically, so one simulated
:class:`~zakaibench.sde_sim.PathBundle` serves the filter and all oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, MassCollapse, MisalignedGrids
from .model import SystemSpec, assemble_filter_coefficients, eval_batch, to_divergence_form
from .sde_sim import PathBundle
from .spde_solver import FieldState, Grid, assemble_operator, step

__all__ = [
    "FilterOutput",
    "InnovationSeries",
    "run_zakai",
    "conditional_expectation",
    "innovation_process",
]


@dataclass(frozen=True)
class InnovationSeries:
    """Innovation increments and their running quadratic variation."""

    times: np.ndarray  # (N+1,)
    increments: np.ndarray  # (N, dy)
    qv: np.ndarray  # (N+1, dy) running per-component quadratic variation
    cross_qv: np.ndarray  # (N+1, dy, dy)


@dataclass(frozen=True)
class FilterOutput:
    """Unnormalized filter run: densities, mass, moments, innovation.

    Mass, conditional moments, the conditional observation drift and the
    undershoot are recorded at every step; density snapshots at the
    configured stride (always including the initial and final states).
    """

    grid: Grid
    dt: float
    times: np.ndarray  # (N+1,)
    mass: np.ndarray  # (N+1,)
    mean: np.ndarray  # (N+1, d) conditional mean
    second: np.ndarray  # (N+1, d, d) conditional second moment
    cond_B: np.ndarray  # (N+1, dy) filtered observation drift E[B | F^y]
    negativity: np.ndarray  # (N+1,) undershoot max(0, -min pibar)
    boundary_mass: np.ndarray  # (N+1,) |pibar| mass on the outer ring
    snapshot_indices: np.ndarray
    snapshots: np.ndarray  # (n_snap, grid.size) unnormalized densities
    innovation: InnovationSeries | None
    metadata: dict = field(default_factory=dict)

    @property
    def variance(self) -> np.ndarray:
        return self.second - np.einsum("ni,nj->nij", self.mean, self.mean)

    def snapshot_times(self) -> np.ndarray:
        return self.snapshot_indices * self.dt

    def pibar(self, i: int) -> FieldState:
        """i-th recorded unnormalized density."""
        return FieldState(values=self.snapshots[i], t=float(self.snapshot_indices[i] * self.dt))

    def pi(self, i: int) -> np.ndarray:
        """i-th recorded normalized density."""
        return self.snapshots[i] / self.mass[self.snapshot_indices[i]]


def _moments(u: np.ndarray, nodes: np.ndarray, w: float, mass: float):
    m1 = w * (nodes.T @ u) / mass
    xu = nodes * u[:, None]
    m2 = w * (xu.T @ nodes) / mass
    return m1, m2


def run_zakai(
    spec: SystemSpec,
    paths: PathBundle,
    pi0,
    grid: Grid,
    dt: float | None = None,
    *,
    record_every: int | None = 1,
    mass_floor: float = 1e-14,
    clip: bool = False,
    ellipticity_check: bool = True,
    enforce_unit_mass: bool = True,
    step_kwargs: dict | None = None,
) -> FilterOutput:
    """Run the unnormalized filter along one observation path.

    ``dt`` defaults to the path step; an integer multiple thins the path
    (finer simulation than filtering).  ``pi0`` is a FieldState, a flat
    array, or a density callback on points; it must be nonnegative with
    unit mass to 1e-8 (``enforce_unit_mass=False`` lifts the mass
    precondition, e.g. for linearity probes).  Aborts with
    :class:`MassCollapse` when the total mass falls to ``mass_floor``.
    ``clip`` switches on the clip-negatives mode (always labeled in the
    metadata; moments are then computed from the clipped density).
    """
    if grid.d != spec.d:
        raise DimensionMismatch(f"grid dimension {grid.d} != signal dimension {spec.d}")
    dt = paths.dt if dt is None else float(dt)
    thin = dt / paths.dt
    if abs(thin - round(thin)) > 1e-9 or round(thin) < 1:
        raise MisalignedGrids(
            f"filter step dt={dt} must be an integer multiple of the path step {paths.dt}"
        )
    thin = int(round(thin))
    n_steps = paths.n_steps // thin
    nodes = grid.nodes()
    w = grid.cell_volume

    if callable(pi0):
        u0 = eval_batch(lambda t, x: pi0(x), 0.0, nodes, ())
        state = FieldState.create(grid, u0, 0.0)
    elif isinstance(pi0, FieldState):
        state = pi0
    else:
        state = FieldState.create(grid, np.asarray(pi0, dtype=float), 0.0)
    if float(state.values.min()) < 0:
        raise ValueError("pi0 must be nonnegative")
    mass0 = w * float(np.sum(state.values))
    if enforce_unit_mass and abs(mass0 - 1.0) > 1e-8:
        raise ValueError(f"pi0 must have unit mass on the grid, got {mass0:.3e}")

    d, dy = spec.d, spec.dy
    mass = np.empty(n_steps + 1)
    mean = np.empty((n_steps + 1, d))
    second = np.empty((n_steps + 1, d, d))
    cond_B = np.empty((n_steps + 1, dy))
    negativity = np.empty(n_steps + 1)
    boundary_mass = np.empty(n_steps + 1)
    ring = grid.ring_mask(2)
    snap_idx = [0]
    snaps = [state.values.copy()]

    check_pts = nodes[:: max(1, grid.size // 64)] if ellipticity_check else None
    cached = None
    stencil_now = None
    psi_series = np.empty((n_steps, dy, dy))

    def build(t_n, y_n, check):
        fc = assemble_filter_coefficients(spec, t_n, y_n)
        div = to_divergence_form(fc, spec, check_points=check, h_deriv=grid.h / 4.0)
        return fc, assemble_operator(div, grid, t_n)

    kw = step_kwargs or {}
    for n in range(n_steps + 1):
        u = state.values
        mass[n] = w * float(np.sum(u))
        if not mass[n] > mass_floor:
            raise MassCollapse(
                f"mass {mass[n]:.3e} at t={n * dt:.6g} fell to the floor {mass_floor:.1e}; "
                f"undershoot={max(0.0, -float(u.min())):.3e}, max={float(u.max()):.3e}"
            )
        mean[n], second[n] = _moments(u, nodes, w, mass[n])
        negativity[n] = max(0.0, -float(u.min()))
        boundary_mass[n] = w * float(np.sum(np.abs(u[ring])))

        t_n = n * dt
        y_n = paths.y_path[n * thin]
        zb = np.concatenate([nodes, np.broadcast_to(y_n, (grid.size, dy))], axis=1)
        Bv = eval_batch(spec.B, t_n, zb, (dy,))
        cond_B[n] = w * (Bv.T @ u) / mass[n]
        if n == n_steps:
            break
        if spec.time_invariant:
            if cached is None:
                cached = build(t_n, y_n, check_pts)
            fc, st_next = cached
            st_now = st_next
        else:
            if stencil_now is None:
                fc, st_now = build(t_n, y_n, check_pts if n == 0 else None)
            else:
                fc, st_now = stencil_now
            stencil_now = build((n + 1) * dt, paths.y_path[(n + 1) * thin], None)
            st_next = stencil_now[1]
        psi_series[n] = fc.Psi

        dy_inc = paths.y_path[(n + 1) * thin] - paths.y_path[n * thin]
        dZ = fc.Psi @ dy_inc
        state = step(state, st_now, st_next, dZ, dt, None, **kw)
        if clip:
            state = FieldState(values=np.maximum(state.values, 0.0), t=state.t)
        if (record_every and (n + 1) % record_every == 0) or n == n_steps - 1:
            snap_idx.append(n + 1)
            snaps.append(state.values.copy())

    times = np.arange(n_steps + 1) * dt

    dy_all = paths.y_path[:: thin][: n_steps + 1]
    increments = np.einsum("nkr,nr->nk", psi_series, np.diff(dy_all, axis=0))
    increments -= np.einsum("nkr,nr->nk", psi_series, cond_B[:n_steps]) * dt
    innovation = _innovation_series(times, increments)

    return FilterOutput(
        grid=grid,
        dt=dt,
        times=times,
        mass=mass,
        mean=mean,
        second=second,
        cond_B=cond_B,
        negativity=negativity,
        boundary_mass=boundary_mass,
        snapshot_indices=np.asarray(snap_idx, dtype=int),
        snapshots=np.asarray(snaps),
        innovation=innovation,
        metadata={
            "scheme": "imex-euler/finite-volume",
            "clip": clip,
            "mass_floor": mass_floor,
            "seed": paths.seed,
            "replica": paths.replica,
            "thin": thin,
        },
    )


def _innovation_series(times: np.ndarray, increments: np.ndarray) -> InnovationSeries:
    n, dy = increments.shape
    qv = np.zeros((n + 1, dy))
    qv[1:] = np.cumsum(increments**2, axis=0)
    cross = np.zeros((n + 1, dy, dy))
    cross[1:] = np.cumsum(np.einsum("nk,nl->nkl", increments, increments), axis=0)
    return InnovationSeries(times=times, increments=increments, qv=qv, cross_qv=cross)


def conditional_expectation(out: FilterOutput, f, t: float) -> float:
    """(pibar_t, f) / (pibar_t, 1) by trapezoidal quadrature on the grid.

    ``t`` must be a recorded snapshot time; ``f`` is a callback on points
    (k, d) -> (k,) or a nodal array.
    """
    snap_times = out.snapshot_times()
    i = int(np.argmin(np.abs(snap_times - t)))
    if abs(snap_times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise MisalignedGrids(f"t={t} is not a recorded snapshot time")
    u = out.snapshots[i]
    nodes = out.grid.nodes()
    fv = eval_batch(lambda s, x: f(x), t, nodes, ()) if callable(f) else np.asarray(f, dtype=float)
    w = out.grid.cell_volume
    mass = w * float(np.sum(u))
    if not mass > 0:
        raise MassCollapse(f"mass {mass:.3e} not positive at t={t}")
    return w * float(np.sum(fv * u)) / mass


def innovation_process(out: FilterOutput, paths: PathBundle, spec: SystemSpec) -> InnovationSeries:
    """Innovation increments Psi_t (dy_t - E[B | F^y] dt) with running QV.

    Rebuilt from the stored filtered drift series, so it works for runs
    that kept no density snapshots.
    """
    n = len(out.times) - 1
    thin = out.metadata.get("thin", 1)
    if n * thin != paths.n_steps:
        raise MisalignedGrids("paths and filter output cover different step counts")
    increments = np.empty((n, spec.dy))
    for k in range(n):
        y_k = paths.y_path[k * thin]
        fc_psi = assemble_filter_coefficients(spec, k * out.dt, y_k).Psi
        dy_inc = paths.y_path[(k + 1) * thin] - y_k
        increments[k] = fc_psi @ (dy_inc - out.cond_B[k] * out.dt)
    return _innovation_series(out.times, increments)
