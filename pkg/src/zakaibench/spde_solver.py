"""Finite-volume discretization and IMEX stepping of the divergence-form SPDE.

The operator is assembled in flux form on a truncated uniform grid
[-L, L]^d with a Dirichlet-zero boundary convention: for every face
between neighboring nodes the flux

    F^j = sum_i a^{ij}(face) (D_i u)(face) + a^j(face) u(face)

uses midpoint coefficient evaluation, a two-point difference for the
normal derivative, averaged centered differences for the transverse ones
and the arithmetic node mean for u(face); then

    (L u)_node = sum_j (F^j_+ - F^j_-)/h + b^i (D_i u)_centered + c u.

Noise channels act nodally, (Lam^k u) = sig^{ik} (D_i u)_centered + nu^k u.
Time stepping is IMEX Euler, implicit in L and explicit in the stochastic
increment, with driving increments supplied from outside so that one noise
path can feed the solver, the filter and the oracles alike.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab

from .errors import (
    AssemblyOverflow,
    Instability,
    MisalignedGrids,
    NonFinite,
    SolverDiverged,
    SupportViolation,
)
from .model import DivergenceFormSpec, eval_batch

__all__ = [
    "Grid",
    "FieldState",
    "OperatorStencil",
    "ForcingSnapshot",
    "Trajectory",
    "assemble_operator",
    "evaluate_forcing",
    "step",
    "solve",
    "weak_residual",
    "WeakResidualReport",
    "export_field_csv",
    "export_field_binary",
    "load_field_binary",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the box [-L, L]^d with n points per axis."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need n >= 3 points per axis, got {self.n}")
        if self.L <= 0:
            raise ValueError(f"need positive half-width, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    def nodes(self) -> np.ndarray:
        """(size, d) node coordinates in C order.  Treat as read-only."""
        return _grid_nodes(self.d, self.L, self.n)

    def interior_mask(self) -> np.ndarray:
        return _interior_mask(self.d, self.n, 1)

    def ring_mask(self, width: int) -> np.ndarray:
        """Nodes within ``width`` layers of the boundary."""
        return ~_interior_mask(self.d, self.n, width)

    def stride(self, axis: int) -> int:
        return self.n ** (self.d - 1 - axis)


@functools.lru_cache(maxsize=32)
def _grid_nodes(d: int, L: float, n: int) -> np.ndarray:
    ax = np.linspace(-L, L, n)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    out = np.stack([g.ravel() for g in mesh], axis=1)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=32)
def _interior_mask(d: int, n: int, width: int) -> np.ndarray:
    ax = (np.arange(n) >= width) & (np.arange(n) <= n - 1 - width)
    mask = ax.copy()
    for _ in range(d - 1):
        mask = np.logical_and.outer(mask, ax)
    out = mask.ravel()
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=64)
def _face_index_pairs(d: int, n: int, axis: int):
    """Flat node indices (p, q) across every face along ``axis``."""
    idx = np.arange(n**d).reshape((n,) * d)
    sl = [slice(None)] * d
    sl[axis] = slice(0, n - 1)
    p = idx[tuple(sl)].ravel()
    q = p + n ** (d - 1 - axis)
    p.setflags(write=False)
    q.setflags(write=False)
    return p, q


@dataclass(frozen=True)
class FieldState:
    """Grid function at one time with the Dirichlet-zero convention."""

    values: np.ndarray  # flat, length grid.size
    t: float
    boundary: str = "dirichlet0"

    @classmethod
    def create(cls, grid: Grid, values, t: float = 0.0) -> "FieldState":
        v = np.asarray(values, dtype=float).reshape(grid.size).copy()
        if not np.all(np.isfinite(v)):
            raise NonFinite("field state contains NaN/Inf")
        v[grid.ring_mask(1)] = 0.0
        return cls(values=v, t=t)

    def reshaped(self, grid: Grid) -> np.ndarray:
        return self.values.reshape(grid.shape)


@dataclass(frozen=True)
class OperatorStencil:
    """Discrete L and per-channel noise actions at one time."""

    grid: Grid
    t: float
    L: sp.csr_matrix
    noise: tuple  # csr per channel
    noise_row_sq: np.ndarray  # sum_k ||row_k||_2^2 per node, stability guard
    conservative: sp.csr_matrix | None = None  # pure a^{ij} flux part, on request
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def system_matrix(self, dt: float) -> sp.csr_matrix:
        """I - dt L, cached per dt; boundary rows reduce to the identity."""
        key = float(dt)
        A = self._cache.get(key)
        if A is None:
            A = (sp.identity(self.grid.size, format="csr") - self.L.multiply(dt)).tocsr()
            self._cache[key] = A
        return A

    def apply_noise(self, u: np.ndarray, dZ: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for k, op in enumerate(self.noise):
            out += op.dot(u) * dZ[k]
        return out


def _face_coefficients(spec: DivergenceFormSpec, grid: Grid, t: float, axis: int):
    nodes = grid.nodes()
    p, _ = _face_index_pairs(grid.d, grid.n, axis)
    coords = nodes[p].copy()
    coords[:, axis] += 0.5 * grid.h
    A = spec.eval_aij(t, coords)
    ajv = spec.eval_aj(t, coords)[:, axis]
    return A, ajv


def assemble_operator(
    spec: DivergenceFormSpec,
    grid: Grid,
    t: float,
    *,
    entry_budget: int = 80_000_000,
    keep_conservative_part: bool = False,
) -> OperatorStencil:
    """Finite-volume assembly of L and the noise channels at time t.

    Raises :class:`AssemblyOverflow` when the estimated number of matrix
    entries exceeds ``entry_budget``.
    """
    d, n, h = grid.d, grid.n, grid.h
    est = grid.size * (1 + 2 * d + 8 * d * max(0, d - 1) + 2 * d * spec.mprime)
    if est > entry_budget:
        raise AssemblyOverflow(
            f"estimated {est} stencil entries exceed the budget {entry_budget}"
        )

    interior = grid.interior_mask()
    rows, cols, vals = [], [], []
    crows, ccols, cvals = [], [], []

    def add(r, c, v, conservative=False):
        rows.append(r)
        cols.append(c)
        vals.append(v)
        if conservative and keep_conservative_part:
            crows.append(r)
            ccols.append(c)
            cvals.append(v)

    for j in range(d):
        p, q = _face_index_pairs(d, n, j)
        A, ajv = _face_coefficients(spec, grid, t, j)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(ajv))):
            raise NonFinite(f"non-finite a^{{ij}}/a^j on axis {j} at t={t}")
        pi = interior[p]
        qi = interior[q]

        # normal two-point part of the flux
        w = A[:, j, j] / h**2
        add(p[pi], q[pi], w[pi], conservative=True)
        add(p[pi], p[pi], -w[pi], conservative=True)
        add(q[qi], p[qi], w[qi], conservative=True)
        add(q[qi], q[qi], -w[qi], conservative=True)

        # a^j u(face) with the arithmetic mean
        v = ajv / (2.0 * h)
        add(p[pi], p[pi], v[pi])
        add(p[pi], q[pi], v[pi])
        add(q[qi], p[qi], -v[qi])
        add(q[qi], q[qi], -v[qi])

        # transverse derivatives, averaged centered differences
        for i in range(d):
            if i == j:
                continue
            si = grid.stride(i)
            w = A[:, i, j] / (4.0 * h**2)
            for rowsel, sign in ((pi, 1.0), (qi, -1.0)):
                r = (p if sign > 0 else q)[rowsel]
                ww = sign * w[rowsel]
                add(r, p[rowsel] + si, ww, conservative=True)
                add(r, p[rowsel] - si, -ww, conservative=True)
                add(r, q[rowsel] + si, ww, conservative=True)
                add(r, q[rowsel] - si, -ww, conservative=True)

    nodes = grid.nodes()
    int_idx = np.flatnonzero(interior)
    bi = spec.eval_bi(t, nodes[int_idx])
    cv = spec.eval_c(t, nodes[int_idx])
    if not (np.all(np.isfinite(bi)) and np.all(np.isfinite(cv))):
        raise NonFinite(f"non-finite b/c at t={t}")
    for i in range(d):
        si = grid.stride(i)
        w = bi[:, i] / (2.0 * h)
        add(int_idx, int_idx + si, w)
        add(int_idx, int_idx - si, -w)
    add(int_idx, int_idx, cv)

    def build(r, c, v):
        return sp.coo_matrix(
            (np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
            shape=(grid.size, grid.size),
        ).tocsr()

    L = build(rows, cols, vals)
    conservative = build(crows, ccols, cvals) if keep_conservative_part else None

    sig = spec.eval_sigik(t, nodes[int_idx])
    nu = spec.eval_nuk(t, nodes[int_idx])
    if not (np.all(np.isfinite(sig)) and np.all(np.isfinite(nu))):
        raise NonFinite(f"non-finite sigma/nu at t={t}")
    noise = []
    row_sq = np.zeros(grid.size)
    for k in range(spec.mprime):
        r_, c_, v_ = [], [], []
        for i in range(d):
            si = grid.stride(i)
            w = sig[:, i, k] / (2.0 * h)
            r_.append(int_idx)
            c_.append(int_idx + si)
            v_.append(w)
            r_.append(int_idx)
            c_.append(int_idx - si)
            v_.append(-w)
        r_.append(int_idx)
        c_.append(int_idx)
        v_.append(nu[:, k])
        op = build(r_, c_, v_)
        noise.append(op)
        row_sq += np.asarray(op.multiply(op).sum(axis=1)).ravel()

    return OperatorStencil(
        grid=grid,
        t=t,
        L=L,
        noise=tuple(noise),
        noise_row_sq=row_sq,
        conservative=conservative,
    )


@dataclass(frozen=True)
class ForcingSnapshot:
    """Free terms frozen at one time: drift = (div f + f^0) nodal vector,
    g the per-channel nodal arrays."""

    drift: np.ndarray | None
    g: np.ndarray | None  # (mprime, size)


def evaluate_forcing(spec: DivergenceFormSpec, grid: Grid, t: float) -> ForcingSnapshot | None:
    """Evaluate f^i (face-flux divergence), f^0 and g^k on the grid."""
    if spec.fi is None and spec.f0 is None and spec.gk is None:
        return None
    interior = grid.interior_mask()
    nodes = grid.nodes()
    drift = np.zeros(grid.size)
    if spec.fi is not None:
        for j in range(grid.d):
            p, q = _face_index_pairs(grid.d, grid.n, j)
            coords = nodes[p].copy()
            coords[:, j] += 0.5 * grid.h
            fv = spec.eval_fi(t, coords)[:, j]
            pi = interior[p]
            qi = interior[q]
            np.add.at(drift, p[pi], fv[pi] / grid.h)
            np.add.at(drift, q[qi], -fv[qi] / grid.h)
    if spec.f0 is not None:
        f0 = spec.eval_f0(t, nodes)
        drift[interior] += f0[interior]
    g = None
    if spec.gk is not None:
        gv = spec.eval_gk(t, nodes)  # (size, mprime)
        g = gv.T.copy()
        g[:, ~interior] = 0.0
    return ForcingSnapshot(drift=drift, g=g)


def step(
    state: FieldState,
    stencil_now: OperatorStencil,
    stencil_next: OperatorStencil,
    dZ,
    dt: float,
    forcing: ForcingSnapshot | None = None,
    *,
    c_stab: float = 0.5,
    rtol: float = 1e-10,
    maxiter: int = 4000,
    growth_guard: float = 1e3,
) -> FieldState:
    """One IMEX Euler step.

    Solves (I - dt L_{t+dt}) u' = u + dt (div f + f^0) + sum_k (Lam^k u + g^k) dZ^k
    with an iterative solver at relative residual ``rtol``.  The explicit
    stochastic part is guarded by dt * max_node sum_k ||row_k||^2 <= c_stab
    (warning only); :class:`SolverDiverged` carries the final residual and
    :class:`Instability` fires on a one-step max-norm growth factor above
    ``growth_guard``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dZ = np.atleast_1d(np.asarray(dZ, dtype=float))
    if not np.all(np.isfinite(dZ)):
        raise NonFinite(f"driving increment not finite at t={state.t}")
    grid = stencil_next.grid
    u = state.values

    cfl = dt * float(stencil_now.noise_row_sq.max()) if len(stencil_now.noise) else 0.0
    if cfl > c_stab:
        warnings.warn(
            f"stochastic stability indicator {cfl:.3g} exceeds c_stab={c_stab}; "
            "consider smaller dt or finer grid",
            stacklevel=2,
        )

    rhs = u.copy()
    if len(stencil_now.noise):
        rhs += stencil_now.apply_noise(u, dZ)
        if forcing is not None and forcing.g is not None:
            rhs += forcing.g.T @ dZ
    if forcing is not None and forcing.drift is not None:
        rhs += dt * forcing.drift
    rhs[grid.ring_mask(1)] = 0.0

    bnorm = float(np.linalg.norm(rhs))
    if stencil_next.L.nnz == 0:
        new = rhs  # zero operator: the system matrix is the identity
    elif bnorm == 0.0:
        new = np.zeros_like(u)
    else:
        A = stencil_next.system_matrix(dt)
        new, info = bicgstab(A, rhs, x0=u, rtol=rtol, atol=0.0, maxiter=maxiter)
        if info != 0:
            res = float(np.linalg.norm(A @ new - rhs)) / bnorm
            raise SolverDiverged(
                f"linear solve failed at t={state.t} (info={info}), relative residual {res:.3e}",
                residual=res,
            )
    if not np.all(np.isfinite(new)):
        raise NonFinite(f"step produced non-finite values at t={state.t}")
    old_inf = float(np.abs(u).max())
    if old_inf > 0 and float(np.abs(new).max()) > growth_guard * old_inf:
        raise Instability(
            f"one-step max-norm growth {float(np.abs(new).max()) / old_inf:.3g} "
            f"exceeds {growth_guard} at t={state.t}"
        )
    return FieldState(values=new, t=state.t + dt)


@dataclass(frozen=True)
class Trajectory:
    """Recorded SPDE trajectory; ``values[i]`` is the flat field at
    ``step_indices[i]``."""

    grid: Grid
    dt: float
    step_indices: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (n_recorded, grid.size)
    driver: np.ndarray | None = None  # (N, mprime) increments actually used

    @property
    def n_steps(self) -> int:
        return int(self.step_indices[-1])

    def state(self, i: int) -> FieldState:
        return FieldState(values=self.values[i], t=float(self.times[i]))

    @property
    def final(self) -> FieldState:
        return self.state(len(self.times) - 1)

    def is_full(self) -> bool:
        return len(self.step_indices) == self.n_steps + 1


def _resolve_driver(driver, n_steps: int, mprime: int, dt: float = 0.0) -> np.ndarray:
    if driver is None:
        return np.zeros((n_steps, mprime))
    if callable(driver):
        return np.array([np.atleast_1d(driver(k, k * dt)) for k in range(n_steps)], dtype=float)
    arr = np.asarray(driver, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (n_steps, mprime):
        raise MisalignedGrids(
            f"driver shape {arr.shape} does not match ({n_steps}, {mprime})"
        )
    return arr


def solve(
    spec: DivergenceFormSpec,
    grid: Grid,
    u0: FieldState,
    driver,
    dt: float,
    T: float,
    *,
    record_every: int | None = 1,
    step_kwargs: dict | None = None,
) -> Trajectory:
    """Advance the SPDE over [0, T], recording snapshots at a stride.

    ``driver`` supplies the per-step increments dZ (array of shape
    (N, mprime), a callable, or None for a driftless deterministic run).
    ``record_every=None`` keeps only the initial and final states.  Reusing
    the same driver reproduces the trajectory bitwise.
    """
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    dZ = _resolve_driver(driver, n_steps, spec.mprime, dt)

    snap_idx = [0]
    snaps = [u0.values.copy()]
    state = u0
    stencil_now = assemble_operator(spec, grid, 0.0)
    kw = step_kwargs or {}
    for k in range(n_steps):
        t_next = (k + 1) * dt
        stencil_next = (
            stencil_now if spec.time_invariant else assemble_operator(spec, grid, t_next)
        )
        forcing = evaluate_forcing(spec, grid, k * dt)
        state = step(state, stencil_now, stencil_next, dZ[k], dt, forcing, **kw)
        stencil_now = stencil_next
        if (record_every and (k + 1) % record_every == 0) or k == n_steps - 1:
            snap_idx.append(k + 1)
            snaps.append(state.values.copy())

    idx = np.asarray(snap_idx, dtype=int)
    return Trajectory(
        grid=grid,
        dt=dt,
        step_indices=idx,
        times=idx * dt,
        values=np.asarray(snaps),
        driver=dZ,
    )


@dataclass(frozen=True)
class WeakResidualReport:
    times: np.ndarray
    series: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.series).max())


def _phi_on_grid(phi, grid: Grid) -> np.ndarray:
    if callable(phi):
        vals = eval_batch(lambda t, x: phi(x), 0.0, grid.nodes(), ())
    else:
        vals = np.asarray(phi, dtype=float).reshape(grid.size)
    if np.any(vals[grid.ring_mask(2)] != 0.0):
        raise SupportViolation("test function must vanish on the outer two node rings")
    return vals


def weak_residual(
    traj: Trajectory, phi, spec: DivergenceFormSpec, driver=None
) -> WeakResidualReport:
    """Weak-form residual series of a recorded trajectory.

    R(t) = (u_t, phi) - (u_0, phi) - rectangle sums of the drift pairing
    (flux terms against the face differences of phi, zeroth-order terms
    against phi) - noise sums (Lam^k u + g^k, phi) dZ^k.  The face pairing
    makes the spatial summation by parts exact for the discrete flux form,
    so the series isolates time-quadrature error, which decays ~ dt.
    """
    grid = traj.grid
    if not traj.is_full():
        raise MisalignedGrids("weak_residual needs a trajectory recorded at every step")
    n_steps = traj.n_steps
    dZ = traj.driver if driver is None else _resolve_driver(driver, n_steps, spec.mprime)
    if dZ is None:
        dZ = np.zeros((n_steps, spec.mprime))

    phv = _phi_on_grid(phi, grid)
    w = grid.cell_volume
    h = grid.h
    nodes = grid.nodes()
    interior = grid.interior_mask()
    dphi_face = []
    for j in range(grid.d):
        p, q = _face_index_pairs(grid.d, grid.n, j)
        dphi_face.append((phv[q] - phv[p]) / h)

    pairing0 = w * float(np.dot(traj.values[0], phv))
    series = np.zeros(n_steps + 1)
    acc = 0.0
    for s in range(n_steps + 1):
        u = traj.values[s]
        series[s] = w * float(np.dot(u, phv)) - pairing0 - acc
        if s == n_steps:
            break
        t = s * traj.dt
        drift = 0.0
        for j in range(grid.d):
            p, q = _face_index_pairs(grid.d, grid.n, j)
            coords = nodes[p].copy()
            coords[:, j] += 0.5 * h
            A = spec.eval_aij(t, coords)
            ajv = spec.eval_aj(t, coords)[:, j]
            flux = A[:, j, j] * (u[q] - u[p]) / h + ajv * 0.5 * (u[p] + u[q])
            for i in range(grid.d):
                if i == j:
                    continue
                si = grid.stride(i)
                # clipped indices give garbage on i-boundary faces, where
                # dphi vanishes anyway (phi is zero on two rings)
                hi = grid.size - 1
                du_p = (u[np.clip(p + si, 0, hi)] - u[np.clip(p - si, 0, hi)]) / (2 * h)
                du_q = (u[np.clip(q + si, 0, hi)] - u[np.clip(q - si, 0, hi)]) / (2 * h)
                flux = flux + A[:, i, j] * 0.5 * (du_p + du_q)
            if spec.fi is not None:
                flux = flux + spec.eval_fi(t, coords)[:, j]
            drift += -w * float(np.dot(flux, dphi_face[j]))
        zeroth = np.zeros(grid.size)
        if spec.bi is not None:
            bi = spec.eval_bi(t, nodes)
            for i in range(grid.d):
                si = grid.stride(i)
                du = np.zeros(grid.size)
                du[interior] = (u[np.flatnonzero(interior) + si] - u[np.flatnonzero(interior) - si]) / (2 * h)
                zeroth += bi[:, i] * du
        if spec.c is not None:
            zeroth += spec.eval_c(t, nodes) * u
        if spec.f0 is not None:
            zeroth += spec.eval_f0(t, nodes)
        drift += w * float(np.dot(zeroth, phv))
        acc += traj.dt * drift

        if spec.mprime:
            sig = spec.eval_sigik(t, nodes)
            nu = spec.eval_nuk(t, nodes)
            gk = spec.eval_gk(t, nodes) if spec.gk is not None else None
            int_idx = np.flatnonzero(interior)
            noise_tot = 0.0
            for k in range(spec.mprime):
                lam = np.zeros(grid.size)
                for i in range(grid.d):
                    si = grid.stride(i)
                    lam[int_idx] += sig[int_idx, i, k] * (u[int_idx + si] - u[int_idx - si]) / (2 * h)
                lam[int_idx] += nu[int_idx, k] * u[int_idx]
                if gk is not None:
                    lam[int_idx] += gk[int_idx, k]
                noise_tot += w * float(np.dot(lam, phv)) * dZ[s, k]
            acc += noise_tot

    return WeakResidualReport(times=traj.times, series=series)


# ---------------------------------------------------------------------------
# snapshot export


def export_field_csv(path, grid: Grid, state: FieldState) -> None:
    """Node coordinates and values, one row per node."""
    nodes = grid.nodes()
    with open(path, "w") as fh:
        fh.write(",".join([f"x{i}" for i in range(grid.d)] + ["value"]) + "\n")
        for row, v in zip(nodes, state.values):
            fh.write(",".join(repr(float(c)) for c in row) + f",{float(v)!r}\n")


def export_field_binary(path, grid: Grid, state: FieldState, metadata: dict | None = None) -> None:
    """Path-container layout extended with a field payload: the same
    16-byte layout block (version 2 marks a field payload), a numeric
    block carrying (t, L), the float64 field, then a JSON metadata tail
    recording scheme/tolerance details."""
    import json
    import struct

    head = struct.pack("<4sHHHHI", b"ZKPB", 2, grid.d, 0, 0, grid.n)
    head += struct.pack("<dd", float(state.t), float(grid.L))
    payload = np.asarray(state.values, dtype="<f8").tobytes()
    tail = json.dumps(metadata or {}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(tail)


def load_field_binary(path):
    """Inverse of :func:`export_field_binary`; returns (grid, state, metadata)."""
    import json
    import struct

    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, d, _, _, n = struct.unpack_from("<4sHHHHI", raw, 0)
    if magic != b"ZKPB" or version != 2:
        raise ValueError("not a field container")
    t, L = struct.unpack_from("<dd", raw, 16)
    (nbytes,) = struct.unpack_from("<Q", raw, 32)
    values = np.frombuffer(raw, dtype="<f8", count=nbytes // 8, offset=40).copy()
    metadata = json.loads(raw[40 + nbytes :].decode() or "{}")
    grid = Grid(d=d, L=L, n=n)
    return grid, FieldState(values=values, t=t), metadata
