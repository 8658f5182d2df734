"""Euler-Maruyama simulation of the partially observed system.

Paths are seed-reproducible: the noise stream is a counter-based Philox
generator keyed by (seed, replica, stream), so replicas parallelize with
no stream overlap and rerunning with the same key is bit-identical.  The
raw Wiener increments ride along in the :class:`PathBundle` for reuse by
the filter driver and the oracles.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite
from .model import SystemSpec, eval_batch

__all__ = [
    "PathBundle",
    "simulate_system",
    "simulate_replicas",
    "generator",
]

_MAGIC = b"ZKPB"
_VERSION = 1

# substream ids, shared package-wide so no two consumers collide
STREAM_WIENER = 0
STREAM_X0 = 1
STREAM_PARTICLES = 2
STREAM_RESAMPLE = 3


def generator(seed: int, replica: int = 0, stream: int = STREAM_WIENER) -> np.random.Generator:
    """Counter-based generator keyed by (seed, replica, stream)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PathBundle:
    """One simulated trajectory of (x_t, y_t) plus its raw increments.

    ``dw[n]`` is the Wiener increment over [times[n], times[n+1]]; both
    lines of the system were advanced with the same increment.
    """

    times: np.ndarray  # (N+1,)
    x_path: np.ndarray  # (N+1, d)
    y_path: np.ndarray  # (N+1, d1-d)
    dw: np.ndarray  # (N, m)
    seed: int
    dt: float
    replica: int = 0

    @property
    def n_steps(self) -> int:
        return self.dw.shape[0]

    @property
    def d(self) -> int:
        return self.x_path.shape[1]

    @property
    def dy(self) -> int:
        return self.y_path.shape[1]

    @property
    def m(self) -> int:
        return self.dw.shape[1]

    def y_increments(self) -> np.ndarray:
        return np.diff(self.y_path, axis=0)

    # -- serialization ------------------------------------------------

    def save_binary(self, path) -> None:
        """Compact container; 16-byte layout block (magic, version, d, d1,
        m, N), 16-byte numeric block (dt, seed), 16-byte replica block,
        then float64 payload.  Round-trips bit-exactly."""
        n = self.n_steps
        head = struct.pack(
            "<4sHHHHI", _MAGIC, _VERSION, self.d, self.d + self.dy, self.m, n
        )
        head += struct.pack("<dq", self.dt, int(self.seed))
        head += struct.pack("<I12x", int(self.replica))
        payload = np.concatenate(
            [self.x_path.ravel(), self.y_path.ravel(), self.dw.ravel()]
        ).astype("<f8")
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(payload.tobytes())

    @classmethod
    def load_binary(cls, path) -> "PathBundle":
        with open(path, "rb") as fh:
            raw = fh.read()
        magic, version, d, d1, m, n = struct.unpack_from("<4sHHHHI", raw, 0)
        if magic != _MAGIC:
            raise ValueError(f"not a path container (magic {magic!r})")
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        dt, seed = struct.unpack_from("<dq", raw, 16)
        (replica,) = struct.unpack_from("<I", raw, 32)
        dy = d1 - d
        data = np.frombuffer(raw, dtype="<f8", offset=48)
        nx, ny = (n + 1) * d, (n + 1) * dy
        x = data[:nx].reshape(n + 1, d).copy()
        y = data[nx : nx + ny].reshape(n + 1, dy).copy()
        dw = data[nx + ny :].reshape(n, m).copy()
        times = np.arange(n + 1) * dt
        return cls(times=times, x_path=x, y_path=y, dw=dw, seed=seed, dt=dt, replica=replica)

    def save_csv(self, path) -> None:
        """Columnar export (t, x..., y..., dw...); increments sit on the row
        of their interval's left endpoint, the final row carries nan."""
        n = self.n_steps
        dw_pad = np.full((n + 1, self.m), np.nan)
        dw_pad[:n] = self.dw
        cols = ["t"]
        cols += [f"x{i}" for i in range(self.d)]
        cols += [f"y{i}" for i in range(self.dy)]
        cols += [f"dw{i}" for i in range(self.m)]
        buf = io.StringIO()
        buf.write(
            f"# d={self.d} d1={self.d + self.dy} m={self.m} N={n} "
            f"dt={self.dt!r} seed={self.seed} replica={self.replica}\n"
        )
        buf.write(",".join(cols) + "\n")
        for i in range(n + 1):
            row = [repr(float(self.times[i]))]
            row += [repr(float(v)) for v in self.x_path[i]]
            row += [repr(float(v)) for v in self.y_path[i]]
            row += [repr(float(v)) for v in dw_pad[i]]
            buf.write(",".join(row) + "\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load_csv(cls, path) -> "PathBundle":
        with open(path) as fh:
            meta_line = fh.readline().strip()
            fh.readline()  # column names
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        meta = dict(kv.split("=") for kv in meta_line.lstrip("# ").split())
        d, d1, m = int(meta["d"]), int(meta["d1"]), int(meta["m"])
        n = int(meta["N"])
        dy = d1 - d
        times = body[:, 0]
        x = body[:, 1 : 1 + d]
        y = body[:, 1 + d : 1 + d + dy]
        dw = body[:n, 1 + d + dy :]
        return cls(
            times=times,
            x_path=x,
            y_path=y,
            dw=dw,
            seed=int(meta["seed"]),
            dt=float(meta["dt"]),
            replica=int(meta["replica"]),
        )


def _steps_for(T: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = round(T / dt)
    if n < 0 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"horizon T={T} is not an integer multiple of dt={dt}")
    return n


def simulate_replicas(
    spec: SystemSpec,
    x0,
    y0,
    dt: float,
    T: float,
    seed: int,
    n_replicas: int,
    first_replica: int = 0,
) -> list[PathBundle]:
    """Simulate several replicas at once, vectorized across the batch.

    Per-replica increments come from the replica's own keyed stream, so the
    result is bit-identical to calling :func:`simulate_system` replica by
    replica (elementwise updates use fixed-order einsum contractions).
    """
    n = _steps_for(T, dt)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (spec.dy,):
        raise DimensionMismatch(f"y0 must have shape ({spec.dy},), got {y0.shape}")
    R = n_replicas
    replicas = [first_replica + r for r in range(R)]

    xs = np.empty((R, spec.d))
    for r, rep in enumerate(replicas):
        if callable(x0):
            xs[r] = np.asarray(x0(generator(seed, rep, STREAM_X0)), dtype=float)
        else:
            xs[r] = np.asarray(x0, dtype=float)
    ys = np.tile(y0, (R, 1))

    dws = np.empty((R, n, spec.m))
    for r, rep in enumerate(replicas):
        dws[r] = generator(seed, rep, STREAM_WIENER).normal(0.0, np.sqrt(dt), (n, spec.m))

    x_paths = np.empty((R, n + 1, spec.d))
    y_paths = np.empty((R, n + 1, spec.dy))
    x_paths[:, 0] = xs
    y_paths[:, 0] = ys
    for k in range(n):
        t = k * dt
        z = np.concatenate([xs, ys], axis=1)
        bv = eval_batch(spec.b, t, z, (spec.d,))
        th = eval_batch(spec.theta, t, z, (spec.d, spec.m))
        Bv = eval_batch(spec.B, t, z, (spec.dy,))
        Th = eval_batch(spec.Theta, t, ys, (spec.dy, spec.m))
        for name, arr in (("b", bv), ("theta", th), ("B", Bv), ("Theta", Th)):
            if not np.all(np.isfinite(arr)):
                bad = np.argwhere(~np.isfinite(arr.reshape(R, -1)).all(axis=1))[0, 0]
                raise NonFinite(f"coefficient {name} returned non-finite at t={t}, z={z[bad]}")
        dwk = dws[:, k]
        xs = xs + bv * dt + np.einsum("rim,rm->ri", th, dwk)
        ys = ys + Bv * dt + np.einsum("rim,rm->ri", Th, dwk)
        x_paths[:, k + 1] = xs
        y_paths[:, k + 1] = ys

    times = np.arange(n + 1) * dt
    return [
        PathBundle(
            times=times,
            x_path=x_paths[r],
            y_path=y_paths[r],
            dw=dws[r],
            seed=seed,
            dt=dt,
            replica=replicas[r],
        )
        for r in range(R)
    ]


def simulate_system(
    spec: SystemSpec, x0, y0, dt: float, T: float, seed: int, replica: int = 0
) -> PathBundle:
    """Euler-Maruyama paths of the two-component system.

    Both lines share the same Wiener increments.  ``x0`` may be a point or
    a sampler ``rng -> point`` drawn from a stream independent of the
    increments.  Raises :class:`NonFinite` with the offending (t, z) when
    a coefficient returns NaN/Inf.
    """
    return simulate_replicas(spec, x0, y0, dt, T, seed, 1, first_replica=replica)[0]
