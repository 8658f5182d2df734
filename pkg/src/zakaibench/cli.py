"""Scenario-driven entry point: config in, artifact tree + summary out.

Pipelines are batch runs (no interactive steering): parse a JSON scenario,
run simulate -> filter -> oracles -> diagnostics, emit CSV/JSON/binary
artifacts under ``outdir/<scenario-id>/`` and a machine-readable
``summary.json`` whose exit status reflects the enabled checks.

Config schema (JSON, all optional keys have defaults)::

    {
      "name": "lg1d",
      "kind": "filtering" | "spde" | "vmo",
      "system": {"family": "linear_gaussian" | "trigonometric", "params": {...}},
      "divergence_form": {"family": "kink", "params": {...}},   # spde kind
      "prior": {"family": "gaussian" | "bump", ...},
      "x0": "prior" | [..point..],
      "y0": [..],
      "grid": {"L": float, "n": int},
      "dt": float, "T": float,
      "seed": int, "replicas": int,
      "record_every": int | null,
      "oracles": {"kalman_bucy": bool, "particle_filter": bool, "particle_count": int},
      "diagnostics": {"assumptions": bool, "innovation_qv": bool, "holder": bool,
                       "continuous_dependence": bool, "ito": bool, "weak_residual": bool},
      "mollify_eps": [..],            # spde kind
      "tolerances": {...}             # per-check overrides
    }

The scenario id is the SHA-256 of the canonicalized config (sorted keys,
no whitespace), so key order and formatting do not matter.  All
randomness funnels through the single ``seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .errors import ConfigError, DimensionMismatch, ZakaiBenchError
from .families import kink_divergence_form, make_prior, make_system
from .model import SamplePlan, static_path, validate_assumptions, vmo_osc
from .oracles import LinearGaussianSpec, kalman_bucy_solve, particle_filter_solve
from .scenarios import SCENARIOS, get_scenario
from .sde_sim import STREAM_WIENER, generator, simulate_system
from .spde_solver import FieldState, Grid, export_field_binary, export_field_csv, solve, weak_residual
from .zakai import run_zakai

__all__ = ["main", "run_scenario", "scenario_id", "load_config", "apply_overrides", "ScenarioResult"]

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "name",
    "kind",
    "system",
    "divergence_form",
    "prior",
    "x0",
    "y0",
    "grid",
    "dt",
    "T",
    "seed",
    "replicas",
    "record_every",
    "oracles",
    "diagnostics",
    "mollify_eps",
    "tolerances",
    "radius",
    "resolution",
    "outdir",
}


def canonical_config(cfg: dict) -> str:
    cfg = {k: v for k, v in cfg.items() if k != "outdir"}
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def scenario_id(cfg: dict) -> str:
    return hashlib.sha256(canonical_config(cfg).encode()).hexdigest()[:16]


def load_config(path_or_name: str) -> dict:
    p = Path(path_or_name)
    if p.exists():
        try:
            return json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if path_or_name in SCENARIOS:
        return get_scenario(path_or_name)
    raise ConfigError(f"'{path_or_name}' is neither a config file nor a built-in scenario")


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply ``--set key.path=value`` overrides (values parsed as JSON)."""
    for item in assignments or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got '{item}'")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into '{part}'", field=key)
        node[parts[-1]] = value
    return cfg


def _validate(cfg: dict) -> None:
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}", field=sorted(unknown)[0])
    kind = cfg.get("kind", "filtering")
    if kind not in ("filtering", "spde", "vmo"):
        raise ConfigError(f"unknown kind '{kind}'", field="kind")
    if kind == "filtering":
        if "system" not in cfg:
            raise ConfigError("filtering scenario needs a 'system' entry", field="system")
        if cfg.get("dt", 0) <= 0:
            raise ConfigError(f"dt must be positive, got {cfg.get('dt')}", field="dt")
        grid = cfg.get("grid", {})
        if grid.get("n", 0) < 3:
            raise ConfigError(f"grid.n must be >= 3, got {grid.get('n')}", field="grid.n")
        try:
            make_system(cfg["system"].get("family", ""), cfg["system"].get("params", {}))
        except DimensionMismatch as exc:
            raise ConfigError(str(exc), field="system.params") from exc
    if kind == "spde" and "divergence_form" not in cfg:
        raise ConfigError("spde scenario needs 'divergence_form'", field="divergence_form")


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class ScenarioResult:
    scenario_id: str
    config: dict
    checks: list = field(default_factory=list)
    outdir: Path | None = None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def summary(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "scenario_id": self.scenario_id,
            "scenario": json.loads(canonical_config(self.config)),
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
        }
        if self.error is not None:
            out["error"] = self.error
        return out

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _prior_sampler(prior_cfg: dict, d: int):
    if prior_cfg.get("family") != "gaussian":
        raise ConfigError("x0='prior' requires a gaussian prior", field="x0")
    mean = np.broadcast_to(np.asarray(prior_cfg.get("mean", 0.0), dtype=float), (d,))
    cov = np.asarray(prior_cfg.get("cov", 1.0), dtype=float)
    if cov.ndim == 0:
        cov = np.eye(d) * float(cov)
    chol = np.linalg.cholesky(cov)

    def sampler(rng):
        return mean + chol @ rng.standard_normal(d)

    return sampler


def _grid_pi0(grid: Grid, prior):
    vals = prior(grid.nodes())
    vals = np.asarray(vals, dtype=float)
    vals[grid.ring_mask(1)] = 0.0
    mass = grid.cell_volume * float(np.sum(vals))
    if mass <= 0:
        raise ConfigError("prior has no mass on the grid", field="prior")
    return vals / mass


# ---------------------------------------------------------------------------
# filtering pipeline


def _replica_task(spec, lg, cfg, grid, pi0_vals, x0, r):
    dt, T, seed = cfg["dt"], cfg["T"], cfg["seed"]
    paths = simulate_system(spec, x0, np.asarray(cfg.get("y0", [0.0] * spec.dy), dtype=float), dt, T, seed, replica=r)
    record = cfg.get("record_every")
    diags = cfg.get("diagnostics", {})
    if r == 0 and diags.get("holder"):
        record = 1
    out = run_zakai(spec, paths, pi0_vals, grid, record_every=record)
    payload = {
        "paths": paths if r == 0 else None,
        "out": out if r == 0 else None,
        "min_mass": float(out.mass.min()),
        "mass_T": float(out.mass[-1]),
        "undershoot": float(out.negativity.max()),
        "sup": float(np.abs(out.snapshots).max()),
    }
    oracles_cfg = cfg.get("oracles", {})
    if oracles_cfg.get("kalman_bucy") and lg is not None:
        kb = kalman_bucy_solve(lg, paths, dt)
        dm = out.mean - kb.mean
        dv = out.variance - kb.cov
        payload["kb_num_m"] = float(np.sum(dm**2) * dt)
        payload["kb_den_m"] = float(np.sum(kb.mean**2) * dt)
        payload["kb_num_v"] = float(np.sum(dv**2) * dt)
        payload["kb_den_v"] = float(np.sum(kb.cov**2) * dt)
        payload["kb"] = kb if r == 0 else None
    if oracles_cfg.get("particle_filter"):
        sampler = _prior_sampler(cfg["prior"], spec.d)
        pf = particle_filter_solve(
            spec,
            paths,
            int(oracles_cfg.get("particle_count", 100000)),
            dt,
            seed=seed,
            init_sampler=lambda rng, n: np.stack([sampler(rng) for _ in range(n)]),
        )
        dm = out.mean - pf.mean
        payload["pf_num_m"] = float(np.sum(dm**2) * dt)
        payload["pf_den_m"] = float(np.sum(pf.mean**2) * dt)
        payload["pf"] = pf if r == 0 else None
    return payload


def _lg_from_config(cfg, spec):
    params = cfg["system"]["params"]
    prior = cfg["prior"]
    d = spec.d
    cov = np.asarray(prior.get("cov", 1.0), dtype=float)
    if cov.ndim == 0:
        cov = np.eye(d) * float(cov)
    return LinearGaussianSpec(
        F=params["F"],
        H=params["H"],
        theta=params["theta"],
        Theta=params["Theta"],
        m0=np.broadcast_to(np.asarray(prior.get("mean", 0.0), dtype=float), (d,)),
        P0=cov,
    )


def _run_filtering(cfg: dict, result: ScenarioResult, outdir: Path | None, threads: int) -> None:
    spec = make_system(cfg["system"].get("family"), cfg["system"].get("params", {}))
    tol = cfg.get("tolerances", {})
    grid = Grid(d=spec.d, L=float(cfg["grid"]["L"]), n=int(cfg["grid"]["n"]))
    prior = make_prior(cfg["prior"].get("family", "gaussian"), cfg["prior"])
    pi0_vals = _grid_pi0(grid, prior)
    x0_cfg = cfg.get("x0", "prior")
    x0 = _prior_sampler(cfg["prior"], spec.d) if x0_cfg == "prior" else np.asarray(x0_cfg, dtype=float)
    lg = None
    if cfg["system"].get("family") in ("affine", "linear_gaussian"):
        lg = _lg_from_config(cfg, spec)

    replicas = int(cfg.get("replicas", 1))
    if threads > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_replica_task, spec, lg, cfg, grid, pi0_vals, x0, r)
                for r in range(replicas)
            ]
            payloads = [f.result() for f in futs]
    else:
        payloads = [_replica_task(spec, lg, cfg, grid, pi0_vals, x0, r) for r in range(replicas)]

    tolerances = {
        "kalman_mean_rel": tol.get("kalman_mean_rel", 0.02),
        "kalman_var_rel": tol.get("kalman_var_rel", 0.05),
        "pf_mean_rel": tol.get("pf_mean_rel", 0.05),
        "undershoot_rel": tol.get("undershoot_rel", 1e-6),
        "mass_replica_sigmas": tol.get("mass_replica_sigmas", 3.0),
        "innovation_qv_slope": tol.get("innovation_qv_slope", 0.05),
        "holder_time_exponent": tol.get("holder_time_exponent", 0.4),
        "holder_space_exponent": tol.get("holder_space_exponent", 0.85),
        "fp_l1": tol.get("fp_l1", 1e-3),
    }

    min_mass = min(p["min_mass"] for p in payloads)
    result.checks.append(
        Check("mass_positive", min_mass, 0.0, min_mass > 0.0, "min over steps and replicas")
    )
    sup = max(p["sup"] for p in payloads)
    und = max(p["undershoot"] for p in payloads) / max(sup, 1e-300)
    result.checks.append(
        Check("undershoot_rel", und, tolerances["undershoot_rel"], und <= tolerances["undershoot_rel"])
    )
    if replicas >= 8:
        mass_T = np.array([p["mass_T"] for p in payloads])
        se = float(mass_T.std(ddof=1)) / math.sqrt(replicas)
        sig = abs(float(mass_T.mean()) - 1.0) / max(se, 1e-300)
        result.checks.append(
            Check(
                "mass_replica_mean",
                sig,
                tolerances["mass_replica_sigmas"],
                sig <= tolerances["mass_replica_sigmas"],
                f"replica mean {mass_T.mean():.6f}, std-error {se:.2e}",
            )
        )
    if lg is not None and cfg.get("oracles", {}).get("kalman_bucy"):
        num_m = sum(p["kb_num_m"] for p in payloads)
        den_m = sum(p["kb_den_m"] for p in payloads)
        num_v = sum(p["kb_num_v"] for p in payloads)
        den_v = sum(p["kb_den_v"] for p in payloads)
        rel_m = math.sqrt(num_m / max(den_m, 1e-300))
        rel_v = math.sqrt(num_v / max(den_v, 1e-300))
        result.checks.append(
            Check("kalman_mean_rel", rel_m, tolerances["kalman_mean_rel"], rel_m <= tolerances["kalman_mean_rel"])
        )
        result.checks.append(
            Check("kalman_var_rel", rel_v, tolerances["kalman_var_rel"], rel_v <= tolerances["kalman_var_rel"])
        )
    if cfg.get("oracles", {}).get("particle_filter"):
        num_m = sum(p["pf_num_m"] for p in payloads)
        den_m = sum(p["pf_den_m"] for p in payloads)
        rel_m = math.sqrt(num_m / max(den_m, 1e-300))
        result.checks.append(
            Check("pf_mean_rel", rel_m, tolerances["pf_mean_rel"], rel_m <= tolerances["pf_mean_rel"])
        )

    out0 = payloads[0]["out"]
    diags = cfg.get("diagnostics", {})
    if diags.get("innovation_qv") and out0 is not None:
        qv = out0.innovation.qv
        worst = 0.0
        for k in range(qv.shape[1]):
            slope = float(np.polyfit(out0.times, qv[:, k], 1)[0])
            worst = max(worst, abs(slope - 1.0))
        result.checks.append(
            Check(
                "innovation_qv_slope",
                worst,
                tolerances["innovation_qv_slope"],
                worst <= tolerances["innovation_qv_slope"],
                "max |slope - 1| over components",
            )
        )
    holder_report = None
    if diags.get("holder") and out0 is not None:
        holder_report = diag.holder_exponents(out0)
        te = holder_report.time_exponent if holder_report.time_exponent is not None else 0.0
        se_ = holder_report.space_exponent if holder_report.space_exponent is not None else 0.0
        result.checks.append(
            Check("holder_time_exponent", te, tolerances["holder_time_exponent"], te >= tolerances["holder_time_exponent"])
        )
        result.checks.append(
            Check("holder_space_exponent", se_, tolerances["holder_space_exponent"], se_ >= tolerances["holder_space_exponent"])
        )

    # Fokker-Planck reduction vs the closed-form Gaussian (scalar case)
    params = cfg["system"].get("params", {})
    cross = np.asarray(params.get("theta", [[1.0]]), dtype=float) @ np.asarray(
        params.get("Theta", [[1.0]]), dtype=float
    ).T
    if (
        lg is not None
        and spec.d == 1
        and np.allclose(np.asarray(params["H"], dtype=float), 0.0)
        and np.abs(cross).max() < 1e-14
    ):
        F = float(np.asarray(params["F"], dtype=float).ravel()[0])
        q = float(np.sum(np.asarray(params["theta"], dtype=float) ** 2))
        m0 = float(lg.m0[0])
        p0 = float(lg.P0[0, 0])
        T = cfg["T"]
        mT = m0 * math.exp(F * T)
        pT = p0 * math.exp(2 * F * T) + q * (math.exp(2 * F * T) - 1.0) / (2 * F)
        xs = grid.nodes()[:, 0]
        ref = np.exp(-0.5 * (xs - mT) ** 2 / pT) / math.sqrt(2 * math.pi * pT)
        piT = out0.snapshots[-1] / out0.mass[-1]
        l1 = grid.cell_volume * float(np.sum(np.abs(piT - ref)))
        result.checks.append(Check("fp_l1", l1, tolerances["fp_l1"], l1 <= tolerances["fp_l1"]))

    assumption_report = None
    if diags.get("assumptions"):
        assumption_report = validate_assumptions(spec, SamplePlan(seed=cfg["seed"], n_random=2048))
        result.checks.append(
            Check(
                "assumptions_pass",
                1.0 if assumption_report.passed else 0.0,
                1.0,
                assumption_report.passed,
            )
        )

    if outdir is not None:
        (outdir / "paths").mkdir(parents=True, exist_ok=True)
        (outdir / "densities").mkdir(exist_ok=True)
        (outdir / "oracle").mkdir(exist_ok=True)
        (outdir / "diagnostics").mkdir(exist_ok=True)
        paths0 = payloads[0]["paths"]
        paths0.save_csv(outdir / "paths" / "replica0.csv")
        paths0.save_binary(outdir / "paths" / "replica0.bin")
        _write_csv(
            outdir / "moments.csv",
            ["t"] + [f"mean{i}" for i in range(spec.d)] + [f"var{i}" for i in range(spec.d)],
            np.column_stack(
                [out0.times, out0.mean, np.einsum("nii->ni", out0.variance)]
            ),
        )
        _write_csv(outdir / "mass.csv", ["t", "mass"], np.column_stack([out0.times, out0.mass]))
        inn = out0.innovation
        _write_csv(
            outdir / "innovation.csv",
            ["t"] + [f"dw{k}" for k in range(spec.dy)] + [f"qv{k}" for k in range(spec.dy)],
            np.column_stack([out0.times[:-1], inn.increments, inn.qv[1:]]),
        )
        n_snap = len(out0.snapshot_indices)
        meta = {"scheme": out0.metadata["scheme"], "c_stab": 0.5, "solver_rtol": 1e-10}
        for i in np.unique(np.linspace(0, n_snap - 1, min(n_snap, 20), dtype=int)):
            stp = int(out0.snapshot_indices[i])
            export_field_csv(outdir / "densities" / f"pibar_{stp:08d}.csv", grid, out0.pibar(i))
            export_field_binary(outdir / "densities" / f"pibar_{stp:08d}.bin", grid, out0.pibar(i), meta)
        if payloads[0].get("kb") is not None:
            kb = payloads[0]["kb"]
            _write_csv(
                outdir / "oracle" / "kalman.csv",
                ["t"] + [f"mean{i}" for i in range(spec.d)] + [f"cov{i}" for i in range(spec.d)],
                np.column_stack([kb.times, kb.mean, np.einsum("nii->ni", kb.cov)]),
            )
        if payloads[0].get("pf") is not None:
            pf = payloads[0]["pf"]
            _write_csv(
                outdir / "oracle" / "pf.csv",
                ["t"] + [f"mean{i}" for i in range(spec.d)] + [f"var{i}" for i in range(spec.d)] + ["ess"],
                np.column_stack([pf.times, pf.mean, np.einsum("nii->ni", pf.variance), pf.ess]),
            )
        if assumption_report is not None:
            (outdir / "diagnostics" / "assumptions.json").write_text(
                json.dumps(assumption_report.as_dict(), indent=2, default=str)
            )
        if holder_report is not None:
            (outdir / "diagnostics" / "holder.json").write_text(
                json.dumps(
                    {
                        "time_exponent": holder_report.time_exponent,
                        "time_band": holder_report.time_band,
                        "space_exponent": holder_report.space_exponent,
                        "space_band": holder_report.space_band,
                        "degenerate": holder_report.degenerate,
                        "scenario_id": result.scenario_id,
                    },
                    indent=2,
                )
            )


# ---------------------------------------------------------------------------
# SPDE diagnostics pipeline


def _run_spde(cfg: dict, result: ScenarioResult, outdir: Path | None) -> None:
    fam = cfg["divergence_form"].get("family")
    params = cfg["divergence_form"].get("params", {})
    if fam != "kink":
        raise ConfigError(f"unknown divergence-form family '{fam}'", field="divergence_form.family")
    spec = kink_divergence_form(**params)
    tol = cfg.get("tolerances", {})
    grid = Grid(d=spec.d, L=float(cfg["grid"]["L"]), n=int(cfg["grid"]["n"]))
    prior = make_prior(cfg["prior"].get("family", "gaussian"), cfg["prior"])
    u0 = FieldState.create(grid, _grid_pi0(grid, prior), 0.0)
    dt, T, seed = cfg["dt"], cfg["T"], cfg["seed"]
    n_steps = int(round(T / dt))
    rng = generator(seed, 0, STREAM_WIENER)
    driver = rng.normal(0.0, math.sqrt(dt), (n_steps, spec.mprime))
    diags = cfg.get("diagnostics", {})

    cd_report = None
    if diags.get("continuous_dependence"):
        eps = cfg.get("mollify_eps", [0.4, 0.2, 0.1, 0.05])
        cd_report = diag.continuous_dependence_study(spec, grid, u0, driver, dt, T, eps)
        slack = tol.get("cd_slack", 0.10)
        ratios = cd_report.w1p_errors[1:] / np.maximum(cd_report.w1p_errors[:-1], 1e-300)
        worst = float(ratios.max()) if len(ratios) else 0.0
        result.checks.append(
            Check(
                "cd_monotone_decay",
                worst,
                1.0 + slack,
                cd_report.monotone_decay(slack),
                "max error ratio across halvings",
            )
        )
    if diags.get("ito"):
        _, slope = diag.ito_refinement_study(spec, grid, u0, dt, T, p=2.0, seed=seed)
        want = tol.get("ito_slope", 0.4)
        val = slope if slope is not None else 0.0
        result.checks.append(Check("ito_slope_p2", val, want, val >= want, "log-log dt slope"))
    if diags.get("weak_residual"):
        xs = grid.nodes()[:, 0] if grid.d == 1 else np.linalg.norm(grid.nodes(), axis=1)
        width = grid.L / 2.0
        phi = np.where(np.abs(xs) < width, np.cos(0.5 * np.pi * xs / width) ** 2, 0.0)
        phi[grid.ring_mask(2)] = 0.0
        traj = solve(spec, grid, u0, driver, dt, T, record_every=1)
        res1 = weak_residual(traj, phi, spec).max_abs
        fine = driver.reshape(-1, 1, spec.mprime).repeat(2, axis=1) / 2.0
        fine = fine.reshape(-1, spec.mprime)
        # halving dt with the same path (increments split evenly)
        traj2 = solve(spec, grid, u0, fine, dt / 2, T, record_every=1)
        res2 = weak_residual(traj2, phi, spec).max_abs
        ratio = res2 / max(res1, 1e-300)
        result.checks.append(
            Check("weak_residual_decay", ratio, 0.75, ratio <= 0.75, "residual ratio at dt/2")
        )

    if outdir is not None and cd_report is not None:
        (outdir / "diagnostics").mkdir(parents=True, exist_ok=True)
        (outdir / "diagnostics" / "continuous_dependence.json").write_text(
            json.dumps(
                {
                    "eps": list(cd_report.eps),
                    "w1p_errors": list(cd_report.w1p_errors),
                    "sup_lp_errors": list(cd_report.sup_lp_errors),
                    "scenario_id": result.scenario_id,
                },
                indent=2,
            )
        )


# ---------------------------------------------------------------------------
# oscillation probe pipeline


def _run_vmo(cfg: dict, result: ScenarioResult, outdir: Path | None) -> None:
    rho = float(cfg.get("radius", 1.0))
    res = int(cfg.get(str("resolution"), 64))
    qtol = cfg.get("tolerances", {}).get("quadrature", 1e-4)
    path = static_path([0.0])
    win = (0.0, 0.0)

    v_const = vmo_osc(lambda t, x: np.sin(t) * np.ones(len(x)), rho, path, win, ball_resolution=res)
    result.checks.append(
        Check("vmo_x_independent_exact_zero", v_const, 0.0, v_const == 0.0, "must be exactly 0")
    )
    v_sign = vmo_osc(lambda t, x: np.sign(x[:, 0]), 1.0, path, win, ball_resolution=res)
    result.checks.append(Check("vmo_sign_example", abs(v_sign - 1.0), qtol, abs(v_sign - 1.0) <= qtol))
    v_lin = vmo_osc(lambda t, x: x[:, 0], rho, path, win, ball_resolution=res)
    result.checks.append(
        Check("vmo_linear_example", abs(v_lin - rho / 2.0), qtol, abs(v_lin - rho / 2.0) <= qtol)
    )
    if outdir is not None:
        (outdir / "diagnostics").mkdir(parents=True, exist_ok=True)
        (outdir / "diagnostics" / "vmo.json").write_text(
            json.dumps(
                {"x_independent": v_const, "sign": v_sign, "linear": v_lin, "radius": rho},
                indent=2,
            )
        )


# ---------------------------------------------------------------------------


def run_scenario(
    config: dict | str,
    outdir=None,
    threads: int = 1,
    overrides=None,
    write_artifacts: bool = True,
) -> ScenarioResult:
    """Run one scenario end to end; returns the result with its checks.

    ``config`` is a dict, a path, or a built-in name.  Artifacts land in
    ``outdir/<scenario-id>/``.  ``overrides`` is a list of "key=value"
    strings with dot paths.
    """
    cfg = load_config(config) if isinstance(config, str) else json.loads(json.dumps(config))
    apply_overrides(cfg, overrides)
    _validate(cfg)
    sid = scenario_id(cfg)
    result = ScenarioResult(scenario_id=sid, config=cfg)

    target = None
    if write_artifacts:
        base = Path(outdir or cfg.get("outdir") or os.environ.get("ZAKAI_BENCH_OUTDIR", "zakai-bench-out"))
        target = base / sid
        target.mkdir(parents=True, exist_ok=True)
        result.outdir = target

    kind = cfg.get("kind", "filtering")
    try:
        if kind == "filtering":
            _run_filtering(cfg, result, target, threads)
        elif kind == "spde":
            _run_spde(cfg, result, target)
        else:
            _run_vmo(cfg, result, target)
    except ZakaiBenchError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    if target is not None:
        (target / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True))
    return result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zakaibench",
        description="Filtering/SPDE benchmark scenarios: simulate, filter, cross-check, diagnose.",
    )
    parser.add_argument("--list-scenarios", action="store_true", help="print built-in scenarios and exit")
    sub = parser.add_subparsers(dest="command")
    run_p = sub.add_parser("run", help="run a scenario config")
    run_p.add_argument("--config", required=True, help="config file path or built-in scenario name")
    run_p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dot paths, JSON values)")
    run_p.add_argument("--outdir", default=None, help="artifact root (default $ZAKAI_BENCH_OUTDIR)")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads for replicas")

    args = parser.parse_args(argv)
    if args.list_scenarios:
        for name in sorted(SCENARIOS):
            print(name)
        return 0
    if args.command != "run":
        parser.print_help()
        return 2
    try:
        result = run_scenario(args.config, outdir=args.outdir, threads=args.threads, overrides=args.sets)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for c in result.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: value={c.value:.6g} tolerance={c.tolerance:.6g}")
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
        return 3
    if result.outdir is not None:
        print(f"artifacts: {result.outdir}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
