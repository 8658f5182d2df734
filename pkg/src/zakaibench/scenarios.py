"""Built-in benchmark scenarios.

Each entry is a complete config dict; the CLI resolves ``--config <name>``
against this registry when the argument is not a file.  Values follow the
schema documented in :mod:`zakaibench.cli`.
"""

from __future__ import annotations

import copy

__all__ = ["SCENARIOS", "get_scenario"]


def _filtering_defaults():
    return {
        "kind": "filtering",
        "prior": {"family": "gaussian", "mean": 0.0, "cov": 0.5},
        "x0": "prior",
        "y0": [0.0],
        "grid": {"L": 8.0, "n": 801},
        "dt": 1e-4,
        "T": 1.0,
        "seed": 1000,
        "replicas": 1,
        "record_every": None,
        "oracles": {"kalman_bucy": False, "particle_filter": False, "particle_count": 100000},
        "diagnostics": {
            "assumptions": False,
            "innovation_qv": False,
            "holder": False,
        },
        "tolerances": {
            "kalman_mean_rel": 0.02,
            "kalman_var_rel": 0.05,
            "pf_mean_rel": 0.05,
            "undershoot_rel": 1e-6,
            "mass_replica_sigmas": 3.0,
            "innovation_qv_slope": 0.05,
            "holder_time_exponent": 0.4,
            "holder_space_exponent": 0.85,
        },
    }


SCENARIOS: dict = {}

# linear-Gaussian, correlated signal/observation noise
_lg1d = _filtering_defaults()
_lg1d.update(
    name="lg1d",
    system={
        "family": "linear_gaussian",
        "params": {
            "F": [[-1.0]],
            "H": [[1.0]],
            "theta": [[1.0, 0.5]],
            "Theta": [[0.0, 1.0]],
            "K": 16.0,
            "delta": 0.4,
        },
    },
)
_lg1d["oracles"]["kalman_bucy"] = True
SCENARIOS["lg1d"] = _lg1d

# linear-Gaussian, uncorrelated (disjoint noise columns)
_lgu1d = copy.deepcopy(_lg1d)
_lgu1d["name"] = "lgu1d"
_lgu1d["system"]["params"]["theta"] = [[1.0, 0.0]]
SCENARIOS["lgu1d"] = _lgu1d

# Fokker-Planck reduction: no observation drift, no cross term
_oufp = _filtering_defaults()
_oufp.update(
    name="ou-fp",
    system={
        "family": "linear_gaussian",
        "params": {
            "F": [[-1.0]],
            "H": [[0.0]],
            "theta": [[1.0, 0.0]],
            "Theta": [[0.0, 1.0]],
            "K": 16.0,
            "delta": 0.4,
        },
    },
)
_oufp["prior"] = {"family": "gaussian", "mean": 0.5, "cov": 0.25}
_oufp["x0"] = "prior"
SCENARIOS["ou-fp"] = _oufp

# nonlinear drift benchmark for the particle-filter oracle
_nl1d = _filtering_defaults()
_nl1d.update(
    name="nl1d",
    system={
        "family": "trigonometric",
        "params": {
            "lin": -1.0,
            "amp": 0.8,
            "freq": 2.0,
            "H": [[1.0]],
            "theta": [[0.7, 0.0]],
            "Theta": [[0.0, 0.5]],
            "K": 16.0,
            "delta": 0.1,
        },
    },
    grid={"L": 6.0, "n": 601},
    dt=2e-3,
    T=1.0,
    prior={"family": "gaussian", "mean": 0.0, "cov": 0.3},
)
_nl1d["oracles"]["particle_filter"] = True
SCENARIOS["nl1d"] = _nl1d

# Lipschitz-kink coefficients: continuous-dependence study
SCENARIOS["kink"] = {
    "name": "kink",
    "kind": "spde",
    "divergence_form": {
        "family": "kink",
        "params": {"base": 1.0, "slope": 0.5, "sig": 0.3, "nu": 0.2, "K": 8.0, "delta": 0.3},
    },
    "prior": {"family": "gaussian", "mean": 0.0, "cov": 0.25},
    "grid": {"L": 4.0, "n": 201},
    "dt": 1e-3,
    "T": 0.25,
    "seed": 1000,
    "mollify_eps": [0.4, 0.2, 0.1, 0.05],
    "diagnostics": {"continuous_dependence": True, "ito": False, "weak_residual": False},
    "tolerances": {"cd_slack": 0.10, "ito_slope": 0.4},
}

# oscillation diagnostics probe
SCENARIOS["vmo-probe"] = {
    "name": "vmo-probe",
    "kind": "vmo",
    "seed": 1000,
    "radius": 1.0,
    "resolution": 64,
    "tolerances": {"quadrature": 1e-4},
}


def get_scenario(name: str) -> dict:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario '{name}' (have: {', '.join(sorted(SCENARIOS))})")
    return copy.deepcopy(SCENARIOS[name])
