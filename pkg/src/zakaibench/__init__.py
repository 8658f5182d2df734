"""Nonlinear filtering of partially observable diffusions via
divergence-form SPDEs: solver, filter, oracles, diagnostics."""

from . import diagnostics, errors, families, model, oracles, scenarios, sde_sim, spde_solver, zakai
from .model import (
    AssumptionReport,
    DivergenceFormSpec,
    FilterCoefficients,
    SamplePlan,
    SystemSpec,
    assemble_filter_coefficients,
    inv_sqrt,
    max_oscillation,
    to_divergence_form,
    validate_assumptions,
    vmo_osc,
)
from .oracles import LinearGaussianSpec, ParticleEnsemble, kalman_bucy_solve, particle_filter_solve
from .sde_sim import PathBundle, simulate_replicas, simulate_system
from .spde_solver import FieldState, Grid, OperatorStencil, assemble_operator, solve, step, weak_residual
from .zakai import FilterOutput, conditional_expectation, innovation_process, run_zakai

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "DivergenceFormSpec",
    "FieldState",
    "FilterCoefficients",
    "FilterOutput",
    "Grid",
    "LinearGaussianSpec",
    "OperatorStencil",
    "ParticleEnsemble",
    "PathBundle",
    "SamplePlan",
    "SystemSpec",
    "assemble_filter_coefficients",
    "assemble_operator",
    "conditional_expectation",
    "diagnostics",
    "errors",
    "families",
    "innovation_process",
    "inv_sqrt",
    "kalman_bucy_solve",
    "max_oscillation",
    "model",
    "oracles",
    "particle_filter_solve",
    "run_zakai",
    "scenarios",
    "sde_sim",
    "simulate_replicas",
    "simulate_system",
    "solve",
    "spde_solver",
    "step",
    "to_divergence_form",
    "validate_assumptions",
    "vmo_osc",
    "weak_residual",
    "zakai",
]
