"""Spectral toolkit for the dissipative rotating Gross-Pitaevskii equation.

    -e^{i theta} d_t psi = (H_Omega - mu) psi + lambda |psi|^{2 sigma} psi,
    H_Omega = -Delta/2 + omega^2 |x|^2 / 2 - Omega L,

in d = 2 or 3, discretized in the joint eigenbasis of H_Omega and L.
"""

from rgl.attractor import (
    AbsorbingBounds,
    DimensionEstimate,
    absorbing_bounds,
    collective_bound_constant,
    decay_rate_fit,
    dimension_estimate,
    mass_upper_bound,
    predicted_decay_rate,
)
from rgl.basis import SpectralBasis, SpectralCoeffs, WaveField, analyze, build_basis, synthesize
from rgl.dynamics import BlowUpError, IntegratorConfig, SimState, nonlinear_term, picard_iterate, simulate, step
from rgl.functionals import DiagnosticsSeries, EnergyBreakdown, energy, free_energy, mass, sigma_norm
from rgl.ground_state import GroundStateResult, normalized_gradient_flow, stationarity_residual, vortex_count
from rgl.params import ModelParams, Truncation, validate
from rgl.propagator import apply_kernel, mehler_kernel, propagate_modes

__version__ = "0.1.0"

__all__ = [
    "AbsorbingBounds", "BlowUpError", "DiagnosticsSeries", "DimensionEstimate", "EnergyBreakdown",
    "GroundStateResult", "IntegratorConfig", "ModelParams", "SimState", "SpectralBasis",
    "SpectralCoeffs", "Truncation", "WaveField", "absorbing_bounds", "analyze", "apply_kernel",
    "build_basis", "collective_bound_constant", "decay_rate_fit", "dimension_estimate", "energy",
    "free_energy", "mass", "mass_upper_bound", "mehler_kernel", "nonlinear_term",
    "normalized_gradient_flow", "picard_iterate", "predicted_decay_rate", "propagate_modes",
    "sigma_norm", "simulate", "stationarity_residual", "step", "synthesize", "validate", "vortex_count",
]
