"""Mass, energy and free energy, plus the inequality checkers built on them.

Quadratic quantities are evaluated in coefficient space (the modes are
eigenfunctions of H_0 and L, and |x|^2 is tridiagonal per angular sector);
the nonlinear potential is a quadrature sum over the basis grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rgl.basis import SpectralCoeffs, WaveField, synthesize
from rgl.params import ModelParams


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    nonlinear: float
    rotational: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.nonlinear + self.rotational


def _params(coeffs: SpectralCoeffs, params: ModelParams | None) -> ModelParams:
    return coeffs.basis.params if params is None else params


def mass(coeffs: SpectralCoeffs) -> float:
    return float(np.vdot(coeffs.values, coeffs.values).real)


def grid_mass(field: WaveField) -> float:
    return float(np.dot(field.basis.quad_weights, np.abs(field.values) ** 2))


def lp_norm(field: WaveField, p: float) -> float:
    """Discrete L^p norm with quadrature weights; p = inf is the grid max."""
    a = np.abs(field.values)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    return float(np.dot(field.basis.quad_weights, a**p) ** (1.0 / p))


def nonlinear_norm(coeffs: SpectralCoeffs, sigma: float) -> float:
    """||psi||_{2 sigma + 2}^{2 sigma + 2} by quadrature."""
    psi = synthesize(coeffs).values
    return float(np.dot(coeffs.basis.quad_weights, np.abs(psi) ** (2 * sigma + 2)))


def position_moment(coeffs: SpectralCoeffs) -> float:
    """||x psi||_2^2."""
    b = coeffs.basis
    c = coeffs.values
    return float(np.vdot(c, b.position_moment @ c).real) / b.params.omega


def angular_momentum(coeffs: SpectralCoeffs) -> float:
    """<psi, L psi>."""
    return float(np.dot(coeffs.basis.m, np.abs(coeffs.values) ** 2))


def energy(coeffs: SpectralCoeffs, params: ModelParams | None = None) -> EnergyBreakdown:
    p = _params(coeffs, params)
    b = coeffs.basis
    dens = np.abs(coeffs.values) ** 2
    h0 = float(np.dot(b.energy_unrotated, dens))
    potential = 0.5 * p.omega**2 * position_moment(coeffs)
    nl = p.lam / (p.sigma + 1) * nonlinear_norm(coeffs, p.sigma) if p.lam != 0 else 0.0
    return EnergyBreakdown(
        kinetic=h0 - potential,
        potential=potential,
        nonlinear=nl,
        rotational=-p.Omega * float(np.dot(b.m, dens)),
    )


def free_energy(coeffs: SpectralCoeffs, params: ModelParams | None = None) -> float:
    p = _params(coeffs, params)
    return energy(coeffs, p).total - p.mu * mass(coeffs)


def gradient_norm_sq(coeffs: SpectralCoeffs) -> float:
    return 2.0 * energy(coeffs, coeffs.basis.params.replace(lam=0.0)).kinetic


def sigma_norm(coeffs: SpectralCoeffs) -> float:
    """||f||_Sigma = sqrt(||f||^2 + ||grad f||^2 + ||x f||^2)."""
    return math.sqrt(mass(coeffs) + gradient_norm_sq(coeffs) + position_moment(coeffs))


# -- inequality checkers ------------------------------------------------------------------


def localization_exponent(dim: int, p: float) -> float:
    if math.isinf(p):
        return dim / (2 + dim)
    return dim * (p - 2) / (2 * p + dim * (p - 2))


def localization_check(field: WaveField, p: float) -> tuple[float, float, float]:
    """Return (||f||_2, 2 ||x f||_2^th ||f||_p^(1-th), th)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    b = field.basis
    theta = localization_exponent(b.dim, p)
    a2 = np.abs(field.values) ** 2
    r2 = np.sum(b.quad_nodes**2, axis=1)
    lhs = math.sqrt(float(np.dot(b.quad_weights, a2)))
    xf = math.sqrt(float(np.dot(b.quad_weights, r2 * a2)))
    rhs = 2.0 * xf**theta * lp_norm(field, p) ** (1 - theta)
    return lhs, rhs, theta


def lower_bound_constant(params: ModelParams, with_nonlinear: bool = True) -> float:
    """Constant c with ||grad u||^2 + ||x u||^2 + ||u||_{2s+2}^{2s+2} <= c E(u)."""
    one_minus_eps = 1.0 - params.epsilon
    if not with_nonlinear:
        return 4.0 / one_minus_eps
    if params.lam <= 0:
        raise ValueError("the nonlinear term needs lambda > 0")
    return 4.0 / min(one_minus_eps, 2 * params.lam * params.sigma / (params.sigma + 1))


def energy_lower_bound_check(coeffs: SpectralCoeffs,
                             params: ModelParams | None = None) -> tuple[float, float]:
    """Return (||grad psi||^2 + ||x psi||^2 [+ ||psi||_{2s+2}^{2s+2}], c E(psi)).

    With lambda = 0 only the gradient and moment terms are compared, using
    c = 4 / (1 - Omega^2/omega^2).
    """
    p = _params(coeffs, params)
    with_nl = p.lam > 0
    c = lower_bound_constant(p, with_nl)
    lhs = gradient_norm_sq(coeffs) + position_moment(coeffs)
    if with_nl:
        lhs += nonlinear_norm(coeffs, p.sigma)
    return lhs, c * energy(coeffs, p).total


def interpolation_exponents(params: ModelParams) -> tuple[float, float]:
    """(theta_loc, (sigma theta_loc + 1) / (sigma + 1))."""
    s, d = params.sigma, params.dim
    theta_loc = d * s / (2 * s + 2 + d * s)
    return theta_loc, (s * theta_loc + 1) / (s + 1)


def interpolation_constant(params: ModelParams) -> float:
    _, expo = interpolation_exponents(params)
    return 2.0 * lower_bound_constant(params) ** expo


def mass_energy_interpolation_check(coeffs: SpectralCoeffs,
                                    params: ModelParams | None = None) -> tuple[float, float]:
    """Return (M, C E^((sigma theta + 1)/(sigma + 1)))."""
    p = _params(coeffs, params)
    if p.lam <= 0 or not p.omega > abs(p.Omega):
        raise ValueError("needs lambda > 0 and omega > |Omega|")
    _, expo = interpolation_exponents(p)
    M = mass(coeffs)
    E = energy(coeffs, p).total
    if E <= 0 and M > 0:
        raise ArithmeticError("non-positive energy with positive mass")
    return M, interpolation_constant(p) * max(E, 0.0) ** expo


# -- time series ---------------------------------------------------------------------------


@dataclass
class DiagnosticsSeries:
    times: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    energies: list[EnergyBreakdown] = field(default_factory=list)
    free_energy: list[float] = field(default_factory=list)
    angular_momentum: list[float] = field(default_factory=list)
    # ||d psi / dt||^2, known exactly from the Galerkin right-hand side
    dissipation: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def append(self, t: float, coeffs: SpectralCoeffs, params: ModelParams,
               dissipation: float = math.nan) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("times must be strictly increasing")
        en = energy(coeffs, params)
        M = mass(coeffs)
        self.times.append(float(t))
        self.mass.append(M)
        self.energies.append(en)
        self.free_energy.append(en.total - params.mu * M)
        self.angular_momentum.append(angular_momentum(coeffs))
        self.dissipation.append(float(dissipation))

    def column(self, name: str) -> np.ndarray:
        if name in ("kinetic", "potential", "nonlinear", "rotational", "total"):
            return np.array([getattr(e, name) for e in self.energies])
        return np.asarray(getattr(self, name), dtype=float)


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def identity_residuals(series: DiagnosticsSeries, params: ModelParams) -> tuple[float, float]:
    """Max residuals of the integrated mass and free-energy identities (trapezoid in time).

    The energy residual is NaN when the series carries no dissipation data.
    """
    if len(series) < 3:
        raise ValueError("series needs at least 3 samples")
    t = series.column("times")
    M = series.column("mass")
    E = series.column("total")
    F = series.column("free_energy")
    g = params.gamma
    # lambda sigma/(sigma+1) ||psi||^{2s+2} = sigma * E_nl
    integrand = E + params.sigma * series.column("nonlinear") - params.mu * M
    mass_res = np.abs(M - M[0] + 2 * g * _cumtrapz(integrand, t)).max()
    D = series.column("dissipation")
    if np.all(np.isfinite(D)):
        energy_res = float(np.abs(F - F[0] + 2 * g * _cumtrapz(D, t)).max())
    else:
        energy_res = math.nan
    return float(mass_res), energy_res


def fd_dissipation(times: np.ndarray, snapshots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """||d psi/dt||^2 at interior snapshot times by centered differences of coefficients."""
    t = np.asarray(times, dtype=float)
    c = np.asarray(snapshots)
    dc = (c[2:] - c[:-2]) / (t[2:] - t[:-2])[:, None]
    return t[1:-1], np.sum(np.abs(dc) ** 2, axis=1)
