"""Decay rates, absorbing-ball constants and the attractor-dimension estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rgl.basis import SpectralBasis, enumerate_modes
from rgl.functionals import (
    DiagnosticsSeries,
    interpolation_exponents,
    lower_bound_constant,
)
from rgl.params import ModelParams, require_valid

# Levels used for the collective eigenvalue constant when no basis is supplied.
_DEFAULT_LEVELS = {2: 30, 3: 12}


def _sorted_spectrum(source: SpectralBasis | ModelParams, m_max: int | None = None) -> np.ndarray:
    if isinstance(source, SpectralBasis):
        return np.sort(source.energy_unrotated)
    levels = _DEFAULT_LEVELS[source.dim]
    while True:
        modes = enumerate_modes(source, levels)
        if m_max is None or len(modes) >= m_max:
            return np.sort([md.energy_unrotated for md in modes])
        levels *= 2


def collective_bound_constant(basis: SpectralBasis | ModelParams, m_max: int | None = None) -> float:
    """min_{m <= m_max} (sum of the m smallest oscillator eigenvalues) / m^(1 + 1/d).

    Eigenvalues are counted with multiplicity. ``basis`` may also be a
    ModelParams, in which case enough complete levels are enumerated to cover
    ``m_max``.
    """
    e = _sorted_spectrum(basis, m_max)
    dim = basis.dim
    m_max = len(e) if m_max is None else m_max
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if m_max > len(e):
        raise ValueError(f"m_max = {m_max} exceeds the {len(e)} available modes")
    m = np.arange(1, m_max + 1)
    return float(np.min(np.cumsum(e[:m_max]) / m ** (1 + 1 / dim)))


def spectral_floor(params: ModelParams) -> float:
    """Lowest rotated eigenvalue, omega d / 2 whenever |Omega| < omega."""
    return params.omega * params.dim / 2


def predicted_decay_rate(params: ModelParams) -> float:
    """Rate r with M(t) <= M(0) e^{-r t}: 2 cos(theta) (omega d/2 - mu)."""
    floor = spectral_floor(params)
    if params.mu >= floor:
        raise ValueError(f"mu = {params.mu} >= omega d/2 = {floor}: no decay is guaranteed")
    return 2 * params.gamma * (floor - params.mu)


def weak_decay_rate(params: ModelParams) -> float:
    """The cruder alternative 2 |mu| cos(theta), available for mu < 0."""
    if params.mu >= 0:
        raise ValueError("the weak decay rate needs mu < 0")
    return 2 * abs(params.mu) * params.gamma


def decay_rate_fit(series: DiagnosticsSeries | tuple[np.ndarray, np.ndarray]) -> tuple[float, float]:
    """Negated least-squares slope of log M over the final half; returns (rate, r^2)."""
    if isinstance(series, DiagnosticsSeries):
        t, M = series.column("times"), series.column("mass")
    else:
        t, M = (np.asarray(a, dtype=float) for a in series)
    if len(t) < 4:
        raise ValueError("need at least 4 samples")
    if np.any(M <= 0):
        raise ValueError("masses must be positive")
    t, y = t[len(t) // 2:], np.log(M[len(M) // 2:])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r2


def mass_upper_bound(t: float | np.ndarray, M0: float, params: ModelParams) -> float | np.ndarray:
    """Gronwall envelope M0 (1 + 2 mu t cos(theta) e^{2 mu t cos(theta)})."""
    if params.mu < 0:
        raise ValueError("the envelope is stated for mu >= 0; use predicted_decay_rate")
    a = 2 * params.mu * np.asarray(t, dtype=float) * params.gamma
    return M0 * (1 + a * np.exp(a))


@dataclass(frozen=True)
class AbsorbingBounds:
    K: float
    C_interp: float
    C_young: float
    c_lower: float
    theta_loc: float
    theta_tilde: float
    rho_M: float
    rho_Sigma: float
    delta_bound: float

    def energy_envelope(self, t: float | np.ndarray, E0: float, params: ModelParams):
        """K + e^{-t mu cos(theta)} E(0)."""
        return self.K + np.exp(-np.asarray(t, dtype=float) * params.mu * params.gamma) * E0


def absorbing_bounds(params: ModelParams, margin: float = 1.0) -> AbsorbingBounds:
    """Chain the lower-bound, interpolation and Young constants into K and the radii.

    The radii bound trajectories once E(t) <= K + margin:
    rho_M^2 = C (K + margin)^theta_tilde and rho_Sigma^2 = rho_M^2 + c (K + margin).
    """
    require_valid(params)
    if not (params.lam > 0 and params.mu > 0):
        raise ValueError("absorbing bounds need lambda > 0 and mu > 0")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    theta_loc, tt = interpolation_exponents(params)
    c = lower_bound_constant(params)
    C = 2.0 * c**tt
    g, mu, s, d = params.gamma, params.mu, params.sigma, params.dim
    C_young = (1 - tt) * (C * mu * tt / g) ** (tt / (1 - tt))
    K = mu * C * C_young / g
    rho_M2 = C * (K + margin) ** tt
    rho_S2 = rho_M2 + c * (K + margin)
    delta = (K * (s + 1) / params.lam) ** (2 * s / (2 * s + 2 - d * s))
    return AbsorbingBounds(K, C, C_young, c, theta_loc, tt, math.sqrt(rho_M2), math.sqrt(rho_S2), delta)


def empirical_delta(series: DiagnosticsSeries, params: ModelParams) -> float:
    """Time average of ||psi||_{2s+2}^{2 s alpha_tilde}, read off the nonlinear energy."""
    t = series.column("times")
    s, d = params.sigma, params.dim
    norm = series.column("nonlinear") * (s + 1) / params.lam
    vals = norm ** (2 * s / (2 * s + 2 - d * s))
    if t[-1] <= t[0]:
        raise ValueError("series must span a positive time interval")
    return float(np.trapezoid(vals, t) / (t[-1] - t[0]))


@dataclass(frozen=True)
class DimensionEstimate:
    kappa1: float
    kappa2: float
    c_collective: float
    alpha: float
    alpha_tilde: float
    delta_used: float
    m_hausdorff: int
    m_fractal: int
    c_prime: float = 1.0
    c_double_prime: float = 1.0

    @property
    def ratio(self) -> float:
        return 2 * self.kappa2 / self.kappa1

    @property
    def order_of_magnitude(self) -> bool:
        """True when the unnamed absolute constants are left at 1."""
        return self.c_prime == 1.0 and self.c_double_prime == 1.0


def dimension_estimate(params: ModelParams, basis: SpectralBasis | None = None, delta: float | None = None,
                       c_prime: float = 1.0, c_double_prime: float = 1.0) -> DimensionEstimate:
    """Upper bound m on the Hausdorff dimension of the attractor.

    kappa1 = gamma c (1 - eps) / 4 and
    kappa2 = c' gamma mu^{1+d} (1-eps)^{-d} + c'' (lambda |beta|)^{1+alpha} gamma^{-alpha} (1-eps)^{-alpha} delta,
    with m the integer satisfying m - 1 < (2 kappa2 / kappa1)^{d/(d+1)} <= m.
    """
    require_valid(params)
    if not (params.lam > 0 and params.mu > 0):
        raise ValueError("the dimension estimate needs lambda > 0 and mu > 0")
    if params.gamma <= 0:
        raise ValueError("needs cos(theta) > 0")
    if c_prime <= 0 or c_double_prime <= 0:
        raise ValueError("c' and c'' must be positive")
    s, d = params.sigma, params.dim
    alpha = d * s / (2 * s + 2 - d * s)
    alpha_t = (2 * s + 2) / (2 * s + 2 - d * s)
    if delta is None:
        delta = absorbing_bounds(params).delta_bound
    elif delta < 0:
        raise ValueError("delta must be >= 0")
    c = collective_bound_constant(basis if basis is not None else params)
    g, one_eps = params.gamma, 1 - params.epsilon
    kappa1 = g * c / 4 * one_eps
    kappa2 = (c_prime * g * params.mu ** (1 + d) * one_eps ** (-d)
              + c_double_prime * (params.lam * abs(params.beta)) ** (1 + alpha)
              * g ** (-alpha) * one_eps ** (-alpha) * delta)
    x = (2 * kappa2 / kappa1) ** (d / (d + 1))
    m = max(1, math.ceil(x))
    return DimensionEstimate(kappa1, kappa2, c, alpha, alpha_t, float(delta), m, 2 * m,
                             c_prime, c_double_prime)
