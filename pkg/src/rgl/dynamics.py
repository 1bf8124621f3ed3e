"""Time integration of the dissipative rotating GP equation in the joint eigenbasis.

In coefficients the equation reads dc/dt = L c + N(c) with the diagonal
L = -e^{-i theta} (E_Omega - mu) and N(c) = -e^{-i theta} P[lambda |psi|^{2 sigma} psi],
where P is the discrete projection onto the basis. The linear part is
integrated exactly (exponential time differencing).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from rgl.basis import SpectralBasis, SpectralCoeffs
from rgl.functionals import DiagnosticsSeries
from rgl.params import ModelParams, require_valid

log = logging.getLogger(__name__)

BLOWUP_NORM = 1e8


class BlowUpError(RuntimeError):
    """Coefficient norm left the admissible range.

    In the defocusing regime solutions exist for all times, so this signals
    numerical instability rather than a finite-time singularity.
    """


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1) / z with a series branch near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl
    return out


def phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z) / z^2 with a series branch near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1.0  # direct formula cancels badly below |z| ~ 1
    out = np.empty_like(z)
    zs = z[small]
    term = np.full(zs.shape, 0.5, dtype=complex)
    acc = term.copy()
    for k in range(3, 24):
        term = term * zs / k
        acc += term
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.expm1(zl) - zl) / zl**2
    return out


def nonlinear_term(coeffs: SpectralCoeffs, params: ModelParams | None = None) -> SpectralCoeffs:
    """Projection of lambda |psi|^{2 sigma} psi onto the retained modes."""
    b = coeffs.basis
    p = b.params if params is None else params
    if p.lam == 0:
        return SpectralCoeffs(b, np.zeros(b.n_modes, dtype=complex))
    psi = b.matrix @ coeffs.values
    a2 = psi.real**2 + psi.imag**2
    dens = a2 if p.sigma == 1 else a2**p.sigma
    return SpectralCoeffs(b, b._analysis @ (p.lam * dens * psi))


def free_energy_gradient(coeffs: SpectralCoeffs, params: ModelParams) -> np.ndarray:
    """(E_Omega - mu) c + P[lambda |psi|^{2 sigma} psi]; dc/dt = -e^{-i theta} times this."""
    b = coeffs.basis
    return (b.energy_rotated - params.mu) * coeffs.values + nonlinear_term(coeffs, params).values


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    scheme: Literal["ETD1", "ETDRK2"] = "ETDRK2"
    snapshot_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("ETD1", "ETDRK2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    def recommended_dt(self, basis: SpectralBasis, params: ModelParams) -> float:
        return 1.0 / (2 * np.max(np.abs(basis.energy_rotated - params.mu)))

    def exceeds_recommended(self, basis: SpectralBasis, params: ModelParams) -> bool:
        return self.dt >= self.recommended_dt(basis, params)


@dataclass
class SimState:
    t: float
    coeffs: SpectralCoeffs
    params: ModelParams

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if not np.all(np.isfinite(self.coeffs.values)):
            raise ValueError("coefficients must be finite")


class ETDStepper:
    """Precomputed exponential factors for one (basis, params, dt, scheme)."""

    def __init__(self, basis: SpectralBasis, params: ModelParams, dt: float, scheme: str = "ETDRK2"):
        self.basis = basis
        self.params = params
        self.dt = dt
        self.scheme = scheme
        z = -params.eta * (basis.energy_rotated - params.mu) * dt
        self.expz = np.exp(z)
        self.w1 = dt * phi1(z)
        self.w2 = dt * phi2(z)

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        p = self.params
        if p.lam == 0:
            return np.zeros_like(c)
        return -p.eta * nonlinear_term(SpectralCoeffs(self.basis, c), p).values

    def __call__(self, c: np.ndarray) -> np.ndarray:
        if self.params.lam == 0:
            return self.expz * c
        n0 = self.nonlinear(c)
        a = self.expz * c + self.w1 * n0
        if self.scheme == "ETD1":
            return a
        return a + self.w2 * (self.nonlinear(a) - n0)


def _check_finite(c: np.ndarray, t: float) -> None:
    norm = float(np.linalg.norm(c))
    if not math.isfinite(norm) or norm > BLOWUP_NORM:
        raise BlowUpError(
            f"coefficient norm {norm:.3e} at t = {t:.6g} exceeds {BLOWUP_NORM:g}; "
            "the Sigma-norm blow-up alternative cannot occur for lambda >= 0, "
            "so the step size is too large for the nonlinearity"
        )


def step(state: SimState, cfg: IntegratorConfig) -> SimState:
    stepper = ETDStepper(state.coeffs.basis, state.params, cfg.dt, cfg.scheme)
    c = stepper(state.coeffs.values)
    _check_finite(c, state.t + cfg.dt)
    return SimState(state.t + cfg.dt, SpectralCoeffs(state.coeffs.basis, c), state.params)


@dataclass
class SimulationResult:
    series: DiagnosticsSeries
    snapshot_times: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    final: SimState | None = None
    aborted: bool = False
    error: str = ""

    def snapshot_array(self) -> np.ndarray:
        return np.array(self.snapshots)


def simulate(params: ModelParams, psi0: SpectralCoeffs, cfg: IntegratorConfig, t_final: float,
             keep_snapshots: bool = True) -> SimulationResult:
    """Integrate from t = 0 to t_final, recording diagnostics every snapshot_stride steps.

    A final shorter step is taken when t_final is not a multiple of dt. On a
    blow-up the partial trajectory is returned with ``aborted`` set.
    """
    require_valid(params)
    basis = psi0.basis
    n_steps = max(1, math.ceil(t_final / cfg.dt - 1e-9))
    last_dt = t_final - (n_steps - 1) * cfg.dt
    stepper = ETDStepper(basis, params, cfg.dt, cfg.scheme)
    last = stepper if abs(last_dt - cfg.dt) < 1e-12 * cfg.dt else ETDStepper(basis, params, last_dt, cfg.scheme)
    result = SimulationResult(DiagnosticsSeries())
    c = psi0.values.copy()

    def record(t: float, c: np.ndarray) -> None:
        coeffs = SpectralCoeffs(basis, c)
        diss = float(np.sum(np.abs(free_energy_gradient(coeffs, params)) ** 2))
        result.series.append(t, coeffs, params, diss)
        if keep_snapshots:
            result.snapshot_times.append(t)
            result.snapshots.append(c.copy())

    record(0.0, c)
    t = 0.0
    for k in range(1, n_steps + 1):
        advance = last if k == n_steps else stepper
        try:
            c = advance(c)
            t = t_final if k == n_steps else k * cfg.dt
            _check_finite(c, t)
        except BlowUpError as exc:
            log.error("%s", exc)
            result.aborted = True
            result.error = str(exc)
            break
        if k % cfg.snapshot_stride == 0 or k == n_steps:
            record(t, c)
    result.final = SimState(t, SpectralCoeffs(basis, c), params) if not result.aborted else None
    return result


# -- Picard iteration of the Duhamel map ----------------------------------------------------


@dataclass
class PicardResult:
    times: np.ndarray
    iterates: list[np.ndarray]
    distances: list[float]
    contraction_estimate: float
    diverged: bool

    @property
    def fixed_point(self) -> np.ndarray:
        return self.iterates[-1]


def _chebyshev_times(T: float, n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 * T * (1 - np.cos(np.pi * k / (n - 1)))


def picard_iterate(params: ModelParams, psi0: SpectralCoeffs, T: float, n_iter: int,
                   n_times: int = 17, n_panels: int = 4, gauss_order: int = 10) -> PicardResult:
    """Fixed-point iterates of the Duhamel map on [0, T].

    Xi(psi)(t) = e^{L t} c0 + int_0^t e^{L (t - s)} N(psi(s)) ds, with psi held
    at Chebyshev times, N interpolated in time, and the s-integral done by a
    composite Gauss-Legendre rule with the exact mode propagator inside. The
    first iterate is the constant path psi(t) = psi0. Distances are
    max over times of the coefficient L^2 norm.
    """
    if n_iter < 2:
        raise ValueError("n_iter must be >= 2")
    require_valid(params)
    basis = psi0.basis
    L = -params.eta * (basis.energy_rotated - params.mu)
    times = _chebyshev_times(T, n_times)
    gx, gw = np.polynomial.legendre.leggauss(gauss_order)
    c0 = psi0.values

    def N(c: np.ndarray) -> np.ndarray:
        return -params.eta * nonlinear_term(SpectralCoeffs(basis, c), params).values

    def xi(path: np.ndarray) -> np.ndarray:
        out = np.exp(np.outer(times, L)) * c0
        if params.lam == 0:
            return out
        interp = BarycentricInterpolator(times, np.array([N(c) for c in path]))
        for j, t in enumerate(times[1:], start=1):
            edges = np.linspace(0.0, t, n_panels + 1)
            s = (0.5 * (edges[1:] - edges[:-1])[:, None] * (gx + 1) + edges[:-1, None]).ravel()
            ws = (0.5 * (edges[1:] - edges[:-1])[:, None] * gw).ravel()
            vals = interp(s)
            out[j] += np.sum(ws[:, None] * np.exp(np.outer(t - s, L)) * vals, axis=0)
        return out

    path = np.tile(c0, (n_times, 1))
    iterates = [path]
    distances: list[float] = []
    for _ in range(n_iter):
        new = xi(path)
        distances.append(float(np.max(np.linalg.norm(new - path, axis=1))))
        iterates.append(new)
        path = new
        if distances[-1] > BLOWUP_NORM:
            break
    scale = max(1.0, float(np.max(np.linalg.norm(iterates[0], axis=1))))
    ratios = [b / a for a, b in zip(distances, distances[1:]) if a > 1e-11 * scale and b > 1e-13 * scale]
    estimate = max(ratios) if ratios else 0.0
    return PicardResult(times, iterates, distances, estimate, diverged=estimate >= 1.0)
