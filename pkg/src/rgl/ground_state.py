"""Stationary states by normalized gradient flow, and vortex detection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from rgl.basis import (
    SpectralBasis,
    SpectralCoeffs,
    WaveField,
    analyze,
    random_band_limited,
)
from rgl.dynamics import free_energy_gradient, nonlinear_term, phi1
from rgl.functionals import EnergyBreakdown, energy, mass
from rgl.params import ModelParams, require_valid

log = logging.getLogger(__name__)

# multiple of lambda max|phi|^{2 sigma} used by the automatic stabilization shift
STABILIZATION_FACTOR = 2.0


# -- seeds -----------------------------------------------------------------------------------


def seed_mode(basis: SpectralBasis, n_r: int, m: int) -> SpectralCoeffs:
    return basis.unit(basis.index(n_r, m))


def seed_gaussian(basis: SpectralBasis, offset: float = 0.0) -> SpectralCoeffs:
    """Oscillator Gaussian centred at (offset, 0[, 0])."""
    x = basis.quad_nodes.copy()
    x[:, 0] -= offset
    g = np.exp(-0.5 * basis.params.omega * np.sum(x**2, axis=1))
    c = analyze(WaveField(basis, g.astype(complex)))
    c.values /= math.sqrt(mass(c))
    return c


def seed_random(basis: SpectralBasis, seed: int) -> SpectralCoeffs:
    return random_band_limited(basis, np.random.default_rng(seed), mass=1.0)


def parse_seed(spec: str, basis: SpectralBasis) -> SpectralCoeffs:
    """Seeds ``mode:<nr>,<m>``, ``gaussian-offset:<dx>``, ``gaussian`` or ``random:<seed>``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "mode":
            nr, m = (int(v) for v in arg.split(","))
            return seed_mode(basis, nr, m)
        if kind == "gaussian-offset":
            return seed_gaussian(basis, float(arg))
        if kind == "gaussian" and not arg:
            return seed_gaussian(basis)
        if kind == "random":
            return seed_random(basis, int(arg))
    except (ValueError, KeyError) as exc:
        raise ValueError(f"bad seed {spec!r}: {exc}") from exc
    raise ValueError(f"unknown seed {spec!r}")


# -- flow ------------------------------------------------------------------------------------


def chemical_potential(coeffs: SpectralCoeffs, params: ModelParams) -> float:
    """<H_Omega phi + lambda |phi|^{2 sigma} phi, phi> / M."""
    c = coeffs.values
    hc = coeffs.basis.energy_rotated * c + nonlinear_term(coeffs, params).values
    return float(np.vdot(c, hc).real / np.vdot(c, c).real)


def stationarity_residual(coeffs: SpectralCoeffs, mu: float, params: ModelParams) -> float:
    """||H_Omega phi + lambda |phi|^{2 sigma} phi - mu phi||_2 within the retained band."""
    return float(np.linalg.norm(free_energy_gradient(coeffs, params.replace(mu=mu))))


@dataclass
class GroundStateResult:
    coeffs: SpectralCoeffs
    chemical_potential: float
    energy: EnergyBreakdown
    residual: float
    iterations: int
    vortex_count: int | None
    converged: bool
    energy_history: list[float]


def _flow_map(basis: SpectralBasis, flow: ModelParams, dt: float, target_mass: float,
              stabilization: float | None, factor: float = STABILIZATION_FACTOR):
    e = basis.energy_rotated
    lam, s = flow.lam, flow.sigma

    def T(c: np.ndarray) -> np.ndarray:
        psi = basis.matrix @ c
        dens = np.abs(psi) ** (2 * s)
        nl = basis._analysis @ (lam * dens * psi) if lam else np.zeros_like(c)
        mu = float(np.vdot(c, e * c + nl).real / np.vdot(c, c).real)
        a = max(factor * lam * float(dens.max()), mu) if stabilization is None else stabilization
        z = -(e - mu + a) * dt
        new = np.exp(z) * c - dt * phi1(z) * (nl - a * c)
        return new * math.sqrt(target_mass / np.vdot(new, new).real)

    return T


def _as_real(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, c.imag])


def _as_complex(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def normalized_gradient_flow(params: ModelParams, target_mass: float, seed: SpectralCoeffs,
                             dt_flow: float = 1e-2, tol: float = 1e-8, max_iter: int = 100_000,
                             stabilization: float | None = 0.0, anderson: int = 0,
                             core_threshold: float = 0.3, count_vortices: bool = True) -> GroundStateResult:
    """Imaginary-time (theta = 0) flow with renormalization to ``target_mass`` after each step.

    One step T is exponential Euler for
    d phi/dt = -(H_Omega - mu_k + a) phi - (lambda |phi|^{2 sigma} - a) phi,
    with mu_k the current chemical potential and a a stabilization shift
    (``None`` picks max(2 lambda max|phi|^{2 sigma}, mu_k) per step,
    which keeps large steps stable). Stationary states are exact fixed points
    of T for every a. With ``anderson`` > 0 the fixed-point iteration of T is
    Anderson-accelerated with that memory depth. Stops when
    ||T(phi_k) - phi_k|| < tol * dt_flow.
    """
    require_valid(params)
    if params.lam < 0 or not target_mass > 0:
        raise ValueError("needs lambda >= 0 and target_mass > 0")
    if not dt_flow > 0:
        raise ValueError("dt_flow must be positive")
    if anderson < 0:
        raise ValueError("anderson must be >= 0")
    flow = params.replace(theta_d=0.0)
    basis = seed.basis
    T = _flow_map(basis, flow, dt_flow, target_mass, stabilization)
    c = seed.values * math.sqrt(target_mass / mass(seed))
    history = [energy(SpectralCoeffs(basis, c), flow).total]
    dX: list[np.ndarray] = []
    dF: list[np.ndarray] = []
    prev_x = prev_f = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        tc = T(c)
        step_size = float(np.linalg.norm(tc - c))
        if step_size < tol * dt_flow:
            c = tc
            converged = True
            break
        if anderson == 0:
            c = tc
        else:
            x, f = _as_real(c), _as_real(tc - c)
            if prev_x is not None:
                dX.append(x - prev_x)
                dF.append(f - prev_f)
                if len(dX) > anderson:
                    dX.pop(0)
                    dF.pop(0)
            prev_x, prev_f = x, f
            if dX:
                Fm = np.column_stack(dF)
                g, *_ = np.linalg.lstsq(Fm, f, rcond=None)
                x_new = x + f - (np.column_stack(dX) + Fm) @ g
                cand = _as_complex(x_new)
                c = cand * math.sqrt(target_mass / np.vdot(cand, cand).real)
            else:
                c = tc
        if it % 50 == 0:
            history.append(energy(SpectralCoeffs(basis, c), flow).total)
    final = SpectralCoeffs(basis, c)
    mu = chemical_potential(final, flow)
    en = energy(final, flow)
    history.append(en.total)
    res = stationarity_residual(final, mu, flow)
    if not converged:
        log.warning("normalized gradient flow did not converge in %d iterations (residual %.3e)", it, res)
    vc = vortex_count(final, core_threshold) if count_vortices and basis.dim == 2 else None
    return GroundStateResult(final, mu, en, res, it, vc, converged, history)


# -- vortices --------------------------------------------------------------------------------


def _wrapped(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2 * np.pi) - np.pi


def cloud_radius(coeffs: SpectralCoeffs, fraction: float = 0.05, n_r: int = 200, n_phi: int = 64) -> float:
    """Largest radius where the azimuthally averaged density exceeds ``fraction`` of its peak."""
    b = coeffs.basis
    r_max = math.sqrt((2 * b.truncation.max_level + 4) / b.params.omega)
    r = np.linspace(0, r_max, n_r)
    ph = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    rr, pp = np.meshgrid(r, ph, indexing="ij")
    pts = np.column_stack([(rr * np.cos(pp)).ravel(), (rr * np.sin(pp)).ravel()])
    dens = (np.abs(b.evaluate(pts) @ coeffs.values) ** 2).reshape(n_r, n_phi).mean(axis=1)
    inside = np.nonzero(dens >= fraction * dens.max())[0]
    return float(r[inside[-1]]) if inside.size else 0.0


def vortex_count(coeffs: SpectralCoeffs, core_threshold: float = 0.3, n_grid: int = 64,
                 subdivisions: int = 8) -> int:
    """Total |winding| over grid plaquettes inside the cloud whose corners dip below
    ``core_threshold * max|psi|``.

    The grid is offset so the origin is a plaquette centre. Candidate plaquettes
    are re-examined with each edge subdivided, which resolves windings above 1.
    """
    b = coeffs.basis
    if b.dim != 2:
        raise ValueError("vortex counting is only supported for d = 2")
    R = cloud_radius(coeffs)
    if R == 0.0:
        return 0
    n = n_grid | 1  # odd plaquette count puts the origin at a plaquette centre
    h = 2 * R / n
    ax = (np.arange(n + 1) - n / 2) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    psi = (b.evaluate(np.column_stack([X.ravel(), Y.ravel()])) @ coeffs.values).reshape(X.shape)
    amp = np.abs(psi)
    peak = amp.max()
    corners = np.stack([amp[:-1, :-1], amp[1:, :-1], amp[1:, 1:], amp[:-1, 1:]])
    centres = np.hypot(0.5 * (X[:-1, :-1] + X[1:, 1:]), 0.5 * (Y[:-1, :-1] + Y[1:, 1:]))
    cand = np.argwhere((corners.min(axis=0) < core_threshold * peak) & (centres < R))
    total = 0
    s = subdivisions
    frac = np.arange(s) / s
    for i, j in cand:
        x0, y0 = ax[i], ax[j]
        # counter-clockwise loop around the plaquette
        path = np.concatenate([
            np.column_stack([x0 + frac * h, np.full(s, y0)]),
            np.column_stack([np.full(s, x0 + h), y0 + frac * h]),
            np.column_stack([x0 + h - frac * h, np.full(s, y0 + h)]),
            np.column_stack([np.full(s, x0), y0 + h - frac * h]),
        ])
        vals = b.evaluate(path) @ coeffs.values
        ang = np.angle(vals)
        winding = np.sum(_wrapped(np.diff(np.append(ang, ang[0])))) / (2 * np.pi)
        total += abs(int(round(winding)))
    return total
