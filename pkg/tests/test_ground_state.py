import math

import numpy as np
import pytest

from rgl.basis import SpectralCoeffs, build_basis
from rgl.dynamics import IntegratorConfig, simulate
from rgl.functionals import energy, mass
from rgl.ground_state import (
    _flow_map,
    chemical_potential,
    normalized_gradient_flow,
    parse_seed,
    seed_gaussian,
    seed_mode,
    stationarity_residual,
    vortex_count,
)
from rgl.params import ModelParams, Truncation


@pytest.mark.parametrize("dim", [2, 3])
def test_linear_flow_finds_gaussian(dim):
    p = ModelParams(dim=dim)
    b = build_basis(p, Truncation(4 if dim == 3 else 6))
    res = normalized_gradient_flow(p, 2.0, seed_gaussian(b, 0.7), dt_flow=0.5, stabilization=None)
    assert res.converged
    assert res.chemical_potential == pytest.approx(dim / 2, abs=1e-8)
    assert abs(abs(res.coeffs.values[0]) ** 2 - 2.0) < 1e-8
    assert abs(mass(res.coeffs) - 2.0) < 1e-12
    assert res.residual < 1e-8
    if dim == 3:
        assert res.vortex_count is None


def test_linear_flow_stays_in_sector():
    p = ModelParams(Omega=0.5)
    b = build_basis(p, Truncation(6))
    seed = SpectralCoeffs(b, b.unit(b.index(0, 1)).values + 0.3 * b.unit(b.index(1, 1)).values)
    res = normalized_gradient_flow(p, 1.0, seed, dt_flow=0.5, stabilization=None)
    assert res.converged
    assert res.chemical_potential == pytest.approx(2 - 0.5, abs=1e-8)
    assert abs(abs(res.coeffs.values[b.index(0, 1)]) - 1) < 1e-8
    assert np.abs(res.coeffs.values[b.m != 1]).max() == 0
    assert res.vortex_count == 1


def test_strong_rotation_breaks_symmetry():
    p = ModelParams(lam=50.0, Omega=0.9)
    b = build_basis(p, Truncation(16))
    res = normalized_gradient_flow(p, 1.0, seed_gaussian(b, 0.5), dt_flow=3.0, stabilization=None,
                                   tol=1e-8, max_iter=40_000)
    assert res.converged and res.residual < 1e-6
    assert res.vortex_count >= 1
    assert abs(mass(res.coeffs) - 1.0) < 1e-12


@pytest.fixture(scope="module")
def nonlinear_state():
    p = ModelParams(lam=5.0, Omega=0.5, sigma=1.0)
    b = build_basis(p, Truncation(8))
    res = normalized_gradient_flow(p, 1.0, seed_gaussian(b, 0.3), dt_flow=1.0, stabilization=None, tol=1e-9)
    assert res.converged
    return p, res


def test_flow_energy_monotone():
    p = ModelParams(lam=5.0, Omega=0.5, sigma=1.0)
    b = build_basis(p, Truncation(8))
    T = _flow_map(b, p, 1e-2, 1.0, 0.0)
    c = seed_gaussian(b, 0.5).values
    E = [energy(SpectralCoeffs(b, c), p).total]
    for _ in range(300):
        c = T(c)
        E.append(energy(SpectralCoeffs(b, c), p).total)
    assert np.diff(E).max() <= 1e-10


def test_lagrange_consistency(nonlinear_state):
    p, res = nonlinear_state
    mu = res.chemical_potential
    assert mu == pytest.approx(chemical_potential(res.coeffs, p))
    r0 = stationarity_residual(res.coeffs, mu, p)
    assert r0 < 1e-8
    norm = math.sqrt(mass(res.coeffs))
    for shift in (-0.1, 0.1):
        assert stationarity_residual(res.coeffs, mu + shift, p) >= r0 + 0.05 * norm


def test_converged_state_is_stationary_under_dynamics(nonlinear_state):
    p, res = nonlinear_state
    q = p.replace(theta_d=0.0, mu=res.chemical_potential)
    sim = simulate(q, res.coeffs, IntegratorConfig(dt=1e-2), 1.0)
    dist = np.linalg.norm(sim.snapshot_array() - res.coeffs.values, axis=1)
    assert dist.max() < 10 * 1e-9


def test_anderson_variant_agrees(nonlinear_state):
    p, res = nonlinear_state
    b = res.coeffs.basis
    alt = normalized_gradient_flow(p, 1.0, seed_gaussian(b, 0.3), dt_flow=1.0, stabilization=None,
                                   tol=1e-9, anderson=3)
    assert alt.converged
    assert alt.chemical_potential == pytest.approx(res.chemical_potential, abs=1e-7)


def test_residual_examples(basis2):
    p = basis2.params
    k = basis2.index(1, -1)
    c = basis2.unit(k)
    assert stationarity_residual(c, basis2.energy_rotated[k], p) < 1e-10
    pert = SpectralCoeffs(basis2, c.values + 0.1 * basis2.unit(basis2.index(1, 0)).values)
    assert stationarity_residual(pert, basis2.energy_rotated[k], p) > 0.05


def test_max_iter_returns_best_so_far(basis2):
    p = basis2.params.replace(lam=1.0)
    res = normalized_gradient_flow(p, 1.0, seed_gaussian(basis2, 1.0), max_iter=3)
    assert not res.converged and res.iterations == 3
    assert abs(mass(res.coeffs) - 1.0) < 1e-12


def test_flow_argument_errors(basis2):
    p = basis2.params
    with pytest.raises(ValueError):
        normalized_gradient_flow(p, 0.0, basis2.unit(0))
    with pytest.raises(ValueError):
        normalized_gradient_flow(p.replace(lam=-1.0), 1.0, basis2.unit(0))
    with pytest.raises(ValueError):
        normalized_gradient_flow(p, 1.0, basis2.unit(0), dt_flow=0.0)


@pytest.mark.parametrize("nr,m,expected", [(0, 0, 0), (0, 1, 1), (0, 3, 3), (0, -2, 2)])
def test_vortex_count_single_modes(basis2, nr, m, expected):
    assert vortex_count(seed_mode(basis2, nr, m)) == expected


def test_vortex_count_ground_gaussian(basis2):
    assert vortex_count(seed_gaussian(basis2, 0.0)) == 0
    assert vortex_count(seed_gaussian(basis2, 0.8)) == 0


def test_vortex_count_rejects_3d(basis3):
    with pytest.raises(ValueError):
        vortex_count(basis3.unit(0))


def test_parse_seed(basis2):
    assert np.array_equal(parse_seed("mode:0,2", basis2).values, basis2.unit(basis2.index(0, 2)).values)
    a = parse_seed("random:3", basis2)
    assert np.array_equal(a.values, parse_seed("random:3", basis2).values)
    assert mass(a) == pytest.approx(1.0)
    assert mass(parse_seed("gaussian-offset:0.4", basis2)) == pytest.approx(1.0)
    assert mass(parse_seed("gaussian", basis2)) == pytest.approx(1.0)
    for bad in ("mode:0", "mode:99,0", "wave:1", "random:x"):
        with pytest.raises(ValueError):
            parse_seed(bad, basis2)
