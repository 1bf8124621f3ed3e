import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rgl.attractor import mass_upper_bound
from rgl.basis import SpectralCoeffs, build_basis, random_band_limited
from rgl.dynamics import (
    BlowUpError,
    IntegratorConfig,
    SimState,
    nonlinear_term,
    phi1,
    phi2,
    picard_iterate,
    simulate,
    step,
)
from rgl.functionals import free_energy
from rgl.ground_state import seed_gaussian
from rgl.params import ModelParams, Truncation
from rgl.propagator import propagate_modes

zs = st.complex_numbers(max_magnitude=30, allow_nan=False, allow_infinity=False)


@given(zs)
def test_phi_functions_against_mpmath(z):
    # enough digits to survive the cancellation in e^z - 1 - z for tiny z
    dps = 40 + (int(-2 * math.log10(abs(z))) if 0 < abs(z) < 1 else 0)
    with mpmath.workdps(dps):
        zz = mpmath.mpc(z.real, z.imag)
        if zz == 0:
            r1, r2 = mpmath.mpf(1), mpmath.mpf(0.5)
        else:
            r1 = mpmath.expm1(zz) / zz
            r2 = (mpmath.expm1(zz) - zz) / zz**2
        r1, r2 = complex(r1), complex(r2)
    assert abs(phi1(np.array([z]))[0] - r1) <= 1e-13 * max(1, abs(r1))
    assert abs(phi2(np.array([z]))[0] - r2) <= 1e-13 * max(1, abs(r2))


@pytest.mark.parametrize("z", [1e-12, 3e-5, 1e-4, 9e-3, 1.1e-2, -0.5 + 2j])
def test_phi_branches_agree_near_switch(z):
    with mpmath.workdps(40):
        zz = mpmath.mpc(z.real if isinstance(z, complex) else z, z.imag if isinstance(z, complex) else 0)
        r1 = complex(mpmath.expm1(zz) / zz)
        r2 = complex((mpmath.expm1(zz) - zz) / zz**2)
    assert abs(phi1(np.array([z]))[0] - r1) < 1e-15
    assert abs(phi2(np.array([z]))[0] - r2) < 1e-15


def test_nonlinear_term_examples(basis2):
    p = basis2.params.replace(lam=1.0, sigma=1.0)
    assert not np.any(nonlinear_term(basis2.unit(0), basis2.params).values)
    a = 0.8 + 0.3j
    out = nonlinear_term(SpectralCoeffs(basis2, a * basis2.unit(0).values), p).values
    expected = abs(a) ** 2 * a * p.omega / (2 * math.pi)
    assert abs(out[0] - expected) < 1e-13
    # radially symmetric input stays in the m = 0 sector
    assert np.abs(out[basis2.m != 0]).max() < 1e-14


def test_nonlinear_term_is_exact_projection_for_cubic(rng):
    p = ModelParams(lam=2.0, sigma=1.0)
    b = build_basis(p, Truncation(6))
    big = build_basis(p, Truncation(6, n_radial_quad=60, n_angular_quad=91))
    c = random_band_limited(b, rng)
    small = nonlinear_term(c, p).values
    ref = nonlinear_term(SpectralCoeffs(big, c.values), p).values
    assert np.abs(small - ref).max() < 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("scheme", ["ETD1", "ETDRK2"])
def test_linear_step_is_exact(basis2, rng, scheme):
    p = basis2.params.replace(theta_d=0.7, mu=0.4)
    c = random_band_limited(basis2, rng)
    out = step(SimState(0.0, c, p), IntegratorConfig(dt=0.37, scheme=scheme))
    assert out.t == 0.37
    assert np.abs(out.coeffs.values - propagate_modes(c, 0.37, p).values).max() < 1e-15


@pytest.mark.parametrize("dt", [0.013, 0.25])
def test_linear_trajectory_matches_propagator(basis2, rng, dt):
    p = basis2.params.replace(theta_d=0.2, mu=0.5)
    c = random_band_limited(basis2, rng)
    res = simulate(p, c, IntegratorConfig(dt=dt), 1.0)
    assert res.final.t == 1.0
    for t, snap in zip(res.snapshot_times, res.snapshots):
        assert np.abs(snap - propagate_modes(c, t, p).values).max() < 1e-13


def _final(p, c, dt, scheme, T=1.0):
    return simulate(p, c, IntegratorConfig(dt=dt, scheme=scheme), T, keep_snapshots=False).final.coeffs.values


@pytest.mark.parametrize("scheme,order", [("ETDRK2", 2), ("ETD1", 1)])
def test_convergence_order(scheme, order):
    p = ModelParams(lam=1.0, sigma=1.0, theta_d=0.3, Omega=0.2)
    b = build_basis(p, Truncation(6))
    c = seed_gaussian(b, 0.5)
    dts = [0.04, 0.02, 0.01]
    ref = _final(p, c, dts[-1] / 16, scheme)
    errs = [np.linalg.norm(_final(p, c, dt, scheme) - ref) for dt in dts]
    rates = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    assert min(rates) > order - 0.25


def test_free_energy_monotone_for_gradient_flow():
    p = ModelParams(lam=1.0, sigma=1.0, mu=1.5, theta_d=0.0)
    b = build_basis(p, Truncation(6))
    c = random_band_limited(b, np.random.default_rng(4), mass=2.0)
    for dt in (1e-2, 5e-3):
        F = simulate(p, c, IntegratorConfig(dt=dt), 1.0).series.column("free_energy")
        assert np.diff(F).max() <= 10 * dt**3


def test_ground_mode_mass_decay():
    p = ModelParams()
    b = build_basis(p, Truncation(4))
    res = simulate(p, b.unit(0), IntegratorConfig(dt=0.01), 2.0)
    t = res.series.column("times")
    assert np.abs(res.series.column("mass") - np.exp(-2 * t)).max() < 1e-10


def test_mass_below_gronwall_envelope():
    p = ModelParams(lam=1.0, sigma=1.0, mu=2.0, theta_d=0.4)
    b = build_basis(p, Truncation(6))
    c = random_band_limited(b, np.random.default_rng(8), mass=1.0)
    res = simulate(p, c, IntegratorConfig(dt=5e-3), 2.0)
    t, M = res.series.column("times"), res.series.column("mass")
    assert np.all(M <= mass_upper_bound(t, M[0], p))


def test_zero_is_a_fixed_point(basis2):
    p = basis2.params.replace(lam=3.0, mu=5.0)
    res = simulate(p, basis2.zeros(), IntegratorConfig(dt=0.05), 1.0)
    assert not np.any(res.snapshot_array())


def test_simulation_is_deterministic():
    p = ModelParams(lam=1.0, sigma=0.7, mu=1.0, theta_d=0.3)
    b = build_basis(p, Truncation(5))
    c = random_band_limited(b, np.random.default_rng(0))
    a = simulate(p, c, IntegratorConfig(dt=0.01), 0.3).snapshot_array()
    d = simulate(p, c, IntegratorConfig(dt=0.01), 0.3).snapshot_array()
    assert np.array_equal(a, d)


def test_snapshot_stride_and_partial_last_step(basis2, rng):
    c = random_band_limited(basis2, rng)
    res = simulate(basis2.params, c, IntegratorConfig(dt=0.1, snapshot_stride=3), 1.05)
    assert res.snapshot_times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.05])
    assert len(res.series) == 5


def test_blow_up_is_reported():
    p = ModelParams(lam=50.0, sigma=1.0, theta_d=1.5)
    b = build_basis(p, Truncation(6))
    c = random_band_limited(b, np.random.default_rng(0), mass=30.0)
    res = simulate(p, c, IntegratorConfig(dt=1.0, scheme="ETD1"), 200.0)
    assert res.aborted and "blow-up" in res.error
    assert res.final is None and len(res.series) >= 1
    with pytest.raises(BlowUpError):
        s = SimState(0.0, c, p)
        for _ in range(200):
            s = step(s, IntegratorConfig(dt=1.0, scheme="ETD1"))


def test_config_validation(basis2):
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="RK4")
    with pytest.raises(ValueError):
        IntegratorConfig(snapshot_stride=0)
    with pytest.raises(ValueError):
        SimState(-1.0, basis2.zeros(), basis2.params)
    cfg = IntegratorConfig(dt=1.0)
    assert cfg.exceeds_recommended(basis2, basis2.params)
    assert not IntegratorConfig(dt=1e-3).exceeds_recommended(basis2, basis2.params)


def test_picard_linear_converges_immediately(basis2, rng):
    res = picard_iterate(basis2.params, random_band_limited(basis2, rng), 0.05, 3)
    assert res.distances[1] == 0 and res.contraction_estimate == 0
    with pytest.raises(ValueError):
        picard_iterate(basis2.params, basis2.zeros(), 0.05, 1)


def test_picard_contracts_and_matches_integrator():
    p = ModelParams(lam=1.0, sigma=1.0, theta_d=0.3)
    b = build_basis(p, Truncation(6))
    c = seed_gaussian(b, 0.5)
    res = picard_iterate(p, c, 0.05, 10)
    assert res.contraction_estimate < 1 and not res.diverged
    ref = simulate(p, c, IntegratorConfig(dt=1e-4), 0.05, keep_snapshots=False).final.coeffs.values
    assert np.linalg.norm(res.fixed_point[-1] - ref) < 1e-5
    bigger = picard_iterate(p, SpectralCoeffs(b, 2 * c.values), 0.05, 10)
    assert bigger.contraction_estimate > res.contraction_estimate
