import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rgl.params import ModelParams, Truncation, require_valid, sigma_bound, validate, validate_truncation


def test_sigma_bound():
    assert sigma_bound(2) == math.inf
    assert sigma_bound(3) == 1.5
    assert sigma_bound(3) > 1
    with pytest.raises(ValueError):
        sigma_bound(4)


def test_reference_parameters_are_valid():
    report = validate(ModelParams(omega=1, Omega=0.5, theta_d=0, lam=1, sigma=1, mu=1, dim=2))
    assert report.ok and not report.violations
    assert str(report) == "valid"


def test_trap_must_dominate_rotation():
    report = validate(ModelParams(Omega=1.0))
    assert "omega > |Omega|" in report.violations


def test_sigma_upper_bound_in_3d():
    report = validate(ModelParams(dim=3, sigma=1.6))
    assert "sigma < d/(2(d-2)) = 1.5" in report.violations


@pytest.mark.parametrize("theta", [math.pi / 2, -math.pi / 2, 2.0])
def test_boundary_angles_rejected(theta):
    assert not validate(ModelParams(theta_d=theta)).ok


def test_several_violations_are_all_listed():
    report = validate(ModelParams(omega=-1, lam=-1, sigma=0, dim=4))
    assert len(report.violations) >= 4


def test_require_valid_raises():
    with pytest.raises(ValueError, match="omega > |Omega|"):
        require_valid(ModelParams(Omega=2))


def test_derived_weights():
    p = ModelParams(theta_d=0.7)
    # -e^{i theta} = i beta - gamma
    lhs = -complex(math.cos(0.7), math.sin(0.7))
    assert abs(lhs - complex(-p.gamma, p.beta)) < 1e-15
    assert abs(p.eta - complex(math.cos(0.7), -math.sin(0.7))) < 1e-15
    assert p.epsilon == 0.0


def test_truncation_defaults():
    t = Truncation(5).resolved(3)
    assert (t.n_radial_quad, t.n_angular_quad, t.n_axial_quad) == (26, 21, 26)
    assert Truncation(5).resolved(2).n_axial_quad == 0
    assert not validate_truncation(Truncation(5, n_angular_quad=10), 2).ok
    assert not validate_truncation(Truncation(0), 2).ok


finite_or_not = st.one_of(st.floats(allow_nan=True, allow_infinity=True), st.integers(-5, 5))


@given(finite_or_not, finite_or_not, finite_or_not, finite_or_not, finite_or_not, finite_or_not,
       st.integers(-1, 5))
def test_validate_is_total(w, W, th, lam, s, mu, d):
    report = validate(ModelParams(w, W, th, lam, s, mu, d))
    assert isinstance(report.violations, list)


@given(st.floats(0.1, 10), st.floats(0, 0.99), st.floats(-1.5, 1.5), st.floats(0, 100), st.floats(0.1, 1.4),
       st.sampled_from([2, 3]))
def test_valid_params_have_positive_gamma(w, frac, th, lam, s, d):
    p = ModelParams(omega=w, Omega=frac * w, theta_d=th, lam=lam, sigma=s, dim=d)
    assert validate(p).ok
    assert p.gamma > 0
    assert abs(p.gamma**2 + p.beta**2 - 1) < 1e-14
