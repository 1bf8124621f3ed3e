import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rgl.basis import (
    SpectralCoeffs,
    WaveField,
    analyze,
    apply_hamiltonian,
    build_basis,
    degeneracy,
    enumerate_modes,
    random_band_limited,
    synthesize,
)
from rgl.params import ModelParams, Truncation


@pytest.mark.parametrize("level,dim,expected", [(1, 3, 1), (3, 2, 3), (3, 3, 6), (8, 2, 8), (5, 3, 15)])
def test_degeneracy(level, dim, expected):
    assert degeneracy(level, dim) == expected


def test_small_2d_basis():
    b = build_basis(ModelParams(), Truncation(3))
    assert b.n_modes == 6
    assert sorted(b.energy_unrotated) == [1, 2, 2, 3, 3, 3]


def test_small_3d_basis():
    b = build_basis(ModelParams(dim=3), Truncation(2))
    assert sorted(b.energy_unrotated) == [1.5, 2.5, 2.5, 2.5]


def test_rotated_energy_of_vortex_mode():
    b = build_basis(ModelParams(Omega=0.5), Truncation(3))
    assert b.energy_rotated[b.index(0, 1)] == 1.5
    assert b.energy_rotated[b.index(0, -1)] == 2.5


@pytest.mark.parametrize("dim,levels", [(2, 10), (3, 6)])
def test_level_multiplicities(dim, levels):
    modes = enumerate_modes(ModelParams(dim=dim, omega=1.3), levels)
    counts = np.bincount([md.level for md in modes])[1:]
    assert list(counts) == [degeneracy(n, dim) for n in range(1, levels + 1)]
    for md in modes:
        assert md.energy_unrotated == pytest.approx(1.3 * (dim / 2 + md.level - 1))


def test_ordering_and_tie_break():
    modes = enumerate_modes(ModelParams(Omega=0.0), 4)
    keys = [(md.energy_rotated, abs(md.angular_index), md.angular_index, md.radial_index) for md in modes]
    assert keys == sorted(keys)
    # the m = -1 and m = +1 pair at level 2 is ordered by m
    assert [md.angular_index for md in modes[1:3]] == [-1, 1]


@pytest.mark.parametrize("dim,level", [(2, 12), (3, 8)])
def test_gram_is_identity(dim, level):
    b = build_basis(ModelParams(dim=dim, omega=0.8, Omega=0.2), Truncation(level))
    assert np.abs(b.gram() - np.eye(b.n_modes)).max() < 1e-10


def test_ground_mode_is_gaussian(basis2):
    w = basis2.params.omega
    r2 = np.sum(basis2.quad_nodes**2, axis=1)
    psi = synthesize(basis2.unit(0)).values
    assert np.allclose(psi, math.sqrt(w / math.pi) * np.exp(-w * r2 / 2), atol=1e-13)


def test_zero_and_unit_transforms(basis2):
    assert not np.any(synthesize(basis2.zeros()).values)
    chi2 = synthesize(basis2.unit(2))
    assert np.allclose(analyze(chi2).values, basis2.unit(2).values, atol=1e-12)
    both = WaveField(basis2, synthesize(basis2.unit(0)).values + synthesize(basis2.unit(2)).values)
    expected = np.zeros(basis2.n_modes)
    expected[[0, 2]] = 1
    assert np.allclose(analyze(both).values, expected, atol=1e-12)


def test_length_checks(basis2):
    with pytest.raises(ValueError):
        SpectralCoeffs(basis2, np.zeros(3))
    with pytest.raises(ValueError):
        WaveField(basis2, np.zeros(5))
    with pytest.raises(ValueError):
        basis2.evaluate(np.zeros((2, 3)))


@given(st.integers(0, 2**32 - 1))
def test_round_trip(basis3, seed):
    c = random_band_limited(basis3, np.random.default_rng(seed))
    assert np.abs(analyze(synthesize(c)).values - c.values).max() < 1e-10


def test_analysis_of_gaussian_matches_dense_quadrature():
    b = build_basis(ModelParams(omega=1.2), Truncation(6))
    a = np.array([0.4, -0.3])
    h = 0.04
    ax = np.arange(-8, 8 + h / 2, h)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def f(p):
        return np.exp(-0.6 * np.sum((p - a) ** 2, axis=1)) * np.exp(0.5j * p[:, 0])

    oracle = (b.evaluate(pts).conj() * f(pts)[:, None]).sum(axis=0) * h * h
    coeffs = analyze(WaveField(b, f(b.quad_nodes))).values
    assert np.abs(coeffs - oracle).max() < 1e-8


def test_apply_hamiltonian(basis2):
    assert np.allclose(apply_hamiltonian(basis2.unit(0)).values, basis2.energy_rotated[0] * basis2.unit(0).values)
    b = build_basis(ModelParams(), Truncation(3))
    assert apply_hamiltonian(b.unit(0)).values[0] == 1.0
    c = np.arange(b.n_modes) + 1j
    assert np.allclose(apply_hamiltonian(SpectralCoeffs(b, c)).values, b.energy_rotated * c)


def _fd_hamiltonian(basis, k, centre, h=1e-3):
    """-Delta/2 + omega^2|x|^2/2 - Omega L applied to mode k at a point, by central differences."""
    p = basis.params
    d = basis.dim
    f = lambda x: basis.evaluate(np.atleast_2d(x))[0, k]  # noqa: E731
    x = np.asarray(centre, dtype=float)
    f0 = f(x)
    lap = 0.0
    grad = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        lap += (fp - 2 * f0 + fm) / h**2
        grad.append((fp - fm) / (2 * h))
    L = -1j * (x[0] * grad[1] - x[1] * grad[0])
    return -0.5 * lap + 0.5 * p.omega**2 * np.dot(x, x) * f0 - p.Omega * L, f0


@pytest.mark.parametrize("mode", [(0, 0), (1, 2), (2, -1)])
def test_eigen_residual_2d(basis2, mode):
    k = basis2.index(*mode)
    for centre in ([0.3, -0.5], [1.1, 0.7], [-0.4, 1.6]):
        hf, f0 = _fd_hamiltonian(basis2, k, centre)
        assert abs(hf - basis2.energy_rotated[k] * f0) < 1e-5


def test_eigen_residual_3d(basis3):
    k = basis3.index(0, 1, 2)
    hf, f0 = _fd_hamiltonian(basis3, k, [0.5, 0.2, -0.6])
    assert abs(hf - basis3.energy_rotated[k] * f0) < 1e-5


@given(st.floats(0.2, 5), st.floats(-0.999, 0.999), st.sampled_from([2, 3]), st.integers(1, 10))
def test_spectrum_floor(w, frac, dim, level):
    modes = enumerate_modes(ModelParams(omega=w, Omega=frac * w, dim=dim), level)
    assert min(md.energy_rotated for md in modes) >= w * dim / 2 - 1e-12


@pytest.mark.parametrize("dim,level", [(2, 8), (2, 20), (3, 8)])
def test_weyl_growth(dim, level):
    e = np.sort([md.energy_unrotated for md in enumerate_modes(ModelParams(dim=dim), level)])
    k = np.arange(1, e.size + 1)
    ratio = e / k ** (1 / dim)
    assert 0.3 <= ratio.min() and ratio.max() <= 3.0


@pytest.mark.parametrize("dim", [2, 3])
def test_position_moment_matches_quadrature(dim):
    b = build_basis(ModelParams(dim=dim, omega=0.7), Truncation(5))
    r2 = np.sum(b.quad_nodes**2, axis=1)
    quad = b._analysis @ (b.params.omega * r2[:, None] * b.matrix)
    assert np.abs(quad - b.position_moment).max() < 1e-11
