"""Joint eigenbasis of the rotating oscillator and the angular momentum.

In 2D the modes are Laguerre-Gauss functions

    chi_{n,m}(r, phi) = N * (omega r^2)^{|m|/2} L_n^{|m|}(omega r^2) exp(-omega r^2 / 2) exp(i m phi)

with oscillator energy omega (2n + |m| + 1) and L-eigenvalue m. In 3D they are
multiplied by Hermite functions of x3. Quadrature is Gauss-Laguerre in
s = omega r^2, uniform in phi and Gauss-Hermite in x3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import eval_genlaguerre, gammaln, roots_hermite, roots_laguerre

from rgl.params import ModelParams, Truncation, require_valid, validate_truncation


def degeneracy(level: int, dim: int) -> int:
    """Multiplicity of the oscillator level ``level`` (1-based)."""
    if level < 1:
        raise ValueError("level must be >= 1")
    return math.comb(dim + level - 2, level - 1)


@dataclass(frozen=True)
class EigenMode:
    radial_index: int
    angular_index: int
    axial_index: int
    energy_unrotated: float
    energy_rotated: float

    @property
    def level(self) -> int:
        return 2 * self.radial_index + abs(self.angular_index) + self.axial_index + 1


def enumerate_modes(params: ModelParams, max_level: int) -> list[EigenMode]:
    """All modes up to ``max_level`` in the canonical order.

    Ordering is ascending rotated energy, ties broken by (|m|, m, n_r, n_z).
    """
    w, W, d = params.omega, params.Omega, params.dim
    modes = []
    for lvl in range(1, max_level + 1):
        q = lvl - 1
        zs = range(q + 1) if d == 3 else (0,)
        for nz in zs:
            rest = q - nz
            for am in range(rest % 2, rest + 1, 2):
                nr = (rest - am) // 2
                for m in ({0} if am == 0 else (-am, am)):
                    e0 = w * (2 * nr + am + nz + d / 2)
                    modes.append(EigenMode(nr, m, nz, e0, e0 - W * m))

    def key(md: EigenMode):
        return (round(md.energy_rotated, 10), abs(md.angular_index), md.angular_index,
                md.radial_index, md.axial_index)

    return sorted(modes, key=key)


def _radial_values(n: np.ndarray, a: np.ndarray, s: np.ndarray, omega: float) -> np.ndarray:
    """Normalized radial factors, shape (len(s), len(n)), with the 2D measure folded in."""
    s = np.asarray(s, dtype=float)[:, None]
    n = np.asarray(n)[None, :]
    a = np.asarray(a)[None, :]
    log_norm = 0.5 * (math.log(omega / math.pi) + gammaln(n + 1) - gammaln(n + a + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_s = np.log(s)
        log_env = np.where(a > 0, 0.5 * a * log_s, 0.0) - 0.5 * s
    return eval_genlaguerre(n, a, s) * np.exp(log_norm + log_env)


def _hermite_functions(nmax: int, z: np.ndarray, omega: float) -> np.ndarray:
    """Normalized 1D oscillator eigenfunctions h_0..h_nmax at z, shape (len(z), nmax+1)."""
    u = math.sqrt(omega) * np.asarray(z, dtype=float)
    out = np.empty((u.size, nmax + 1))
    out[:, 0] = (omega / math.pi) ** 0.25 * np.exp(-0.5 * u * u)
    if nmax >= 1:
        out[:, 1] = math.sqrt(2.0) * u * out[:, 0]
    for k in range(2, nmax + 1):
        out[:, k] = math.sqrt(2.0 / k) * u * out[:, k - 1] - math.sqrt((k - 1) / k) * out[:, k - 2]
    return out


class SpectralBasis:
    """Truncated joint eigenbasis with its quadrature grid.

    Grid values are flattened in C order over (radial, angular[, axial]).
    """

    def __init__(self, params: ModelParams, trunc: Truncation):
        require_valid(params)
        report = validate_truncation(trunc, params.dim)
        if not report.ok:
            raise ValueError(f"invalid truncation: {report}")
        self.params = params
        self.truncation = trunc.resolved(params.dim)
        self.dim = params.dim
        self.modes = enumerate_modes(params, self.truncation.max_level)
        if not self.modes:
            raise ValueError("truncation retains no modes")

        self.n_r = np.array([md.radial_index for md in self.modes])
        self.m = np.array([md.angular_index for md in self.modes])
        self.n_z = np.array([md.axial_index for md in self.modes])
        self.energy_unrotated = np.array([md.energy_unrotated for md in self.modes])
        self.energy_rotated = np.array([md.energy_rotated for md in self.modes])

        t = self.truncation
        w = params.omega
        s, ws = roots_laguerre(t.n_radial_quad)
        phi = 2 * np.pi * np.arange(t.n_angular_quad) / t.n_angular_quad
        self.s_nodes = s
        self.r_nodes = np.sqrt(s / w)
        self.phi_nodes = phi
        # dx = ds dphi / (2 omega); Gauss-Laguerre carries exp(-s) in its weights
        w_rad = ws * np.exp(s) / (2 * w)
        w_ang = np.full(phi.size, 2 * np.pi / phi.size)
        if self.dim == 3:
            u, wu = roots_hermite(t.n_axial_quad)
            self.z_nodes = u / math.sqrt(w)
            w_ax = wu * np.exp(u * u) / math.sqrt(w)
            self.grid_shape = (s.size, phi.size, u.size)
            self.quad_weights = np.einsum("i,j,k->ijk", w_rad, w_ang, w_ax).ravel()
        else:
            self.z_nodes = None
            self.grid_shape = (s.size, phi.size)
            self.quad_weights = np.outer(w_rad, w_ang).ravel()

        self.matrix = self._evaluate_on_grid()
        # absorb floating-point error in the analytic normalization
        norms = np.sqrt(np.einsum("k,km->m", self.quad_weights, np.abs(self.matrix) ** 2))
        self._renorm = 1.0 / norms
        self.matrix *= self._renorm
        self._analysis = (self.matrix.conj() * self.quad_weights[:, None]).T.copy()

    # -- construction ---------------------------------------------------------------

    def _evaluate_on_grid(self) -> np.ndarray:
        rad = _radial_values(self.n_r, np.abs(self.m), self.s_nodes, self.params.omega)
        ang = np.exp(1j * np.outer(self.phi_nodes, self.m))
        if self.dim == 2:
            return np.einsum("im,jm->ijm", rad, ang).reshape(-1, len(self.modes))
        herm = _hermite_functions(int(self.n_z.max()), self.z_nodes, self.params.omega)[:, self.n_z]
        return np.einsum("im,jm,km->ijkm", rad, ang, herm).reshape(-1, len(self.modes))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Basis functions at arbitrary Cartesian points, shape (npts, nmodes)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} columns")
        w = self.params.omega
        s = w * (pts[:, 0] ** 2 + pts[:, 1] ** 2)
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        vals = _radial_values(self.n_r, np.abs(self.m), s, w) * np.exp(1j * np.outer(phi, self.m))
        if self.dim == 3:
            vals = vals * _hermite_functions(int(self.n_z.max()), pts[:, 2], w)[:, self.n_z]
        return vals * self._renorm

    # -- geometry -----------------------------------------------------------------

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_nodes(self) -> int:
        return self.quad_weights.size

    @cached_property
    def quad_nodes(self) -> np.ndarray:
        """Cartesian coordinates of the grid nodes, shape (n_nodes, dim)."""
        r, phi = np.meshgrid(self.r_nodes, self.phi_nodes, indexing="ij")
        if self.dim == 2:
            return np.column_stack([(r * np.cos(phi)).ravel(), (r * np.sin(phi)).ravel()])
        r3 = np.broadcast_to(r[..., None], self.grid_shape)
        p3 = np.broadcast_to(phi[..., None], self.grid_shape)
        z3 = np.broadcast_to(self.z_nodes[None, None, :], self.grid_shape)
        return np.column_stack([(r3 * np.cos(p3)).ravel(), (r3 * np.sin(p3)).ravel(), z3.ravel()])

    def index(self, n_r: int, m: int, n_z: int = 0) -> int:
        for k, md in enumerate(self.modes):
            if (md.radial_index, md.angular_index, md.axial_index) == (n_r, m, n_z):
                return k
        raise KeyError((n_r, m, n_z))

    # -- transforms ---------------------------------------------------------------

    def zeros(self) -> "SpectralCoeffs":
        return SpectralCoeffs(self, np.zeros(self.n_modes, dtype=complex))

    def unit(self, k: int) -> "SpectralCoeffs":
        c = np.zeros(self.n_modes, dtype=complex)
        c[k] = 1.0
        return SpectralCoeffs(self, c)

    def gram(self) -> np.ndarray:
        return self._analysis @ self.matrix

    @cached_property
    def position_moment(self) -> np.ndarray:
        """Matrix of omega*|x|^2 between retained modes (exact ladder relations)."""
        nm = self.n_modes
        out = np.zeros((nm, nm))
        lookup = {(md.radial_index, md.angular_index, md.axial_index): k for k, md in enumerate(self.modes)}
        for k, md in enumerate(self.modes):
            n, m, nz = md.radial_index, md.angular_index, md.axial_index
            diag = 2 * n + abs(m) + 1
            if self.dim == 3:
                diag += nz + 0.5
            out[k, k] = diag
            j = lookup.get((n + 1, m, nz))
            if j is not None:
                out[j, k] = out[k, j] = -math.sqrt((n + 1) * (n + abs(m) + 1))
            if self.dim == 3:
                j = lookup.get((n, m, nz + 2))
                if j is not None:
                    out[j, k] = out[k, j] = 0.5 * math.sqrt((nz + 1) * (nz + 2))
        return out


@dataclass
class SpectralCoeffs:
    basis: SpectralBasis
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.basis.n_modes,):
            raise ValueError(f"expected {self.basis.n_modes} coefficients, got {self.values.shape}")

    def copy(self) -> "SpectralCoeffs":
        return SpectralCoeffs(self.basis, self.values.copy())


@dataclass
class WaveField:
    basis: SpectralBasis
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.values.shape != (self.basis.n_nodes,):
            raise ValueError(f"expected {self.basis.n_nodes} grid values, got {self.values.shape}")

    def on_grid(self) -> np.ndarray:
        return self.values.reshape(self.basis.grid_shape)


def build_basis(params: ModelParams, trunc: Truncation) -> SpectralBasis:
    return SpectralBasis(params, trunc)


def synthesize(coeffs: SpectralCoeffs) -> WaveField:
    """Evaluate sum_n c_n chi_n on the quadrature grid."""
    b = coeffs.basis
    return WaveField(b, b.matrix @ coeffs.values)


def analyze(field: WaveField) -> SpectralCoeffs:
    """Discrete projection c_n = sum_k w_k conj(chi_n(x_k)) psi(x_k)."""
    b = field.basis
    return SpectralCoeffs(b, b._analysis @ field.values)


def apply_hamiltonian(coeffs: SpectralCoeffs) -> SpectralCoeffs:
    return SpectralCoeffs(coeffs.basis, coeffs.basis.energy_rotated * coeffs.values)


def random_band_limited(basis: SpectralBasis, rng: np.random.Generator, decay: float = 0.3,
                        mass: float | None = None) -> SpectralCoeffs:
    """Random coefficients with amplitudes decaying in the oscillator level."""
    nm = basis.n_modes
    level = basis.energy_unrotated / basis.params.omega
    amp = np.exp(-decay * (level - level.min()))
    c = amp * (rng.standard_normal(nm) + 1j * rng.standard_normal(nm)) / math.sqrt(2)
    if mass is not None:
        c *= math.sqrt(mass / np.vdot(c, c).real)
    return SpectralCoeffs(basis, c)
