"""Model parameters, truncation settings and validation of the standing assumptions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def sigma_bound(dim: int) -> float:
    """Upper bound on the nonlinearity exponent: d / (2(d - 2)), +inf in 2D."""
    if dim == 2:
        return math.inf
    if dim == 3:
        return 1.5
    raise ValueError(f"dim must be 2 or 3, got {dim!r}")


@dataclass(frozen=True)
class ModelParams:
    """Physical and dissipation parameters.

    ``theta_d`` is the dissipation angle; the damping and dispersion weights
    follow from ``i*beta - gamma = -exp(i*theta_d)``.
    """

    omega: float = 1.0
    Omega: float = 0.0
    theta_d: float = 0.0
    lam: float = 0.0
    sigma: float = 1.0
    mu: float = 0.0
    dim: int = 2

    @property
    def gamma(self) -> float:
        return math.cos(self.theta_d)

    @property
    def beta(self) -> float:
        return -math.sin(self.theta_d)

    @property
    def eta(self) -> complex:
        """exp(-i theta_d) = gamma + i beta, the prefactor of the generator."""
        return complex(self.gamma, self.beta)

    @property
    def epsilon(self) -> float:
        """Rotation ratio Omega^2 / omega^2."""
        return (self.Omega / self.omega) ** 2

    def replace(self, **changes) -> "ModelParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class Truncation:
    """Basis truncation and quadrature sizes.

    Node counts left at 0 are filled in by :meth:`resolved` with sizes that
    keep cubic products of retained modes accurately integrated.
    """

    max_level: int = 6
    n_radial_quad: int = 0
    n_angular_quad: int = 0
    n_axial_quad: int = 0

    def resolved(self, dim: int) -> "Truncation":
        k = self.max_level
        n_rad = self.n_radial_quad or 2 * k + 16
        n_ang = self.n_angular_quad or 4 * k + 1
        n_ax = self.n_axial_quad or (2 * k + 16 if dim == 3 else 0)
        return Truncation(k, n_rad, n_ang, n_ax)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "valid" if self.ok else "; ".join(self.violations)


def validate(params: ModelParams) -> ValidationReport:
    """Check the standing assumptions; never raises."""
    report = ValidationReport()
    v = report.violations
    try:
        finite = all(
            math.isfinite(float(x))
            for x in (params.omega, params.Omega, params.theta_d, params.lam, params.sigma, params.mu)
        )
    except (TypeError, ValueError):
        v.append("parameters must be real numbers")
        return report
    if not finite:
        v.append("parameters must be finite")
        return report
    if params.dim not in (2, 3):
        v.append(f"dim in {{2, 3}} (got {params.dim})")
    if not params.omega > 0:
        v.append("omega > 0")
    if not params.omega > abs(params.Omega):
        v.append("omega > |Omega|")
    if not -math.pi / 2 < params.theta_d < math.pi / 2:
        v.append("theta in (-pi/2, pi/2)")
    if not params.lam >= 0:
        v.append("lambda >= 0")
    if not params.sigma > 0:
        v.append("sigma > 0")
    elif params.dim in (2, 3):
        bound = sigma_bound(params.dim)
        if not params.sigma < bound:
            v.append(f"sigma < d/(2(d-2)) = {bound:g}")
    return report


def validate_truncation(trunc: Truncation, dim: int) -> ValidationReport:
    report = ValidationReport()
    t = trunc.resolved(dim)
    if t.max_level < 1:
        report.violations.append("max_level >= 1")
    if t.n_radial_quad < t.max_level + 1:
        report.violations.append("n_radial_quad >= max_level + 1")
    if t.n_angular_quad < 4 * t.max_level + 1:
        report.violations.append("n_angular_quad >= 4*max_level + 1")
    if dim == 3 and t.n_axial_quad < t.max_level + 1:
        report.violations.append("n_axial_quad >= max_level + 1")
    return report


def require_valid(params: ModelParams) -> None:
    report = validate(params)
    if not report.ok:
        raise ValueError(f"invalid parameters: {report}")
