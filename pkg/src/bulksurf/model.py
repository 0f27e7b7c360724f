"""Physical parameters and constitutive closures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class BoundaryCase(str, Enum):
    DIRICHLET = "dirichlet"   # parameter = 0: trace constraint
    ROBIN = "robin"           # parameter in (0, inf)
    NEUMANN = "neumann"       # parameter = inf: no coupling

    @classmethod
    def from_parameter(cls, value: float) -> "BoundaryCase":
        if value < 0 or math.isnan(value):
            raise ValueError(f"coupling parameter must lie in [0, inf], got {value}")
        if value == 0:
            return cls.DIRICHLET
        if math.isinf(value):
            return cls.NEUMANN
        return cls.ROBIN


@dataclass(frozen=True)
class CouplingCase:
    K_case: BoundaryCase
    L_case: BoundaryCase


@dataclass(frozen=True)
class PhysParams:
    rho1: float = 1.0
    rho2: float = 1.0
    nu1: float = 1.0
    nu2: float = 1.0
    mob_bulk: float = 1.0
    mob_surf: float = 1.0
    eps: float = 0.05
    delta: float = 0.05
    alpha: float = 1.0
    beta: float = 1.0
    K: float = 1.0
    L: float = 1.0
    gamma_tau: float = 1.0

    def __post_init__(self):
        errors = validate_params(self)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def coupling(self) -> CouplingCase:
        return CouplingCase(BoundaryCase.from_parameter(self.K),
                            BoundaryCase.from_parameter(self.L))


def validate_params(p: PhysParams) -> list[str]:
    errors = []
    for name in ("rho1", "rho2", "nu1", "nu2", "eps", "delta"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v > 0):
            errors.append(f"{name} must be positive, got {v}")
    for name in ("mob_bulk", "mob_surf", "gamma_tau"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v >= 0):
            errors.append(f"{name} must be nonnegative, got {v}")
    for name in ("alpha", "beta"):
        if not np.isfinite(getattr(p, name)):
            errors.append(f"{name} must be finite")
    for name in ("K", "L"):
        v = getattr(p, name)
        if math.isnan(v) or v < 0:
            errors.append(f"{name} must lie in [0, inf], got {v}")
    if p.K == 0 and p.alpha == 0:
        errors.append("K=0 requires alpha ≠ 0")
    return errors


def density(params: PhysParams, phi):
    phi = np.clip(phi, -1.0, 1.0)
    return 0.5 * params.rho2 * (1.0 + phi) + 0.5 * params.rho1 * (1.0 - phi)


def viscosity(params: PhysParams, phi):
    phi = np.clip(phi, -1.0, 1.0)
    return 0.5 * params.nu2 * (1.0 + phi) + 0.5 * params.nu1 * (1.0 - phi)


def relative_flux_factor(params: PhysParams) -> float:
    """Scalar c in J = c * grad(mu)."""
    return -0.5 * (params.rho2 - params.rho1) * params.mob_bulk


def relative_flux(params: PhysParams, grad_mu):
    """J = -(rho2 - rho1)/2 * m * grad(mu); accepts arrays or a FaceField."""
    c = relative_flux_factor(params)
    if hasattr(grad_mu, "_fields"):
        return type(grad_mu)(*(c * g for g in grad_mu))
    return c * np.asarray(grad_mu)


def h_of_K(K: float) -> float:
    if math.isnan(K) or K < 0:
        raise ValueError(f"h(K) needs K in [0, inf], got {K}")
    if K == 0 or math.isinf(K):
        return 0.0
    return 1.0 / K


def trace_coupling(params: PhysParams, hy: float) -> float:
    """Coefficient kappa in eps * d_n(phi) = kappa * (alpha psi - phi_wallcell).

    Obtained by eliminating the wall trace of phi between the half-cell
    gradient and the K-relation; zero when K = inf.
    """
    if math.isinf(params.K):
        return 0.0
    return 2.0 * params.eps / (2.0 * params.eps * params.K + hy)


def flux_coupling(params: PhysParams, hy: float) -> float:
    """Coefficient lam in m d_n(mu) = lam * (beta theta - mu_wallcell); zero when L = inf."""
    m = params.mob_bulk
    if math.isinf(params.L) or m == 0:
        return 0.0
    return 2.0 * m / (2.0 * m * params.L + hy)
