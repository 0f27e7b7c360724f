"""Double-well potentials: quartic polynomial and regularized Flory-Huggins."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class PotentialKind(str, Enum):
    POLYNOMIAL = "polynomial"
    FLORY_HUGGINS = "flory_huggins"


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of a double-well potential.

    ``shift`` moves the polynomial well, W(s) = ((s - shift)^2 - 1)^2 / 4, so
    the minima sit at ``shift +- 1``.  It is only meaningful for the
    polynomial kind and is zero by default.
    """

    kind: PotentialKind = PotentialKind.POLYNOMIAL
    theta: float = 1.0
    theta_c: float = 2.0
    sigma_reg: float = 1e-2
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.kind is PotentialKind.FLORY_HUGGINS:
            if not 0.0 < self.theta < self.theta_c:
                raise ValueError(
                    f"Flory-Huggins needs 0 < theta < theta_c, got theta={self.theta}, "
                    f"theta_c={self.theta_c}")
            if not 0.0 < self.sigma_reg < 0.1:
                raise ValueError(f"sigma_reg must lie in (0, 0.1), got {self.sigma_reg}")
            if _fh_second(self, 1.0 - self.sigma_reg) <= 0.0:
                raise ValueError("regularized Flory-Huggins extension is not coercive; "
                                 "decrease sigma_reg")
        elif self.shift != 0.0 and not np.isfinite(self.shift):
            raise ValueError("shift must be finite")


POLYNOMIAL = PotentialSpec()


def _finite(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("potential evaluated at a non-finite argument")
    return s


# Flory-Huggins pieces on the open band (-1, 1)

def _fh_value(spec, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = (1 + s) * np.log1p(s) + (1 - s) * np.log1p(-s)
    return 0.5 * spec.theta * ent - 0.5 * spec.theta_c * s * s


def _fh_first(spec, s):
    return 0.5 * spec.theta * (np.log1p(s) - np.log1p(-s)) - spec.theta_c * s


def _fh_second(spec, s):
    return spec.theta / (1.0 - s * s) - spec.theta_c


def _fh_split(spec, s):
    """Distance past the band edge and the signed edge for every entry."""
    edge = 1.0 - spec.sigma_reg
    sign = np.where(s >= 0, 1.0, -1.0)
    a = sign * edge
    return a, s - a, np.abs(s) > edge


def potential_value(spec: PotentialSpec, s):
    s = _finite(s)
    if spec.kind is PotentialKind.POLYNOMIAL:
        r = s - spec.shift
        return 0.25 * (r * r - 1.0) ** 2
    a, d, out = _fh_split(spec, s)
    inner = _fh_value(spec, np.where(out, 0.0, s))
    outer = _fh_value(spec, a) + _fh_first(spec, a) * d + 0.5 * _fh_second(spec, a) * d * d
    return np.where(out, outer, inner)


def potential_derivative(spec: PotentialSpec, s):
    s = _finite(s)
    if spec.kind is PotentialKind.POLYNOMIAL:
        r = s - spec.shift
        return r**3 - r
    a, d, out = _fh_split(spec, s)
    inner = _fh_first(spec, np.where(out, 0.0, s))
    outer = _fh_first(spec, a) + _fh_second(spec, a) * d
    return np.where(out, outer, inner)


def potential_second_derivative(spec: PotentialSpec, s):
    s = _finite(s)
    if spec.kind is PotentialKind.POLYNOMIAL:
        r = s - spec.shift
        return 3.0 * r * r - 1.0
    a, _, out = _fh_split(spec, s)
    return np.where(out, _fh_second(spec, a), _fh_second(spec, np.where(out, 0.0, s)))


def stabilization_constant(spec: PotentialSpec) -> float:
    """Half the supremum of |W''| over the admissible band.

    For the polynomial well the band is [-1, 1]; for Flory-Huggins it is the
    regularized band, outside of which W'' is constant anyway.
    """
    if spec.kind is PotentialKind.POLYNOMIAL:
        r = 1.0 + abs(spec.shift)
        return 0.5 * max(3.0 * r * r - 1.0, 1.0)
    # W'' at the band edge 1 - sigma, where 1 - s^2 = sigma (2 - sigma)
    at_edge = spec.theta / (spec.sigma_reg * (2.0 - spec.sigma_reg)) - spec.theta_c
    return 0.5 * max(abs(at_edge), abs(spec.theta - spec.theta_c))
