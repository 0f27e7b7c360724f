"""
Linearly stabilized implicit step of the convective bulk-surface Cahn-Hilliard system.

Unknown vector layout (size 2*nx*ny + 4*nx)::

    [ phi (nx*ny) | mu (nx*ny) | psi_bottom | psi_top | theta_bottom | theta_top ]

The wall traces of phi and mu are eliminated.  With the half-cell normal
derivative d_n c = (c_wall - c_0) / (hy/2), the K- and L-relations give

    eps * d_n(phi) = kappa * (alpha psi - phi_0),   kappa = 2 eps / (2 eps K + hy)
    m   * d_n(mu)  = lam   * (beta theta - mu_0),   lam   = 2 m / (2 m L + hy)

with kappa = 0 for K = inf and lam = 0 for L = inf; K = 0 and L = 0 are the
limits hy/(2 eps) and hy/(2 m).  The same wall flux leaves the bulk cell and
enters the surface equation, so beta*M_bulk + M_surf telescopes exactly.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sps

from . import geometry as geo
from .errors import StepFailure
from .geometry import FaceField, Grid, Wall
from .linalg import DirectSolver, SolverError
from .model import BoundaryCase, PhysParams, flux_coupling, trace_coupling
from .potentials import PotentialSpec, potential_derivative, stabilization_constant


class SurfaceTransport(str, Enum):
    CONSERVATIVE = "conservative"   # d_t psi + div_G(psi u_tau)
    ADVECTIVE = "advective"         # d_t psi + u_tau . grad_G psi


@dataclass
class ChUnknowns:
    phi: np.ndarray     # (nx, ny)
    mu: np.ndarray      # (nx, ny)
    psi: np.ndarray     # (2, nx): [bottom, top]
    theta: np.ndarray   # (2, nx)

    def copy(self) -> "ChUnknowns":
        return ChUnknowns(self.phi.copy(), self.mu.copy(), self.psi.copy(), self.theta.copy())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (self.phi, self.mu, self.psi, self.theta))


def wall_tangential_velocity(u: FaceField) -> np.ndarray:
    """Tangential velocity at both walls, at the wall nodes x = i hx; shape (2, nx)."""
    return np.stack([u.x[:, 0], u.x[:, -1]])


# ---------------------------------------------------------------------------
# wall traces and fluxes
# ---------------------------------------------------------------------------

def _rows(grid: Grid, c: np.ndarray) -> np.ndarray:
    return np.stack([c[:, 0], c[:, -1]])


def phi_normal_flux(ch: ChUnknowns, params: PhysParams, grid: Grid) -> np.ndarray:
    """eps * d_n(phi) on both walls, shape (2, nx)."""
    kappa = trace_coupling(params, grid.hy)
    return kappa * (params.alpha * ch.psi - _rows(grid, ch.phi))


def mu_normal_flux(ch: ChUnknowns, params: PhysParams, grid: Grid) -> np.ndarray:
    """m * d_n(mu) on both walls (mass flux out of the bulk), shape (2, nx)."""
    lam = flux_coupling(params, grid.hy)
    return lam * (params.beta * ch.theta - _rows(grid, ch.mu))


def phi_trace(ch: ChUnknowns, params: PhysParams, grid: Grid) -> np.ndarray:
    return _rows(grid, ch.phi) + 0.5 * grid.hy * phi_normal_flux(ch, params, grid) / params.eps


def mu_trace(ch: ChUnknowns, params: PhysParams, grid: Grid) -> np.ndarray:
    bt = params.beta * ch.theta
    if params.L == 0:
        return bt
    if np.isinf(params.L):
        return _rows(grid, ch.mu)
    return bt - params.L * mu_normal_flux(ch, params, grid)


# ---------------------------------------------------------------------------
# explicit transport
# ---------------------------------------------------------------------------

def upwind_flux(grid: Grid, c: np.ndarray, u: FaceField) -> FaceField:
    """Face fluxes c*u with first-order upwinding; zero through the walls."""
    fx = u.x * np.where(u.x > 0, np.roll(c, 1, axis=0), c)
    fy = np.zeros((grid.nx, grid.ny + 1))
    uy = u.y[:, 1:-1]
    fy[:, 1:-1] = uy * np.where(uy > 0, c[:, :-1], c[:, 1:])
    return FaceField(fx, fy)


def bulk_transport(grid: Grid, phi: np.ndarray, u: FaceField) -> np.ndarray:
    """div(phi u) in conservative upwind form."""
    return geo.div(grid, upwind_flux(grid, phi, u))


def surface_transport(grid: Grid, psi: np.ndarray, ut: np.ndarray,
                      form: SurfaceTransport = SurfaceTransport.CONSERVATIVE) -> np.ndarray:
    """Tangential transport on one wall; ``ut`` lives at the wall nodes."""
    if SurfaceTransport(form) is SurfaceTransport.CONSERVATIVE:
        f = ut * np.where(ut > 0, np.roll(psi, 1), psi)
        return geo.surface_div(grid, f)
    uc = 0.5 * (ut + np.roll(ut, -1))
    back = (psi - np.roll(psi, 1)) / grid.hx
    fwd = (np.roll(psi, -1) - psi) / grid.hx
    return uc * np.where(uc > 0, back, fwd)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def stabilizers(pots: tuple[PotentialSpec, PotentialSpec]) -> tuple[float, float]:
    return stabilization_constant(pots[0]), stabilization_constant(pots[1])


def neumann_bulk_matrix(grid: Grid, params: PhysParams, S_F: float, dt: float):
    """The (phi, mu) block with zero-flux walls and no surface unknowns."""
    ops = geo.operator_matrices(grid)
    n = grid.ncells
    eye = sps.identity(n, format="csr")
    lap = ops["lap"]
    A_pp = eye / dt
    A_pm = -params.mob_bulk * lap
    A_mp = params.eps * lap - (S_F / params.eps) * eye
    A_mm = eye
    return A_pp, A_pm, A_mp, A_mm


def ch_matrix(grid: Grid, params: PhysParams, S_F: float, S_G: float, dt: float,
              neumann_only: bool = False) -> sps.csr_matrix:
    """System matrix of one step.

    It depends only on the grid, parameters, stabilizers and dt (never on the
    state), and its sparsity pattern only on the grid and the coupling case.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    A_pp, A_pm, A_mp, A_mm = neumann_bulk_matrix(grid, params, S_F, dt)
    if neumann_only:
        A = sps.bmat([[A_pp, A_pm], [A_mp, A_mm]], format="csr")
        A.sort_indices()
        return A

    ops = geo.operator_matrices(grid)
    nx, hy = grid.nx, grid.hy
    Pb, Pt = ops["P_bottom"], ops["P_top"]
    eyeW = sps.identity(nx, format="csr")
    lapW = ops["lap_wall"]
    case = params.coupling
    a, b = params.alpha, params.beta
    kappa = trace_coupling(params, hy)
    lam = flux_coupling(params, hy)
    K_coupled = case.K_case is not BoundaryCase.NEUMANN
    L_coupled = case.L_case is not BoundaryCase.NEUMANN

    PtP = (Pb.T @ Pb + Pt.T @ Pt).tocsr()
    if L_coupled:
        A_pm = A_pm + (lam / hy) * PtP
    if K_coupled:
        A_mp = A_mp - (kappa / hy) * PtP

    # surface blocks per wall
    A_ss = eyeW / dt                                  # psi rows, psi cols
    A_st = -params.mob_surf * lapW                    # psi rows, theta cols
    A_ts = params.delta * lapW - (S_G / params.delta) * eyeW
    A_tt = eyeW
    if L_coupled:
        A_st = A_st + (b * b * lam) * eyeW
    if K_coupled:
        A_ts = A_ts - (a * a * kappa) * eyeW

    Z = None
    blocks = [
        # phi, mu, psi_b, psi_t, theta_b, theta_t
        [A_pp, A_pm, Z, Z, Z, Z],
        [A_mp, A_mm, Z, Z, Z, Z],
        [Z, Z, A_ss, Z, A_st, Z],
        [Z, Z, Z, A_ss, Z, A_st],
        [Z, Z, A_ts, Z, A_tt, Z],
        [Z, Z, Z, A_ts, Z, A_tt],
    ]
    if L_coupled:
        blocks[0][4] = -(lam * b / hy) * Pb.T
        blocks[0][5] = -(lam * b / hy) * Pt.T
        blocks[2][1] = -(b * lam) * Pb
        blocks[3][1] = -(b * lam) * Pt
    if K_coupled:
        blocks[1][2] = (kappa * a / hy) * Pb.T
        blocks[1][3] = (kappa * a / hy) * Pt.T
        blocks[4][0] = (a * kappa) * Pb
        blocks[5][0] = (a * kappa) * Pt
    A = sps.bmat(blocks, format="csr")
    A.sort_indices()
    return A


def ch_rhs(grid: Grid, state: ChUnknowns, u: FaceField | None, params: PhysParams,
           pots: tuple[PotentialSpec, PotentialSpec], dt: float,
           surface_form: SurfaceTransport = SurfaceTransport.CONSERVATIVE,
           neumann_only: bool = False) -> np.ndarray:
    S_F, S_G = stabilizers(pots)
    F, G = pots
    phi, psi = state.phi, state.psi
    r_phi = phi / dt
    if u is not None:
        r_phi = r_phi - bulk_transport(grid, phi, u)
    r_mu = (potential_derivative(F, phi) - S_F * phi) / params.eps
    parts = [r_phi.ravel(), r_mu.ravel()]
    if neumann_only:
        return np.concatenate(parts)
    r_psi = psi / dt
    if u is not None:
        ut = wall_tangential_velocity(u)
        r_psi = r_psi - np.stack([surface_transport(grid, psi[k], ut[k], surface_form)
                                  for k in range(2)])
    r_theta = (potential_derivative(G, psi) - S_G * psi) / params.delta
    parts += [r_psi[0], r_psi[1], r_theta[0], r_theta[1]]
    return np.concatenate(parts)


def assemble_ch_system(grid: Grid, state: ChUnknowns, u: FaceField | None, params: PhysParams,
                       pots: tuple[PotentialSpec, PotentialSpec], dt: float,
                       surface_form: SurfaceTransport = SurfaceTransport.CONSERVATIVE,
                       neumann_only: bool = False):
    """Return ``(matrix, rhs)`` of one step."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    S_F, S_G = stabilizers(pots)
    A = ch_matrix(grid, params, S_F, S_G, dt, neumann_only)
    b = ch_rhs(grid, state, u, params, pots, dt, surface_form, neumann_only)
    return A, b


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

_FACTOR_CACHE: "OrderedDict[tuple, DirectSolver]" = OrderedDict()
_FACTOR_CACHE_SIZE = 8


def _matrix(grid, params, S_F, S_G, dt, part):
    if part == "bulk":
        return ch_matrix(grid, params, S_F, S_G, dt, neumann_only=True)
    A = ch_matrix(grid, params, S_F, S_G, dt)
    if part == "surface":
        n2 = 2 * grid.ncells
        return A[n2:, n2:].tocsr()
    return A


def _solver_for(grid, params, pots, dt, part) -> DirectSolver:
    S_F, S_G = stabilizers(pots)
    key = (grid, params, S_F, S_G, float(dt), part)
    solver = _FACTOR_CACHE.get(key)
    if solver is None:
        solver = DirectSolver(_matrix(grid, params, S_F, S_G, dt, part))
        _FACTOR_CACHE[key] = solver
        if len(_FACTOR_CACHE) > _FACTOR_CACHE_SIZE:
            _FACTOR_CACHE.popitem(last=False)
    else:
        _FACTOR_CACHE.move_to_end(key)
    return solver


def _solve(grid, params, pots, dt, rhs, part):
    try:
        x, stats = _solver_for(grid, params, pots, dt, part)(rhs)
    except SolverError as exc:
        raise StepFailure(f"Cahn-Hilliard solve failed: {exc}", stage="ch_step") from exc
    return x


def decoupled(params: PhysParams) -> bool:
    """True when K = L = inf: bulk and surface blocks of the system are independent."""
    c = params.coupling
    return c.K_case is BoundaryCase.NEUMANN and c.L_case is BoundaryCase.NEUMANN


def ch_step(grid: Grid, state: ChUnknowns, u: FaceField | None, params: PhysParams,
            pots: tuple[PotentialSpec, PotentialSpec], dt: float,
            surface_form: SurfaceTransport = SurfaceTransport.CONSERVATIVE) -> ChUnknowns:
    """One step of the coupled bulk-surface system; ``u=None`` means no convection."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rhs = ch_rhs(grid, state, u, params, pots, dt, surface_form)
    n, nx = grid.ncells, grid.nx
    if decoupled(params):
        # block-diagonal system: the bulk half is the zero-flux (Neumann) system
        x = np.concatenate([_solve(grid, params, pots, dt, rhs[:2 * n], "bulk"),
                            _solve(grid, params, pots, dt, rhs[2 * n:], "surface")])
    else:
        x = _solve(grid, params, pots, dt, rhs, "full")
    shape = grid.cell_shape
    return ChUnknowns(
        phi=x[:n].reshape(shape),
        mu=x[n:2 * n].reshape(shape),
        psi=x[2 * n:2 * n + 2 * nx].reshape(2, nx),
        theta=x[2 * n + 2 * nx:].reshape(2, nx),
    )


def ch_step_neumann(grid: Grid, state: ChUnknowns, u: FaceField | None, params: PhysParams,
                    pots: tuple[PotentialSpec, PotentialSpec], dt: float) -> ChUnknowns:
    """Bulk-only step with zero-flux walls; wall fields are carried over unchanged."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rhs = ch_rhs(grid, state, u, params, pots, dt, neumann_only=True)
    x = _solve(grid, params, pots, dt, rhs, "bulk")
    n = grid.ncells
    return ChUnknowns(
        phi=x[:n].reshape(grid.cell_shape),
        mu=x[n:].reshape(grid.cell_shape),
        psi=state.psi.copy(),
        theta=np.zeros_like(state.theta),
    )
