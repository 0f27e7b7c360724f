"""
Variable-density Navier-Stokes step on the MAC grid.

Incremental pressure projection:

1. predictor  rho (u* - u^n)/dt + (m . grad) u^n - div(2 nu D u*) = mu grad(phi) - grad p^n
   with m = rho u + J, implicit viscosity and the Navier slip relation
   [2 nu D u . n + gamma u]_tau = [theta grad_G psi + (J.n) u / 2]_tau on the walls;
2. projection  div((1/rho) grad dp) = div(u*)/dt,  u = u* - dt/rho grad dp,  p = p^n + dp.

The evolved pressure is the reformulated one (free-energy density absorbed),
which is why the capillary force is mu grad(phi).  The slip velocity on a
wall is the tangential velocity of the wall-adjacent x-face row.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from . import geometry as geo
from .ch_solver import ChUnknowns, mu_normal_flux
from .errors import StepFailure
from .geometry import FaceField, Grid
from .linalg import SolverError, cg
from .model import PhysParams, density, relative_flux_factor, viscosity

logger = logging.getLogger(__name__)


@dataclass
class FlowUnknowns:
    u: FaceField
    p: np.ndarray

    def copy(self) -> "FlowUnknowns":
        return FlowUnknowns(self.u.copy(), self.p.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u.x)) and np.all(np.isfinite(self.u.y))
                    and np.all(np.isfinite(self.p)))


def zero_flow(grid: Grid) -> FlowUnknowns:
    return FlowUnknowns(grid.zeros_face(), grid.zeros_cell())


@dataclass(frozen=True)
class NsOptions:
    projection_tol: float = 1e-9
    momentum_tol: float = 1e-12
    max_iter: int = 20000


# ---------------------------------------------------------------------------
# velocity packing: [u_x (nx*ny) | interior u_y (nx*(ny-1))]
# ---------------------------------------------------------------------------

def pack(grid: Grid, u: FaceField) -> np.ndarray:
    return np.concatenate([u.x.ravel(), u.y[:, 1:-1].ravel()])


def unpack(grid: Grid, U: np.ndarray) -> FaceField:
    nx, ny = grid.nx, grid.ny
    n = nx * ny
    uy = np.zeros((nx, ny + 1))
    uy[:, 1:-1] = U[n:].reshape(nx, ny - 1)
    return FaceField(U[:n].reshape(nx, ny), uy)


_STRAIN_CACHE: dict[Grid, dict] = {}


def strain_operators(grid: Grid) -> dict:
    """Sparse maps from packed velocity to D_xx, D_yy (cells) and D_xy (interior nodes)."""
    ops = _STRAIN_CACHE.get(grid)
    if ops is not None:
        return ops
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    n = nx * ny
    nv = nx * (ny - 1)
    ux = np.arange(n).reshape(nx, ny)
    vv = n + np.arange(nv).reshape(nx, ny - 1)   # v[i, j] for j = 1..ny-1 stored at j-1
    size = n + nv

    def mat(rows, cols, vals, nrows):
        return sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(nrows, size))

    cells = np.arange(n).reshape(nx, ny)
    Exx = mat([cells.ravel()] * 2, [np.roll(ux, -1, axis=0).ravel(), ux.ravel()],
              [np.full(n, 1 / hx), np.full(n, -1 / hx)], n)

    # D_yy at cell (i, j) = (v[i, j+1] - v[i, j]) / hy, wall values are zero
    rows, cols, vals = [], [], []
    rows.append(cells[:, :-1].ravel()); cols.append(vv.ravel()); vals.append(np.full(nv, 1 / hy))
    rows.append(cells[:, 1:].ravel()); cols.append(vv.ravel()); vals.append(np.full(nv, -1 / hy))
    Eyy = mat(rows, cols, vals, n)

    # D_xy at node (i, j), j = 1..ny-1
    nodes = np.arange(nv).reshape(nx, ny - 1)
    rows = [nodes.ravel()] * 4
    cols = [ux[:, 1:].ravel(), ux[:, :-1].ravel(), vv.ravel(), np.roll(vv, 1, axis=0).ravel()]
    vals = [np.full(nv, 0.5 / hy), np.full(nv, -0.5 / hy),
            np.full(nv, 0.5 / hx), np.full(nv, -0.5 / hx)]
    Exy = mat(rows, cols, vals, nv)

    wall_rows = np.concatenate([ux[:, 0], ux[:, -1]])
    ops = {"Exx": Exx, "Eyy": Eyy, "Exy": Exy, "wall_rows": wall_rows, "size": size}
    _STRAIN_CACHE[grid] = ops
    return ops


def node_average(c: np.ndarray) -> np.ndarray:
    """Average of the four cells around each interior node (i, j), j = 1..ny-1."""
    s = c[:, 1:] + c[:, :-1]
    return 0.25 * (s + np.roll(s, 1, axis=0))


def face_density(grid: Grid, rho_c: np.ndarray) -> FaceField:
    return FaceField(geo.cells_to_xfaces(rho_c), geo.cells_to_yfaces(rho_c))


def viscous_matrix(grid: Grid, nu_c: np.ndarray, gamma_tau: float) -> sps.csr_matrix:
    """Symmetric form of -div(2 nu D u) plus wall friction, integrated over control volumes."""
    ops = strain_operators(grid)
    vol = grid.cell_volume
    Wc = sps.diags(2.0 * nu_c.ravel() * vol)
    Wn = sps.diags(4.0 * node_average(nu_c).ravel() * vol)
    A = (ops["Exx"].T @ Wc @ ops["Exx"] + ops["Eyy"].T @ Wc @ ops["Eyy"]
         + ops["Exy"].T @ Wn @ ops["Exy"])
    if gamma_tau > 0:
        d = np.zeros(ops["size"])
        d[ops["wall_rows"]] = gamma_tau * grid.hx
        A = A + sps.diags(d)
    return A.tocsr()


def strain_energy(grid: Grid, u: FaceField, nu_c: np.ndarray) -> float:
    """Discrete integral of 2 nu |Du|^2 (cells and interior nodes)."""
    ops = strain_operators(grid)
    U = pack(grid, u)
    dxx, dyy, dxy = ops["Exx"] @ U, ops["Eyy"] @ U, ops["Exy"] @ U
    vol = grid.cell_volume
    return float(vol * (np.sum(2 * nu_c.ravel() * (dxx**2 + dyy**2))
                        + np.sum(4 * node_average(nu_c).ravel() * dxy**2)))


# ---------------------------------------------------------------------------
# explicit terms
# ---------------------------------------------------------------------------

def relative_mass_flux(grid: Grid, ch: ChUnknowns, params: PhysParams) -> FaceField:
    """J on faces, including its normal component on the walls."""
    c = relative_flux_factor(params)
    g = geo.grad(grid, ch.mu)
    J = FaceField(c * g.x, c * g.y)
    if c != 0.0:
        # the wall-normal part comes from the coupling relation, not from grad
        jn = -0.5 * (params.rho2 - params.rho1) * mu_normal_flux(ch, params, grid)
        J.y[:, 0] = -jn[0]
        J.y[:, -1] = jn[1]
    return J


def advection(grid: Grid, u: FaceField, m: FaceField) -> FaceField:
    """First-order upwind (m . grad) u on both velocity components."""
    ux, v = u.x, u.y
    mx, my = m.x, m.y
    hx, hy = grid.hx, grid.hy

    mE = 0.5 * (mx + np.roll(mx, -1, axis=0))
    mW = np.roll(mE, 1, axis=0)
    myn = 0.5 * (my + np.roll(my, 1, axis=0))        # at nodes (i, j), j = 0..ny
    mN, mS = myn[:, 1:], myn[:, :-1]
    uE, uW = np.roll(ux, -1, axis=0), np.roll(ux, 1, axis=0)
    uN = np.concatenate([ux[:, 1:], ux[:, -1:]], axis=1)
    uS = np.concatenate([ux[:, :1], ux[:, :-1]], axis=1)
    ax = ((np.minimum(mE, 0) * (uE - ux) - np.maximum(mW, 0) * (uW - ux)) / hx
          + (np.minimum(mN, 0) * (uN - ux) - np.maximum(mS, 0) * (uS - ux)) / hy)

    vi = v[:, 1:-1]
    mxn = 0.5 * (mx[:, :-1] + mx[:, 1:])              # at nodes (i, j), j = 1..ny-1
    mE, mW = np.roll(mxn, -1, axis=0), mxn
    myc = 0.5 * (my[:, :-1] + my[:, 1:])              # at cells
    mN, mS = myc[:, 1:], myc[:, :-1]
    vE, vW = np.roll(vi, -1, axis=0), np.roll(vi, 1, axis=0)
    vN, vS = v[:, 2:], v[:, :-2]
    ay = np.zeros_like(v)
    ay[:, 1:-1] = ((np.minimum(mE, 0) * (vE - vi) - np.maximum(mW, 0) * (vW - vi)) / hx
                   + (np.minimum(mN, 0) * (vN - vi) - np.maximum(mS, 0) * (vS - vi)) / hy)
    return FaceField(ax, ay)


def capillary_force(grid: Grid, mu: np.ndarray, phi: np.ndarray) -> FaceField:
    """mu grad(phi) on faces (zero on the wall rows)."""
    g = geo.grad(grid, phi)
    return FaceField(geo.cells_to_xfaces(mu) * g.x, geo.cells_to_yfaces(mu) * g.y)


def wall_forcing(grid: Grid, ch: ChUnknowns, params: PhysParams, u: FaceField) -> np.ndarray:
    """Tangential wall forcing theta grad_G psi + (J.n) u_tau / 2, shape (2, nx) at wall nodes."""
    theta_f = 0.5 * (ch.theta + np.roll(ch.theta, 1, axis=1))
    dpsi = (ch.psi - np.roll(ch.psi, 1, axis=1)) / grid.hx
    f = theta_f * dpsi
    if params.rho1 != params.rho2:
        jn = -0.5 * (params.rho2 - params.rho1) * mu_normal_flux(ch, params, grid)
        jn_f = 0.5 * (jn + np.roll(jn, 1, axis=1))
        f = f + 0.5 * jn_f * np.stack([u.x[:, 0], u.x[:, -1]])
    return f


# ---------------------------------------------------------------------------
# step
# ---------------------------------------------------------------------------

def projection_matrix(grid: Grid, rho_f: FaceField) -> sps.csr_matrix:
    ops = geo.operator_matrices(grid)
    bx = sps.diags(1.0 / rho_f.x.ravel())
    by = sps.diags(1.0 / rho_f.y[:, 1:-1].ravel())
    return (ops["Gx"].T @ bx @ ops["Gx"] + ops["Gy"].T @ by @ ops["Gy"]).tocsr()


def ns_step(grid: Grid, flow: FlowUnknowns, ch: ChUnknowns, params: PhysParams, dt: float,
            options: NsOptions = NsOptions(), rho_phi: np.ndarray | None = None) -> FlowUnknowns:
    """Advance (u, p) by one step using phase fields ``ch`` (already at the new level).

    ``rho_phi`` is the phase field used for density and viscosity; defaults to
    ``ch.phi``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u, p = flow.u, flow.p
    vol = grid.cell_volume
    umax = max(np.abs(u.x).max(), np.abs(u.y).max())
    if umax * dt / min(grid.hx, grid.hy) > 1.0:
        logger.warning("CFL number %.3g exceeds 1", umax * dt / min(grid.hx, grid.hy))

    phi_m = ch.phi if rho_phi is None else rho_phi
    rho_c = density(params, phi_m)
    nu_c = viscosity(params, phi_m)
    rho_f = face_density(grid, rho_c)

    J = relative_mass_flux(grid, ch, params)
    m = FaceField(rho_f.x * u.x + J.x, rho_f.y * u.y + J.y)
    adv = advection(grid, u, m)
    kor = capillary_force(grid, ch.mu, ch.phi)
    gp = geo.grad(grid, p)

    rhs_face = FaceField(rho_f.x * u.x / dt - adv.x + kor.x - gp.x,
                         rho_f.y * u.y / dt - adv.y + kor.y - gp.y)
    rhs = pack(grid, rhs_face) * vol
    ops = strain_operators(grid)
    rhs[ops["wall_rows"]] += grid.hx * wall_forcing(grid, ch, params, u).ravel()

    mass = pack(grid, rho_f) * (vol / dt)
    A = (viscous_matrix(grid, nu_c, params.gamma_tau) + sps.diags(mass)).tocsr()
    try:
        U, _ = cg(A, rhs, tol=options.momentum_tol, max_iter=options.max_iter, x0=pack(grid, u))
    except SolverError as exc:
        raise StepFailure(f"momentum predictor failed: {exc}", stage="ns_step") from exc
    ustar = unpack(grid, U)

    b = -geo.div(grid, ustar).ravel() / dt
    Ap = projection_matrix(grid, rho_f)
    try:
        dp, _ = cg(Ap, b, tol=options.projection_tol, max_iter=options.max_iter,
                   nullspace_mean=True)
    except SolverError as exc:
        raise StepFailure(f"pressure projection failed: {exc}", stage="ns_step") from exc
    dp = dp.reshape(grid.cell_shape)
    gdp = geo.grad(grid, dp)
    unew = FaceField(ustar.x - dt * gdp.x / rho_f.x, ustar.y.copy())
    unew.y[:, 1:-1] -= dt * gdp.y[:, 1:-1] / rho_f.y[:, 1:-1]
    unew.y[:, 0] = 0.0
    unew.y[:, -1] = 0.0
    pnew = p + dp
    pnew -= pnew.mean()
    return FlowUnknowns(unew, pnew)


def kinetic_energy(grid: Grid, flow: FlowUnknowns, ch: ChUnknowns, params: PhysParams) -> float:
    cx, cy = geo.interpolate_to_cells(grid, flow.u)
    rho = density(params, ch.phi)
    return float(0.5 * np.sum(rho * (cx**2 + cy**2)) * grid.cell_volume)
