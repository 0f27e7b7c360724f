"""
Discrete energy, dissipation, mass and residual diagnostics.

Quadratures match the scheme: gradients squared live on faces, potentials
at cell centres / wall cell centres, and the wall half-cell between the
boundary row and the reconstructed trace carries the wall part of the
Dirichlet energy.  With these choices the non-convective Cahn-Hilliard step
satisfies E^{n+1} - E^n <= -dt * (D_bulk_mob + D_surf_mob + D_robin)^{n+1}.

The normal-velocity terms of the dissipation law vanish on static walls
and are not computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import geometry as geo
from .ch_solver import ChUnknowns, mu_normal_flux, mu_trace, phi_trace
from .geometry import Grid, Wall
from .model import PhysParams, h_of_K
from .ns_solver import FlowUnknowns, strain_energy
from .model import viscosity
from .potentials import PotentialSpec, potential_derivative, potential_value


@dataclass
class EnergyParts:
    kinetic: float
    bulk_gl: float
    surf_gl: float
    penalty: float

    @property
    def total(self) -> float:
        return self.kinetic + self.bulk_gl + self.surf_gl + self.penalty


@dataclass
class Dissipation:
    visc: float
    slip: float
    bulk_mob: float
    surf_mob: float
    robin: float

    @property
    def total(self) -> float:
        return self.visc + self.slip + self.bulk_mob + self.surf_mob + self.robin


@dataclass
class Masses:
    bulk: float
    surf: tuple[float, float]     # bottom, top
    combined: float


@dataclass
class DiagnosticsRecord:
    time: float
    E_total: float
    E_kinetic: float
    E_bulk_GL: float
    E_surf_GL: float
    E_penalty: float
    D_visc: float
    D_slip: float
    D_bulk_mob: float
    D_surf_mob: float
    D_robin: float
    M_bulk: float
    M_surf: float
    M_combined: float
    R_div: float
    R_sdiv: float
    R_form: float
    contact_angle_deg: float | None
    band_violation: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return [getattr(self, n) for n in self.field_names()]


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def _kinetic(grid, flow, ch, params):
    if flow is None:
        return 0.0
    from .ns_solver import kinetic_energy
    return kinetic_energy(grid, flow, ch, params)


def total_energy(grid: Grid, ch: ChUnknowns, params: PhysParams,
                 pots: tuple[PotentialSpec, PotentialSpec],
                 flow: FlowUnknowns | None = None) -> EnergyParts:
    F, G = pots
    vol = grid.cell_volume
    g = geo.grad(grid, ch.phi)
    trace = phi_trace(ch, params, grid)
    rows = np.stack([ch.phi[:, 0], ch.phi[:, -1]])
    dirichlet = 0.5 * params.eps * vol * (np.sum(g.x**2) + np.sum(g.y[:, 1:-1]**2))
    dirichlet += params.eps * grid.hx * np.sum((trace - rows) ** 2) / grid.hy
    bulk = dirichlet + vol * np.sum(potential_value(F, ch.phi)) / params.eps

    surf = 0.0
    for k in range(2):
        dpsi = geo.surface_grad(grid, ch.psi[k])
        surf += grid.hx * (0.5 * params.delta * np.sum(dpsi**2)
                           + np.sum(potential_value(G, ch.psi[k])) / params.delta)
    pen = 0.5 * h_of_K(params.K) * grid.hx * np.sum((params.alpha * ch.psi - trace) ** 2)
    return EnergyParts(_kinetic(grid, flow, ch, params), float(bulk), float(surf), float(pen))


def dissipation_terms(grid: Grid, ch: ChUnknowns, params: PhysParams,
                      flow: FlowUnknowns | None = None) -> Dissipation:
    vol = grid.cell_volume
    gm = geo.grad(grid, ch.mu)
    m = params.mob_bulk
    bulk = m * vol * (np.sum(gm.x**2) + np.sum(gm.y[:, 1:-1] ** 2))
    flux = mu_normal_flux(ch, params, grid)
    if m > 0:
        bulk += grid.hx * 0.5 * grid.hy * np.sum(flux**2) / m
    surf = sum(params.mob_surf * grid.hx * np.sum(geo.surface_grad(grid, ch.theta[k]) ** 2)
               for k in range(2))
    mu_w = mu_trace(ch, params, grid)
    robin = h_of_K(params.L) * grid.hx * np.sum((params.beta * ch.theta - mu_w) ** 2)
    visc = slip = 0.0
    if flow is not None:
        visc = strain_energy(grid, flow.u, viscosity(params, ch.phi))
        ut = np.stack([flow.u.x[:, 0], flow.u.x[:, -1]])
        slip = params.gamma_tau * grid.hx * float(np.sum(ut**2))
    return Dissipation(float(visc), float(slip), float(bulk), float(surf), float(robin))


def masses(grid: Grid, ch: ChUnknowns, params: PhysParams) -> Masses:
    bulk = float(np.sum(ch.phi) * grid.cell_volume)
    surf = (float(np.sum(ch.psi[0]) * grid.hx), float(np.sum(ch.psi[1]) * grid.hx))
    return Masses(bulk, surf, params.beta * bulk + surf[0] + surf[1])


def band_violation(ch: ChUnknowns) -> float:
    return max(0.0, float(max(np.abs(ch.phi).max(), np.abs(ch.psi).max())) - 1.0)


# ---------------------------------------------------------------------------
# reformulation residual
# ---------------------------------------------------------------------------

@dataclass
class FormulationResidual:
    bulk: float
    wall: float

    @property
    def total(self) -> float:
        return math.hypot(self.bulk, self.wall)


def _centred_cell_gradient(grid, c):
    """Centred gradient at cell centres; one-sided (second order) in the wall rows."""
    cx = (np.roll(c, -1, axis=0) - np.roll(c, 1, axis=0)) / (2 * grid.hx)
    cy = np.empty_like(c)
    cy[:, 1:-1] = (c[:, 2:] - c[:, :-2]) / (2 * grid.hy)
    cy[:, 0] = (-3 * c[:, 0] + 4 * c[:, 1] - c[:, 2]) / (2 * grid.hy)
    cy[:, -1] = (3 * c[:, -1] - 4 * c[:, -2] + c[:, -3]) / (2 * grid.hy)
    return cx, cy


def extrapolated_trace(grid: Grid, c: np.ndarray) -> np.ndarray:
    """Quadratic extrapolation of a cell field to both walls, shape (2, nx)."""
    bottom = (15 * c[:, 0] - 10 * c[:, 1] + 3 * c[:, 2]) / 8
    top = (15 * c[:, -1] - 10 * c[:, -2] + 3 * c[:, -3]) / 8
    return np.stack([bottom, top])


def bulk_formulation_residual(grid: Grid, phi: np.ndarray, params: PhysParams,
                              F: PotentialSpec) -> float:
    """L2 norm over interior faces of [mu grad phi - grad f] + eps div(grad phi x grad phi)."""
    eps = params.eps
    hx, hy = grid.hx, grid.hy
    mu = -eps * geo.laplacian(grid, phi) + potential_derivative(F, phi) / eps
    px, py = _centred_cell_gradient(grid, phi)
    f = 0.5 * eps * (px**2 + py**2) + potential_value(F, phi) / eps

    g = geo.grad(grid, phi)
    # phi_x, phi_y at interior nodes (i, j), j = 1..ny-1
    pxn = 0.5 * (g.x[:, 1:] + g.x[:, :-1])
    pyn = 0.5 * (g.y[:, 1:-1] + np.roll(g.y[:, 1:-1], 1, axis=0))
    txy = pxn * pyn
    txx, tyy = px**2, py**2

    # x-faces (i, j) for j = 2..ny-3 (the Laplacian row is clean there)
    js = slice(2, grid.ny - 2)
    lhs_x = geo.cells_to_xfaces(mu) * g.x - (f - np.roll(f, 1, axis=0)) / hx
    div_x = (txx - np.roll(txx, 1, axis=0)) / hx
    dty = np.zeros_like(phi)
    dty[:, 1:-1] = (txy[:, 1:] - txy[:, :-1]) / hy
    res_x = (lhs_x + eps * (div_x + dty))[:, js]

    # interior y-faces (i, j) for j = 3..ny-3
    mu_y = 0.5 * (mu[:, 1:] + mu[:, :-1])
    lhs_y = mu_y * g.y[:, 1:-1] - (f[:, 1:] - f[:, :-1]) / hy
    dtx = (np.roll(txy, -1, axis=0) - txy) / hx
    div_y = (tyy[:, 1:] - tyy[:, :-1]) / hy
    res_y = (lhs_y + eps * (dtx + div_y))[:, 2:grid.ny - 3]

    return float(np.sqrt((np.sum(res_x**2) + np.sum(res_y**2)) * grid.cell_volume))


def wall_formulation_residual(grid: Grid, phi: np.ndarray, psi: np.ndarray, params: PhysParams,
                              G: PotentialSpec) -> float:
    """Tangential wall identity: [eps (grad phi x grad phi) n - delta div_G(grad psi x grad psi)]_tau
    against theta grad_G psi - grad_G g - [eps d_n phi - h(K)(alpha psi - phi)](alpha grad_G psi - grad_G phi).
    """
    eps, dl, a = params.eps, params.delta, params.alpha
    hK = h_of_K(params.K)
    hx = grid.hx
    tr = extrapolated_trace(grid, phi)
    total = 0.0
    for k, wall in enumerate(geo.WALLS):
        s = psi[k]
        dn = geo.normal_derivative(grid, phi, wall, boundary_value=tr[k])
        theta = -dl * geo.surface_laplacian(grid, s) + potential_derivative(G, s) / dl + a * eps * dn
        sp_c = (np.roll(s, -1) - np.roll(s, 1)) / (2 * hx)
        gap = a * s - tr[k]
        g = 0.5 * dl * sp_c**2 + potential_value(G, s) / dl + 0.5 * hK * gap**2

        def node(c):
            return 0.5 * (c + np.roll(c, 1))

        def dnode(c):
            return (c - np.roll(c, 1)) / hx

        lhs = eps * node(dn) * dnode(tr[k]) - dl * dnode(sp_c**2)
        rhs = (node(theta) * dnode(s) - dnode(g)
               - (eps * node(dn) - hK * node(gap)) * (a * dnode(s) - dnode(tr[k])))
        total += np.sum((lhs - rhs) ** 2) * hx
    return float(np.sqrt(total))


def formulation_residual(grid: Grid, phi: np.ndarray, params: PhysParams,
                         pots: tuple[PotentialSpec, PotentialSpec],
                         psi: np.ndarray | None = None) -> FormulationResidual:
    bulk = bulk_formulation_residual(grid, phi, params, pots[0])
    wall = 0.0 if psi is None else wall_formulation_residual(grid, phi, psi, params, pots[1])
    return FormulationResidual(bulk, wall)


# ---------------------------------------------------------------------------
# contact angle and incompressibility
# ---------------------------------------------------------------------------

def _trace_crossings(trace: np.ndarray):
    """Zero crossings of a periodic wall trace as (cell index, fraction) pairs."""
    nxt = np.roll(trace, -1)
    idx = np.nonzero(np.sign(trace) * np.sign(nxt) < 0)[0]
    return [(int(i), trace[i] / (trace[i] - nxt[i])) for i in idx]


def contact_angle(grid: Grid, phi: np.ndarray, wall: Wall = Wall.BOTTOM) -> float | None:
    """Angle (degrees) between the wall and the zero level set, measured inside phi > 0.

    At each zero crossing of the extrapolated wall trace, ``cos(angle) =
    d_n phi / |grad phi|`` with the outward normal derivative; the mean over
    contact points is returned, or ``None`` when the trace does not change sign.
    """
    k = 0 if wall is Wall.BOTTOM else 1
    trace = extrapolated_trace(grid, phi)[k]
    dn = geo.normal_derivative(grid, phi, wall, boundary_value=trace)
    dt = (np.roll(trace, -1) - np.roll(trace, 1)) / (2 * grid.hx)
    angles = []
    for i, t in _trace_crossings(trace):
        j = (i + 1) % grid.nx
        gn = (1 - t) * dn[i] + t * dn[j]
        gt = (1 - t) * dt[i] + t * dt[j]
        norm = math.hypot(gn, gt)
        if norm == 0.0:
            continue
        angles.append(math.degrees(math.acos(max(-1.0, min(1.0, gn / norm)))))
    if not angles:
        return None
    return float(np.mean(angles))


def incompressibility_residuals(grid: Grid, flow: FlowUnknowns) -> tuple[float, float]:
    r_div = float(np.abs(geo.div(grid, flow.u)).max())
    r_sdiv = max(float(np.abs(geo.surface_div(grid, flow.u.x[:, j])).max()) for j in (0, -1))
    return r_div, r_sdiv


# ---------------------------------------------------------------------------

def compute_record(grid: Grid, time: float, ch: ChUnknowns, flow: FlowUnknowns | None,
                   params: PhysParams, pots: tuple[PotentialSpec, PotentialSpec]
                   ) -> DiagnosticsRecord:
    e = total_energy(grid, ch, params, pots, flow)
    d = dissipation_terms(grid, ch, params, flow)
    ms = masses(grid, ch, params)
    r_div = r_sdiv = 0.0
    if flow is not None:
        r_div, r_sdiv = incompressibility_residuals(grid, flow)
    r_form = formulation_residual(grid, ch.phi, params, pots, ch.psi).total
    return DiagnosticsRecord(
        time=time, E_total=e.total, E_kinetic=e.kinetic, E_bulk_GL=e.bulk_gl,
        E_surf_GL=e.surf_gl, E_penalty=e.penalty,
        D_visc=d.visc, D_slip=d.slip, D_bulk_mob=d.bulk_mob, D_surf_mob=d.surf_mob,
        D_robin=d.robin,
        M_bulk=ms.bulk, M_surf=ms.surf[0] + ms.surf[1], M_combined=ms.combined,
        R_div=r_div, R_sdiv=r_sdiv, R_form=r_form,
        contact_angle_deg=contact_angle(grid, ch.phi, Wall.BOTTOM),
        band_violation=band_violation(ch),
    )
