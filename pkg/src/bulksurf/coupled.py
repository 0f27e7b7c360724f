"""Lie-split coupled stepping (Cahn-Hilliard then Navier-Stokes), variants and trajectories."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import geometry as geo
from .ch_solver import ChUnknowns, SurfaceTransport, ch_step, ch_step_neumann
from .diagnostics import DiagnosticsRecord, compute_record
from .errors import StepFailure
from .geometry import Grid
from .model import PhysParams
from .ns_solver import FlowUnknowns, NsOptions, ns_step, zero_flow
from .potentials import POLYNOMIAL, PotentialSpec

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    FULL = "full_bulk_surface"
    NEUMANN_AGG = "neumann_agg"
    NONCONVECTIVE_CH = "nonconvective_ch"


@dataclass
class State:
    time: float
    flow: FlowUnknowns
    ch: ChUnknowns

    def copy(self) -> "State":
        return State(self.time, self.flow.copy(), self.ch.copy())

    def is_finite(self) -> bool:
        return self.flow.is_finite() and self.ch.is_finite() and math.isfinite(self.time)


@dataclass(frozen=True)
class VariantConfig:
    variant: Variant
    params: PhysParams
    F: PotentialSpec = POLYNOMIAL
    G: PotentialSpec = POLYNOMIAL
    dt: float = 1e-4
    psi_frozen: float = 1.0
    surface_transport: SurfaceTransport = SurfaceTransport.CONSERVATIVE
    ns: NsOptions = field(default_factory=NsOptions)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "surface_transport", SurfaceTransport(self.surface_transport))
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.variant is Variant.NEUMANN_AGG:
            if abs(self.psi_frozen) != 1.0:
                raise ValueError("neumann_agg freezes psi at +1 or -1")
            p = self.params
            if not (math.isinf(p.K) and math.isinf(p.L)):
                object.__setattr__(self, "params",
                                   dataclasses.replace(p, K=math.inf, L=math.inf))

    @property
    def pots(self) -> tuple[PotentialSpec, PotentialSpec]:
        return (self.F, self.G)


def step(grid: Grid, state: State, config: VariantConfig, index: int | None = None) -> State:
    """One Lie-split step: CH with the current velocity, then NS with the new phase fields."""
    p, dt = config.params, config.dt
    try:
        if config.variant is Variant.NONCONVECTIVE_CH:
            ch = ch_step(grid, state.ch, None, p, config.pots, dt, config.surface_transport)
            return State(state.time + dt, state.flow, ch)
        if config.variant is Variant.NEUMANN_AGG:
            ch = ch_step_neumann(grid, state.ch, state.flow.u, p, config.pots, dt)
            ch.psi[:] = config.psi_frozen
        else:
            ch = ch_step(grid, state.ch, state.flow.u, p, config.pots, dt,
                         config.surface_transport)
    except StepFailure as exc:
        exc.step = index
        raise
    try:
        flow = ns_step(grid, state.flow, ch, p, dt, config.ns, rho_phi=state.ch.phi)
    except StepFailure as exc:
        exc.step = index
        raise
    return State(state.time + dt, flow, ch)


def prepare_initial(state: State, config: VariantConfig) -> State:
    """Impose variant constraints on an initial state (NeumannAGG freezes psi, zeroes theta)."""
    if config.variant is not Variant.NEUMANN_AGG:
        return state
    out = state.copy()
    out.ch.psi[:] = config.psi_frozen
    out.ch.theta[:] = 0.0
    return out


def number_of_steps(t_end: float, dt: float) -> int:
    if t_end <= 0:
        return 0
    return int(math.ceil(t_end / dt - 1e-9))


@dataclass
class RunSummary:
    final: State
    steps: int
    observer_calls: int
    initial: DiagnosticsRecord
    last: DiagnosticsRecord


Observer = Callable[[int, State, DiagnosticsRecord], None]


def run(grid: Grid, config: VariantConfig, initial: State, t_end: float,
        observer: Observer | None = None, cadence: int = 1) -> RunSummary:
    """Integrate to ``t_end`` with fixed dt.

    The observer is called after every ``cadence``-th step with
    ``(step_index, state, record)``; the initial record is returned in the
    summary rather than passed to the observer.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    nsteps = number_of_steps(t_end, config.dt)
    initial = prepare_initial(initial, config)
    flow_of = (lambda s: None) if config.variant is Variant.NONCONVECTIVE_CH else (lambda s: s.flow)
    init_rec = compute_record(grid, initial.time, initial.ch, flow_of(initial),
                              config.params, config.pots)
    state = initial
    last = init_rec
    calls = 0
    for k in range(1, nsteps + 1):
        state = step(grid, state, config, index=k)
        if not state.is_finite():
            raise StepFailure("non-finite field values", stage="run", step=k)
        if k % cadence == 0:
            last = compute_record(grid, state.time, state.ch, flow_of(state),
                                  config.params, config.pots)
            calls += 1
            if observer is not None:
                observer(k, state, last)
    if nsteps % cadence != 0 or nsteps == 0:
        last = compute_record(grid, state.time, state.ch, flow_of(state),
                              config.params, config.pots)
    return RunSummary(state, nsteps, calls, init_rec, last)


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

class InitialKind(str, Enum):
    DROPLET = "droplet_on_wall"
    STRATIFIED = "stratified"
    RANDOM_SMOOTH = "random_smooth"


@dataclass(frozen=True)
class InitialSpec:
    kind: InitialKind = InitialKind.DROPLET
    radius: float = 0.25
    center_x: float | None = None      # defaults to Lx/2
    interface_y: float | None = None   # defaults to Ly/2
    mean: float = 0.0
    psi_mean: float | None = None      # random_smooth: mean of psi, defaults to mean
    amplitude: float = 0.1
    modes: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", InitialKind(self.kind))


def _psi_from_trace(trace: np.ndarray, params: PhysParams) -> np.ndarray:
    a = params.alpha
    return trace / a if a != 0 else trace.copy()


def _band_limited(grid: Grid, rng: np.random.Generator, modes: int):
    """Random combination of low Fourier/cosine modes on cells and both walls."""
    X, Y = grid.cell_coords()
    f = np.zeros(grid.cell_shape)
    w = np.zeros((2, grid.nx))
    for kx in range(0, modes + 1):
        for ky in range(0, modes + 1):
            if kx == 0 and ky == 0:
                continue
            a, b = rng.standard_normal(2)
            ph = 2 * np.pi * kx * X / grid.Lx
            f += (a * np.cos(ph) + b * np.sin(ph)) * np.cos(np.pi * ky * Y / grid.Ly)
        if kx > 0:
            for k in range(2):
                a, b = rng.standard_normal(2)
                ph = 2 * np.pi * kx * grid.xc / grid.Lx
                w[k] += a * np.cos(ph) + b * np.sin(ph)
    return f, w


def initial_conditions(spec: InitialSpec, grid: Grid, params: PhysParams) -> State:
    X, Y = grid.cell_coords()
    s2e = math.sqrt(2.0) * params.eps
    if spec.kind is InitialKind.DROPLET:
        xc = 0.5 * grid.Lx if spec.center_x is None else spec.center_x
        r0 = spec.radius
        if r0 <= 0 or r0 >= min(0.5 * grid.Lx, grid.Ly):
            raise ValueError(f"droplet radius {r0} does not fit in the domain")
        dx = (X - xc + 0.5 * grid.Lx) % grid.Lx - 0.5 * grid.Lx
        phi = np.tanh((r0 - np.hypot(dx, Y)) / s2e)
        wx = (grid.xc - xc + 0.5 * grid.Lx) % grid.Lx - 0.5 * grid.Lx
        bottom = np.tanh((r0 - np.abs(wx)) / s2e)
        top = np.tanh((r0 - np.hypot(wx, grid.Ly)) / s2e)
        psi = _psi_from_trace(np.stack([bottom, top]), params)
    elif spec.kind is InitialKind.STRATIFIED:
        y0 = 0.5 * grid.Ly if spec.interface_y is None else spec.interface_y
        if not 0 < y0 < grid.Ly:
            raise ValueError(f"interface height {y0} outside (0, Ly)")
        phi = np.tanh((Y - y0) / s2e)
        trace = np.stack([np.full(grid.nx, math.tanh(-y0 / s2e)),
                          np.full(grid.nx, math.tanh((grid.Ly - y0) / s2e))])
        psi = _psi_from_trace(trace, params)
    else:
        rng = np.random.default_rng(spec.seed)
        f, w = _band_limited(grid, rng, spec.modes)
        phi = spec.amplitude * f / np.abs(f).max()
        phi += spec.mean - phi.mean()
        psi_mean = spec.mean if spec.psi_mean is None else spec.psi_mean
        psi = spec.amplitude * w / np.abs(w).max()
        psi += psi_mean - psi.mean(axis=1, keepdims=True)
    ch = ChUnknowns(phi=phi, mu=np.zeros(grid.cell_shape), psi=psi,
                    theta=np.zeros((2, grid.nx)))
    return State(0.0, zero_flow(grid), ch)
