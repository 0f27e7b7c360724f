import math

import numpy as np
import pytest

from bulksurf import coupled as cp
from bulksurf.ch_solver import ChUnknowns
from bulksurf.coupled import (InitialSpec, State, Variant, VariantConfig, initial_conditions,
                              number_of_steps, run, step)
from bulksurf.errors import StepFailure
from bulksurf.geometry import build_grid
from bulksurf.ns_solver import zero_flow

from conftest import make_params


def droplet_setup(n=16, **kw):
    g = build_grid(n, n, 1.0, 1.0)
    base = dict(rho2=2.0, nu1=0.05, nu2=0.1, mob_bulk=1e-2, mob_surf=1e-2)
    base.update(kw)
    p = make_params(**base)
    return g, p, initial_conditions(InitialSpec("droplet_on_wall", radius=0.3), g, p)


def test_pure_phase_at_rest_is_fixed_point():
    g = build_grid(16, 16, 1.0, 1.0)
    p = make_params(rho2=3.0, K=0.5, L=2.0)
    ch = ChUnknowns(np.ones(g.cell_shape), np.zeros(g.cell_shape), np.ones((2, 16)),
                    np.zeros((2, 16)))
    s0 = State(0.0, zero_flow(g), ch)
    out = run(g, VariantConfig("full_bulk_surface", p, dt=1e-3), s0, 0.1)
    assert out.steps == 100
    assert np.abs(out.final.ch.phi - 1).max() <= 1e-13
    assert np.abs(out.final.ch.psi - 1).max() <= 1e-13
    assert np.abs(out.final.flow.u.x).max() <= 1e-13
    assert np.abs(out.final.flow.u.y).max() <= 1e-13


def test_full_with_neumann_limits_matches_neumann_agg():
    g = build_grid(16, 16, 1.0, 1.0)
    p = make_params(rho2=3.0, nu1=0.1, nu2=0.2, mob_bulk=1e-3, mob_surf=1e-3,
                    K=math.inf, L=math.inf)
    s0 = initial_conditions(InitialSpec("droplet_on_wall", radius=0.3), g, p)
    s0.ch.psi[:] = 1.0
    full = VariantConfig("full_bulk_surface", p, dt=1e-3, surface_transport="advective")
    agg = VariantConfig("neumann_agg", p, dt=1e-3)
    a, b = s0.copy(), cp.prepare_initial(s0, agg)
    for k in range(20):
        a, b = step(g, a, full, k), step(g, b, agg, k)
        assert np.abs(a.ch.phi - b.ch.phi).max() <= 1e-12
        assert np.abs(a.flow.u.x - b.flow.u.x).max() <= 1e-12
        assert np.abs(a.flow.p - b.flow.p).max() <= 1e-12


def test_neumann_agg_freezes_wall_and_forces_limits():
    p = make_params(K=1.0, L=1.0)
    vc = VariantConfig("neumann_agg", p, psi_frozen=-1.0)
    assert math.isinf(vc.params.K) and math.isinf(vc.params.L)
    with pytest.raises(ValueError):
        VariantConfig("neumann_agg", p, psi_frozen=0.5)
    g, p, s0 = droplet_setup()
    out = run(g, VariantConfig("neumann_agg", p, dt=1e-3), s0, 5e-3)
    assert np.all(out.final.ch.psi == 1.0)


def test_zero_end_time_returns_initial_state():
    g, p, s0 = droplet_setup()
    calls = []
    out = run(g, VariantConfig("full_bulk_surface", p, dt=1e-3), s0, 0.0,
              lambda *a: calls.append(a))
    assert out.steps == 0 and not calls
    assert np.array_equal(out.final.ch.phi, s0.ch.phi)
    assert out.last == out.initial


@pytest.mark.parametrize("t_end,dt,cadence", [(1e-2, 1e-3, 1), (1e-2, 1e-3, 3), (0.0105, 1e-3, 2)])
def test_observer_cadence(t_end, dt, cadence):
    g, p, s0 = droplet_setup(8)
    seen = []
    out = run(g, VariantConfig("nonconvective_ch", p, dt=dt), s0, t_end,
              lambda k, s, r: seen.append(k), cadence)
    n = math.ceil(t_end / dt - 1e-9)
    assert out.steps == n == number_of_steps(t_end, dt)
    assert seen == list(range(cadence, n + 1, cadence))
    assert out.final.time == pytest.approx(n * dt)


def test_bad_run_arguments():
    g, p, s0 = droplet_setup(8)
    vc = VariantConfig("full_bulk_surface", p)
    with pytest.raises(ValueError):
        run(g, vc, s0, -1.0)
    with pytest.raises(ValueError):
        run(g, vc, s0, 1.0, cadence=0)
    with pytest.raises(ValueError):
        VariantConfig("full_bulk_surface", p, dt=0.0)


def test_first_order_in_time():
    g, p, s0 = droplet_setup()
    T = 0.02
    sol = [run(g, VariantConfig("full_bulk_surface", p, dt=dt), s0, T).final
           for dt in (2e-3, 1e-3, 5e-4)]
    e1 = np.abs(sol[0].ch.phi - sol[1].ch.phi).max()
    e2 = np.abs(sol[1].ch.phi - sol[2].ch.phi).max()
    assert 1.5 <= e1 / e2 <= 2.5


def test_stratified_and_random_initial_conditions():
    g = build_grid(32, 32, 1.0, 1.0)
    p = make_params()
    st = initial_conditions(InitialSpec("stratified"), g, p)
    assert abs(st.ch.phi.sum()) <= 1e-10
    assert np.all(np.diff(st.ch.phi, axis=1) > 0)
    for seed in (0, 1, 2):
        r = initial_conditions(InitialSpec("random_smooth", mean=0.2, psi_mean=-0.1, seed=seed),
                               g, p)
        assert r.ch.phi.mean() == pytest.approx(0.2, abs=1e-12)
        assert np.allclose(r.ch.psi.mean(axis=1), -0.1, atol=1e-12)
        assert np.abs(r.ch.phi - 0.2).max() <= 0.1 + 1e-12


def test_droplet_initial_area():
    g = build_grid(128, 128, 1.0, 1.0)
    p = make_params(eps=0.01)
    s = initial_conditions(InitialSpec("droplet_on_wall", radius=0.2), g, p)
    # half disk of radius r: integral of phi = 2 * (pi r^2 / 2) - |Omega|
    integral = s.ch.phi.sum() * g.cell_volume
    assert integral == pytest.approx(math.pi * 0.2**2 - 1.0, rel=0.02)


@pytest.mark.parametrize("r0", [0.0, 0.5, 0.7])
def test_droplet_radius_rejected(r0):
    g = build_grid(16, 16, 1.0, 1.0)
    with pytest.raises(ValueError):
        initial_conditions(InitialSpec("droplet_on_wall", radius=r0), g, make_params())


def test_runs_are_deterministic():
    g, p, s0 = droplet_setup()
    vc = VariantConfig("full_bulk_surface", p, dt=1e-3)
    a = run(g, vc, s0, 1e-2).final
    b = run(g, vc, s0, 1e-2).final
    assert np.array_equal(a.ch.phi, b.ch.phi)
    assert np.array_equal(a.flow.u.y, b.flow.u.y)
    assert np.array_equal(a.flow.p, b.flow.p)


def test_non_finite_state_aborts_with_step_index(monkeypatch):
    g, p, s0 = droplet_setup(8)
    real = cp.ns_step
    count = {"n": 0}

    def faulty(*a, **kw):
        count["n"] += 1
        flow = real(*a, **kw)
        if count["n"] == 3:
            flow.u.x[2, 2] = np.nan
        return flow

    monkeypatch.setattr(cp, "ns_step", faulty)
    with pytest.raises(StepFailure) as info:
        run(g, VariantConfig("full_bulk_surface", p, dt=1e-3), s0, 1e-2)
    assert info.value.step == 3


def test_sub_solver_failure_carries_step(monkeypatch):
    g, p, s0 = droplet_setup(8)

    def boom(*a, **kw):
        raise StepFailure("no convergence", stage="pressure")

    monkeypatch.setattr(cp, "ns_step", boom)
    with pytest.raises(StepFailure) as info:
        run(g, VariantConfig("full_bulk_surface", p, dt=1e-3), s0, 1e-2)
    assert info.value.step == 1 and info.value.stage == "pressure"
    assert "step 1" in str(info.value)


@pytest.mark.parametrize("K,L", [(1.0, 1.0), (0.2, math.inf), (math.inf, 0.5)])
def test_coupled_energy_non_increasing(K, L):
    # the advective wall transport pairs exactly with the theta grad psi slip forcing;
    # the conservative form differs by theta psi div_G u_tau, which a static wall does not remove
    g, p, s0 = droplet_setup(K=K, L=L)
    E = []
    run(g, VariantConfig("full_bulk_surface", p, dt=1e-3, surface_transport="advective"), s0, 0.05,
        lambda k, s, r: E.append(r.E_total))
    assert max(np.diff(E)) <= 1e-8 * abs(E[0])


def test_nonconvective_variant_keeps_flow_at_rest():
    g, p, s0 = droplet_setup(8)
    out = run(g, VariantConfig("nonconvective_ch", p, dt=1e-3), s0, 1e-2)
    assert not np.any(out.final.flow.u.x) and not np.any(out.final.flow.u.y)
    assert out.last.E_kinetic == 0.0
