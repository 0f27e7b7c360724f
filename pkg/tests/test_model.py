import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bulksurf.geometry import FaceField
from bulksurf.model import (BoundaryCase, PhysParams, density, flux_coupling, h_of_K,
                            relative_flux, trace_coupling, validate_params, viscosity)

from conftest import make_params


def test_density_examples():
    p = make_params(rho1=1.0, rho2=3.0)
    assert density(p, 1.0) == 3.0
    assert density(p, -1.0) == 1.0
    assert density(p, 0.0) == 2.0
    assert density(p, 1.7) == 3.0 and density(p, -4.0) == 1.0


def test_viscosity_examples():
    assert np.all(viscosity(make_params(nu1=0.3, nu2=0.3), np.linspace(-2, 2, 9)) == 0.3)
    p = make_params(nu1=1.0, nu2=2.0)
    assert viscosity(p, 0.0) == 1.5
    assert viscosity(p, 3.0) == 2.0 and viscosity(p, -3.0) == 1.0


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-1, 1), b=st.floats(-1, 1), t=st.floats(0, 1))
def test_density_affine_on_band(a, b, t):
    p = make_params(rho1=0.5, rho2=4.0)
    lhs = density(p, t * a + (1 - t) * b)
    rhs = t * density(p, a) + (1 - t) * density(p, b)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_relative_flux_examples():
    g = FaceField(np.array([1.0]), np.array([0.0]))
    J = relative_flux(make_params(rho1=1.0, rho2=3.0, mob_bulk=1.0), g)
    assert J.x[0] == -1.0 and J.y[0] == 0.0
    J = relative_flux(make_params(rho1=2.0, rho2=2.0), g)
    assert np.all(J.x == 0)
    assert np.all(relative_flux(make_params(rho1=1.0, rho2=3.0), np.zeros(4)) == 0)


def test_relative_flux_antisymmetric_under_swap():
    g = np.array([0.3, -1.2, 2.0])
    a = relative_flux(make_params(rho1=1.0, rho2=3.0), g)
    b = relative_flux(make_params(rho1=3.0, rho2=1.0), g)
    np.testing.assert_array_equal(a, -b)


def test_h_of_K():
    assert h_of_K(0.0) == 0.0
    assert h_of_K(math.inf) == 0.0
    assert h_of_K(2.0) == 0.5
    with pytest.raises(ValueError):
        h_of_K(-1.0)


def test_coupling_cases():
    c = make_params(K=0.0, L=math.inf).coupling
    assert c.K_case is BoundaryCase.DIRICHLET and c.L_case is BoundaryCase.NEUMANN
    assert make_params(K=0.5).coupling.K_case is BoundaryCase.ROBIN


def test_coupling_coefficient_limits():
    hy = 0.01
    p = make_params(eps=0.05, K=0.0, mob_bulk=2.0, L=0.0)
    assert trace_coupling(p, hy) == pytest.approx(2 * 0.05 / hy)
    assert flux_coupling(p, hy) == pytest.approx(2 * 2.0 / hy)
    p = make_params(K=math.inf, L=math.inf)
    assert trace_coupling(p, hy) == 0.0 and flux_coupling(p, hy) == 0.0
    assert flux_coupling(make_params(mob_bulk=0.0), hy) == 0.0
    # Robin coefficient approaches 1/K as the cell shrinks
    p = make_params(K=4.0)
    assert trace_coupling(p, 1e-9) == pytest.approx(0.25, rel=1e-6)


def test_validation_collects_errors():
    with pytest.raises(ValueError) as exc:
        PhysParams(rho1=-1.0, eps=0.0, K=0.0, alpha=0.0)
    msg = str(exc.value)
    assert "rho1" in msg and "eps" in msg and "K=0 requires alpha" in msg


def test_validate_params_ok():
    assert validate_params(make_params()) == []
    with pytest.raises(ValueError):
        make_params(gamma_tau=-1.0)
    with pytest.raises(ValueError):
        make_params(L=-0.5)
