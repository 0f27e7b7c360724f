"""Operator checks: adjointness, summation by parts and stencil order."""
import math

import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bulksurf import geometry as geo
from bulksurf.geometry import FaceField, SizingError, Wall, build_grid

# tolerances quoted by the operator suite
ADJ_TOL = 1e-12
ORDER_BAND = (1.8, 2.2)


def random_face(grid, rng, wall_flux=True):
    vy = rng.standard_normal((grid.nx, grid.ny + 1))
    if not wall_flux:
        vy[:, [0, -1]] = 0.0
    return FaceField(rng.standard_normal(grid.cell_shape), vy)


def observed_order(errs):
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


# -- grid ----------------------------------------------------------------

@pytest.mark.parametrize("args,h", [((8, 8, 1.0, 1.0), (0.125, 0.125)),
                                    ((16, 8, 2.0, 1.0), (0.125, 0.125))])
def test_build_grid_spacings(args, h):
    g = build_grid(*args)
    assert (g.hx, g.hy) == h
    assert g.wall_length == 2 * g.Lx


@pytest.mark.parametrize("args", [(8, 8, -1.0, 1.0), (8, 8, 1.0, 0.0), (7, 8, 1.0, 1.0),
                                  (8, 4, 1.0, 1.0), (8, 8, float("inf"), 1.0)])
def test_build_grid_rejects(args):
    with pytest.raises(SizingError):
        build_grid(*args)


def test_wall_normals():
    assert Wall.BOTTOM.normal_y == -1.0
    assert Wall.TOP.normal_y == 1.0


# -- bulk operators --------------------------------------------------------

def test_grad_of_constant_is_zero(grid16):
    g = geo.grad(grid16, np.full(grid16.cell_shape, 3.7))
    assert np.all(g.x == 0) and np.all(g.y == 0)


def test_div_of_uniform_flow_is_zero(grid16):
    v = FaceField(np.ones(grid16.cell_shape), np.zeros((16, 17)))
    assert np.abs(geo.div(grid16, v)).max() == 0.0


def test_shape_mismatch_raises(grid16):
    with pytest.raises(ValueError):
        geo.grad(grid16, np.zeros((16, 15)))
    with pytest.raises(ValueError):
        geo.div(grid16, FaceField(np.zeros((16, 16)), np.zeros((16, 16))))
    with pytest.raises(ValueError):
        geo.surface_grad(grid16, np.zeros(15))


def _grad_sin_error(n):
    g = build_grid(n, n, 2.0, 1.0)
    X, _ = g.cell_coords()
    k = 2 * np.pi / g.Lx
    gx = geo.grad(g, np.sin(k * X)).x
    Xf, _ = g.xface_coords()
    return np.abs(gx - k * np.cos(k * Xf)).max()


def test_grad_second_order():
    errs = [_grad_sin_error(n) for n in (16, 32, 64)]
    for p in observed_order(errs):
        assert ORDER_BAND[0] <= p <= ORDER_BAND[1]


def test_grad_y_second_order():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0)
        _, Y = g.cell_coords()
        gy = geo.grad(g, np.cos(np.pi * Y)).y[:, 1:-1]
        _, Yf = g.yface_coords()
        errs.append(np.abs(gy + np.pi * np.sin(np.pi * Yf[:, 1:-1])).max())
    for p in observed_order(errs):
        assert ORDER_BAND[0] <= p <= ORDER_BAND[1]


def test_div_grad_eigenfunction():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0)
        X, _ = g.cell_coords()
        lap = geo.div(g, geo.grad(g, np.sin(2 * np.pi * X)))
        errs.append(np.abs(lap + (2 * np.pi) ** 2 * np.sin(2 * np.pi * X)).max())
    for p in observed_order(errs):
        assert ORDER_BAND[0] <= p <= ORDER_BAND[1]


def test_laplacian_neumann_cosine_order():
    # cos(pi y) has zero normal derivative at both walls
    errs = []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0)
        X, Y = g.cell_coords()
        c = np.cos(np.pi * Y) * np.cos(2 * np.pi * X)
        exact = -(np.pi**2 + 4 * np.pi**2) * c
        errs.append(np.abs(geo.laplacian(g, c) - exact).max())
    for p in observed_order(errs):
        assert ORDER_BAND[0] <= p <= ORDER_BAND[1]


def test_green_identity_exact(grid16, rng):
    # <div v, c> = -<v, grad c> + sum_walls c (v.n) hx
    for _ in range(5):
        c = rng.standard_normal(grid16.cell_shape)
        v = random_face(grid16, rng)
        lhs = geo.inner_cell(grid16, geo.div(grid16, v), c)
        rhs = -geo.inner_face(grid16, v, geo.grad(grid16, c)) + geo.wall_flux_term(grid16, v, c)
        scale = abs(geo.inner_cell(grid16, np.abs(geo.div(grid16, v)), np.abs(c)))
        assert abs(lhs - rhs) <= ADJ_TOL * scale


@settings(max_examples=30, deadline=None)
@given(nx=st.integers(8, 20), ny=st.integers(8, 20), seed=st.integers(0, 2**31))
def test_adjointness_property(nx, ny, seed):
    g = build_grid(nx, ny, 1.3, 0.7)
    r = np.random.default_rng(seed)
    c = r.standard_normal(g.cell_shape)
    v = random_face(g, r, wall_flux=False)
    lhs = geo.inner_cell(g, geo.div(g, v), c)
    rhs = -geo.inner_face(g, v, geo.grad(g, c))
    scale = geo.inner_cell(g, np.abs(geo.div(g, v)), np.abs(c)) + 1e-300
    assert abs(lhs - rhs) <= ADJ_TOL * scale


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5, allow_subnormal=False), b=st.floats(-5, 5, allow_subnormal=False),
       seed=st.integers(0, 2**31))
def test_operators_linear(a, b, seed):
    g = build_grid(8, 10, 1.0, 1.0)
    r = np.random.default_rng(seed)
    f, h = r.standard_normal(g.cell_shape), r.standard_normal(g.cell_shape)
    lhs = geo.laplacian(g, a * f + b * h)
    rhs = a * geo.laplacian(g, f) + b * geo.laplacian(g, h)
    scale = abs(a) * np.abs(geo.laplacian(g, f)).max() + abs(b) * np.abs(geo.laplacian(g, h)).max()
    assert np.abs(lhs - rhs).max() <= 1e-13 * scale
    w1, w2 = r.standard_normal(8), r.standard_normal(8)
    assert np.allclose(geo.surface_grad(g, a * w1 + b * w2),
                       a * geo.surface_grad(g, w1) + b * geo.surface_grad(g, w2), atol=1e-9)


def test_laplacian_symmetric_negative_semidefinite(grid16, rng):
    c = rng.standard_normal(grid16.cell_shape)
    d = rng.standard_normal(grid16.cell_shape)
    l_cd = geo.inner_cell(grid16, geo.laplacian(grid16, c), d)
    l_dc = geo.inner_cell(grid16, geo.laplacian(grid16, d), c)
    assert abs(l_cd - l_dc) <= ADJ_TOL * abs(l_cd)
    assert geo.inner_cell(grid16, geo.laplacian(grid16, c), c) < 0
    # constants span the kernel and the total flux vanishes
    assert abs(np.sum(geo.laplacian(grid16, c))) <= 1e-10 * np.abs(c).sum() / grid16.hx**2


def test_total_divergence_telescopes(grid16, rng):
    v = random_face(grid16, rng, wall_flux=False)
    assert abs(np.sum(geo.div(grid16, v))) <= 1e-12 * np.abs(geo.div(grid16, v)).sum()


# -- surface operators -----------------------------------------------------

def test_surface_sbp(grid16, rng):
    for _ in range(5):
        w = rng.standard_normal(grid16.nx)
        lhs = np.sum(w * geo.surface_laplacian(grid16, w)) * grid16.hx
        rhs = -np.sum(geo.surface_grad(grid16, w) ** 2) * grid16.hx
        assert abs(lhs - rhs) <= ADJ_TOL * abs(rhs)


@settings(max_examples=30, deadline=None)
@given(w=arrays(np.float64, 12, elements=st.floats(-1e3, 1e3)),
       f=arrays(np.float64, 12, elements=st.floats(-1e3, 1e3)))
def test_surface_grad_div_adjoint(w, f):
    g = build_grid(12, 8, 1.0, 1.0)
    lhs = np.sum(geo.surface_div(g, f) * w)
    rhs = -np.sum(f * geo.surface_grad(g, w))
    scale = np.sum(np.abs(geo.surface_div(g, f) * w)) + np.sum(np.abs(f * geo.surface_grad(g, w)))
    assert abs(lhs - rhs) <= ADJ_TOL * scale + 1e-300


def test_surface_laplacian_is_div_grad(grid16, rng):
    w = rng.standard_normal(grid16.nx)
    np.testing.assert_allclose(geo.surface_laplacian(grid16, w),
                               geo.surface_div(grid16, geo.surface_grad(grid16, w)),
                               rtol=1e-12, atol=1e-10)


def test_surface_operators_constant(grid16):
    w = np.full(16, 2.5)
    assert np.all(geo.surface_grad(grid16, w) == 0)
    assert np.all(geo.surface_laplacian(grid16, w) == 0)


def test_surface_stencils_second_order():
    eg, el = [], []
    for n in (16, 32, 64):
        g = build_grid(n, 8, 1.0, 1.0)
        k = 2 * np.pi / g.Lx
        w = np.sin(k * g.xc)
        eg.append(np.abs(geo.surface_grad(g, w) - k * np.cos(k * g.xf)).max())
        el.append(np.abs(geo.surface_laplacian(g, w) + k**2 * w).max())
    for p in observed_order(eg) + observed_order(el):
        assert ORDER_BAND[0] <= p <= ORDER_BAND[1]


# -- normal derivative -------------------------------------------------------

def test_normal_derivative_linear(grid16):
    _, Y = grid16.cell_coords()
    assert np.allclose(geo.normal_derivative(grid16, Y, Wall.BOTTOM), -1.0, atol=1e-12)
    assert np.allclose(geo.normal_derivative(grid16, Y, Wall.TOP), 1.0, atol=1e-12)
    c = np.full(grid16.cell_shape, 4.0)
    for wall in geo.WALLS:
        assert np.allclose(geo.normal_derivative(grid16, c, wall), 0.0, atol=1e-12)


def test_normal_derivative_quadratic_exact(grid16):
    _, Y = grid16.cell_coords()
    c = Y**2
    assert np.allclose(geo.normal_derivative(grid16, c, Wall.BOTTOM), 0.0, atol=1e-12)
    assert np.allclose(geo.normal_derivative(grid16, c, Wall.TOP), 2.0, atol=1e-12)
    tb = np.zeros(16)
    tt = np.ones(16)
    assert np.allclose(geo.normal_derivative(grid16, c, Wall.BOTTOM, tb), 0.0, atol=1e-12)
    assert np.allclose(geo.normal_derivative(grid16, c, Wall.TOP, tt), 2.0, atol=1e-12)


def test_normal_derivative_second_order():
    errs = []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0)
        _, Y = g.cell_coords()
        c = np.exp(Y)
        errs.append(max(abs(geo.normal_derivative(g, c, Wall.BOTTOM) + 1.0).max(),
                        abs(geo.normal_derivative(g, c, Wall.TOP) - math.e).max()))
    for p in observed_order(errs):
        assert p >= 1.8


# -- matrix forms ------------------------------------------------------------

def test_operator_matrices_match_functions(grid16, rng):
    ops = geo.operator_matrices(grid16)
    c = rng.standard_normal(grid16.cell_shape)
    g = geo.grad(grid16, c)
    np.testing.assert_allclose(ops["Gx"] @ c.ravel(), g.x.ravel(), atol=1e-12)
    np.testing.assert_allclose(ops["Gy"] @ c.ravel(), g.y[:, 1:-1].ravel(), atol=1e-12)
    np.testing.assert_allclose(ops["lap"] @ c.ravel(), geo.laplacian(grid16, c).ravel(),
                               rtol=1e-12, atol=1e-9)
    w = rng.standard_normal(16)
    np.testing.assert_allclose(ops["lap_wall"] @ w, geo.surface_laplacian(grid16, w),
                               rtol=1e-12, atol=1e-9)
    np.testing.assert_array_equal(ops["P_bottom"] @ c.ravel(), c[:, 0])
    np.testing.assert_array_equal(ops["P_top"] @ c.ravel(), c[:, -1])
    lap = ops["lap"]
    assert abs(lap - lap.T).max() == 0.0
    assert sps.isspmatrix_csr(lap) or isinstance(lap, sps.csr_array)


def test_cells_to_faces_and_back(grid16, rng):
    c = rng.standard_normal(grid16.cell_shape)
    assert np.allclose(geo.cells_to_xfaces(np.ones_like(c)), 1.0)
    assert np.allclose(geo.cells_to_yfaces(np.ones_like(c)), 1.0)
    cx, cy = geo.interpolate_to_cells(grid16, FaceField(np.ones_like(c), np.zeros((16, 17))))
    assert np.allclose(cx, 1.0) and np.allclose(cy, 0.0)
