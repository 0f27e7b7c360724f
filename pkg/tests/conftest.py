import numpy as np
import pytest

from bulksurf.geometry import build_grid
from bulksurf.model import PhysParams


@pytest.fixture
def grid16():
    return build_grid(16, 16, 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_params(**kw):
    base = dict(rho1=1.0, rho2=1.0, nu1=1.0, nu2=1.0, mob_bulk=1.0, mob_surf=1.0,
                eps=0.05, delta=0.05, alpha=1.0, beta=1.0, K=1.0, L=1.0, gamma_tau=1.0)
    base.update(kw)
    return PhysParams(**base)


def smooth_cell(grid):
    X, Y = grid.cell_coords()
    return np.sin(2 * np.pi * X / grid.Lx) * np.cos(np.pi * Y / grid.Ly) + 0.3 * np.cos(
        4 * np.pi * X / grid.Lx)


def divfree_velocity(grid, amp=1.0):
    """Exactly divergence-free MAC field from a nodal stream function vanishing on the walls."""
    from bulksurf.geometry import FaceField
    x = np.arange(grid.nx) * grid.hx
    y = np.arange(grid.ny + 1) * grid.hy
    Xn, Yn = np.meshgrid(x, y, indexing="ij")
    S = amp * np.sin(np.pi * Yn / grid.Ly) ** 2 * (1 + 0.5 * np.sin(2 * np.pi * Xn / grid.Lx))
    ux = (S[:, 1:] - S[:, :-1]) / grid.hy
    uy = -(np.roll(S, -1, axis=0) - S) / grid.hx
    uy[:, [0, -1]] = 0.0
    return FaceField(ux, uy)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
