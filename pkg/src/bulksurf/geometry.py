"""
Staggered periodic-channel grid and discrete differential operators.

The domain is [0, Lx) x (0, Ly), periodic in x, with solid walls at
y = 0 (``BOTTOM``) and y = Ly (``TOP``).  Arrays are indexed ``[i, j]``
with ``i`` along x and ``j`` along y.

Layout (MAC staggering)
-----------------------
cell field      shape (nx, ny)      centres ((i+1/2) hx, (j+1/2) hy)
x-face field    shape (nx, ny)      points  (i hx, (j+1/2) hy)
y-face field    shape (nx, ny + 1)  points  ((i+1/2) hx, j hy); rows 0, ny are walls
wall field      shape (nx,)         points  ((i+1/2) hx) on each wall
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.sparse as sps


class SizingError(ValueError):
    """Invalid grid dimensions."""


class Wall(Enum):
    BOTTOM = 0
    TOP = 1

    @property
    def normal_y(self) -> float:
        """y-component of the outward unit normal."""
        return -1.0 if self is Wall.BOTTOM else 1.0


WALLS = (Wall.BOTTOM, Wall.TOP)


class FaceField(NamedTuple):
    """Face-centred vector field: ``x`` on vertical faces, ``y`` on horizontal faces."""

    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "FaceField":
        return FaceField(self.x.copy(), self.y.copy())

    def __add__(self, other):
        return FaceField(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return FaceField(self.x - other.x, self.y - other.y)

    def __mul__(self, a):
        return FaceField(self.x * a, self.y * a)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float
    Ly: float
    hx: float = field(init=False)
    hy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "hx", self.Lx / self.nx)
        object.__setattr__(self, "hy", self.Ly / self.ny)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def wall_length(self) -> float:
        """Total length of the boundary (both walls)."""
        return 2.0 * self.Lx

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def xf(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def yf(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def cell_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def xface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xf, self.yc, indexing="ij")

    def yface_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yf, indexing="ij")

    def zeros_cell(self) -> np.ndarray:
        return np.zeros(self.cell_shape)

    def zeros_face(self) -> FaceField:
        return FaceField(np.zeros((self.nx, self.ny)), np.zeros((self.nx, self.ny + 1)))

    def zeros_wall(self) -> np.ndarray:
        return np.zeros(self.nx)

    def wall_row(self, wall: Wall) -> int:
        """Index of the cell row adjacent to ``wall``."""
        return 0 if wall is Wall.BOTTOM else self.ny - 1


def build_grid(nx: int, ny: int, Lx: float, Ly: float) -> Grid:
    if int(nx) != nx or int(ny) != ny:
        raise SizingError(f"cell counts must be integers, got nx={nx}, ny={ny}")
    if nx < 8 or ny < 8:
        raise SizingError(f"need nx, ny >= 8, got nx={nx}, ny={ny}")
    if not (np.isfinite(Lx) and np.isfinite(Ly)) or Lx <= 0 or Ly <= 0:
        raise SizingError(f"domain extents must be positive, got Lx={Lx}, Ly={Ly}")
    return Grid(int(nx), int(ny), float(Lx), float(Ly))


def _check(a: np.ndarray, shape, what: str):
    if np.shape(a) != tuple(shape):
        raise ValueError(f"{what}: expected shape {tuple(shape)}, got {np.shape(a)}")


# ---------------------------------------------------------------------------
# bulk operators
# ---------------------------------------------------------------------------

def grad(grid: Grid, c: np.ndarray) -> FaceField:
    """Centred face gradient of a cell field.

    Wall rows of the y-component are left at zero; the normal derivative at a
    wall needs a boundary value and is handled by :func:`normal_derivative`.
    """
    _check(c, grid.cell_shape, "grad")
    gx = (c - np.roll(c, 1, axis=0)) / grid.hx
    gy = np.zeros((grid.nx, grid.ny + 1))
    gy[:, 1:-1] = (c[:, 1:] - c[:, :-1]) / grid.hy
    return FaceField(gx, gy)


def div(grid: Grid, v: FaceField) -> np.ndarray:
    """Conservative cell divergence of a face field (wall fluxes included as given)."""
    _check(v.x, (grid.nx, grid.ny), "div (x-component)")
    _check(v.y, (grid.nx, grid.ny + 1), "div (y-component)")
    return (np.roll(v.x, -1, axis=0) - v.x) / grid.hx + (v.y[:, 1:] - v.y[:, :-1]) / grid.hy


def laplacian(grid: Grid, c: np.ndarray) -> np.ndarray:
    """Five-point Laplacian with zero wall flux (homogeneous Neumann)."""
    return div(grid, grad(grid, c))


def inner_cell(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b) * grid.cell_volume)


def inner_face(grid: Grid, v: FaceField, w: FaceField) -> float:
    """Face inner product; wall rows of the y-component carry no weight."""
    s = np.sum(v.x * w.x) + np.sum(v.y[:, 1:-1] * w.y[:, 1:-1])
    return float(s * grid.cell_volume)


def wall_flux_term(grid: Grid, v: FaceField, c: np.ndarray) -> float:
    """Boundary term of the discrete Green identity: sum over walls of c (v.n) hx."""
    top = np.sum(v.y[:, -1] * c[:, -1])
    bottom = -np.sum(v.y[:, 0] * c[:, 0])
    return float((top + bottom) * grid.hx)


def interpolate_to_cells(grid: Grid, v: FaceField) -> tuple[np.ndarray, np.ndarray]:
    """Average face components to cell centres."""
    cx = 0.5 * (v.x + np.roll(v.x, -1, axis=0))
    cy = 0.5 * (v.y[:, 1:] + v.y[:, :-1])
    return cx, cy


def cells_to_xfaces(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.roll(c, 1, axis=0))


def cells_to_yfaces(c: np.ndarray) -> np.ndarray:
    """Average to horizontal faces; wall rows take the adjacent cell value."""
    nx, ny = c.shape
    out = np.empty((nx, ny + 1))
    out[:, 1:-1] = 0.5 * (c[:, 1:] + c[:, :-1])
    out[:, 0] = c[:, 0]
    out[:, -1] = c[:, -1]
    return out


# ---------------------------------------------------------------------------
# wall operators (flat periodic curves)
# ---------------------------------------------------------------------------

def surface_grad(grid: Grid, w: np.ndarray) -> np.ndarray:
    """Centred arclength derivative of a wall field, evaluated at the wall nodes x = i hx."""
    _check(w, (grid.nx,), "surface_grad")
    return (w - np.roll(w, 1)) / grid.hx


def surface_div(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Divergence of a nodal tangential flux back to wall cell centres."""
    _check(f, (grid.nx,), "surface_div")
    return (np.roll(f, -1) - f) / grid.hx


def surface_laplacian(grid: Grid, w: np.ndarray) -> np.ndarray:
    _check(w, (grid.nx,), "surface_laplacian")
    return (np.roll(w, -1) - 2.0 * w + np.roll(w, 1)) / grid.hx**2


def wall_values(grid: Grid, c: np.ndarray, wall: Wall) -> np.ndarray:
    """Cell values in the row adjacent to ``wall``."""
    return c[:, grid.wall_row(wall)]


def normal_derivative(grid: Grid, c: np.ndarray, wall: Wall,
                      boundary_value: np.ndarray | None = None) -> np.ndarray:
    """Second-order one-sided outward normal derivative at a wall.

    With ``boundary_value`` (the trace of ``c`` on the wall) the stencil uses
    the wall value and the two nearest cell centres; without it, the three
    nearest cell centres.  Both are exact for quadratics in y.
    """
    _check(c, grid.cell_shape, "normal_derivative")
    h = grid.hy
    if wall is Wall.BOTTOM:
        c0, c1, c2 = c[:, 0], c[:, 1], c[:, 2]
    else:
        c0, c1, c2 = c[:, -1], c[:, -2], c[:, -3]
    # derivative along the inward direction, then flip to outward
    if boundary_value is None:
        d_in = (-2.0 * c0 + 3.0 * c1 - c2) / h
    else:
        _check(boundary_value, (grid.nx,), "normal_derivative boundary value")
        d_in = (-8.0 * boundary_value + 9.0 * c0 - c1) / (3.0 * h)
    return -d_in


# ---------------------------------------------------------------------------
# sparse operator matrices (cached per grid)
# ---------------------------------------------------------------------------

def cell_index(grid: Grid) -> np.ndarray:
    return np.arange(grid.ncells).reshape(grid.cell_shape)


_OPS_CACHE: dict[Grid, dict] = {}


def operator_matrices(grid: Grid) -> dict:
    """Sparse gradient/divergence/Laplacian matrices for a grid.

    Keys
    ----
    ``Gx`` : cells -> x-faces, shape (nx*ny, nx*ny)
    ``Gy`` : cells -> interior y-faces, shape (nx*(ny-1), nx*ny)
    ``lap`` : Neumann five-point Laplacian on cells
    ``lap_wall`` : periodic 1D Laplacian on a wall field
    ``P_bottom``, ``P_top`` : selection of the wall-adjacent cell rows, shape (nx, nx*ny)
    """
    ops = _OPS_CACHE.get(grid)
    if ops is not None:
        return ops
    nx, ny = grid.nx, grid.ny
    idx = cell_index(grid)
    n = grid.ncells

    # x-faces: face (i, j) = (c[i, j] - c[i-1, j]) / hx
    rows = idx.ravel()
    left = np.roll(idx, 1, axis=0).ravel()
    Gx = sps.csr_matrix(
        (np.concatenate([np.full(n, 1.0 / grid.hx), np.full(n, -1.0 / grid.hx)]),
         (np.concatenate([rows, rows]), np.concatenate([idx.ravel(), left]))),
        shape=(n, n))

    # interior y-faces (i, j), j = 1..ny-1, ordered as (nx, ny-1)
    m = nx * (ny - 1)
    fy = np.arange(m)
    up = idx[:, 1:].ravel()
    down = idx[:, :-1].ravel()
    Gy = sps.csr_matrix(
        (np.concatenate([np.full(m, 1.0 / grid.hy), np.full(m, -1.0 / grid.hy)]),
         (np.concatenate([fy, fy]), np.concatenate([up, down]))),
        shape=(m, n))

    lap = (-(Gx.T @ Gx) - (Gy.T @ Gy)).tocsr()
    lap.sort_indices()

    e = np.ones(nx)
    lap_wall = sps.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(nx, nx), format="lil")
    lap_wall[0, nx - 1] = 1.0
    lap_wall[nx - 1, 0] = 1.0
    lap_wall = (lap_wall.tocsr() / grid.hx**2).tocsr()
    lap_wall.sort_indices()

    def select(col):
        return sps.csr_matrix((np.ones(nx), (np.arange(nx), idx[:, col])), shape=(nx, n))

    ops = {
        "Gx": Gx,
        "Gy": Gy,
        "lap": lap,
        "lap_wall": lap_wall,
        "P_bottom": select(0),
        "P_top": select(ny - 1),
    }
    _OPS_CACHE[grid] = ops
    return ops
