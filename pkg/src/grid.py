"""
Uniform cell-centred grid on [-L, L]^2, field storage, quadrature and norms.

This module holds the computational box standing in for R^2: node layout,
midpoint quadrature, the discrete Dirichlet form, the weighted norms of the
X_p space, potentials V(x), and CSV dumps of grid fields.
"""

import os
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd


DECAY_TOL = 1e-10
POTENTIAL_KINDS = ('constant', 'radial', 'ksymmetric')


@dataclass(frozen=True)
class Grid2D:
    """Cell-centred N x N grid on [-L, L]^2 (N even)."""

    L: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates along one axis, symmetric about 0."""
        return -self.L + self.h * (np.arange(self.N) + 0.5)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        # 'ij' indexing: values[i, j] = u(x_i, y_j)
        return np.meshgrid(self.nodes, self.nodes, indexing='ij')

    @cached_property
    def radius(self) -> np.ndarray:
        x, y = self.mesh
        return np.hypot(x, y)


@dataclass
class GridField:
    """Samples u(x_ij) of a real function on a Grid2D."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.N, self.grid.N):
            raise ValueError(
                f"Field shape {self.values.shape} does not match grid N={self.grid.N}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Field contains non-finite values")

    def with_values(self, values: np.ndarray) -> 'GridField':
        return GridField(self.grid, values)

    def copy(self) -> 'GridField':
        return GridField(self.grid, self.values.copy())

    def __add__(self, other: 'GridField') -> 'GridField':
        _check_same_grid(self, other)
        return GridField(self.grid, self.values + other.values)

    def __sub__(self, other: 'GridField') -> 'GridField':
        _check_same_grid(self, other)
        return GridField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> 'GridField':
        return GridField(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> 'GridField':
        return GridField(self.grid, -self.values)


def _check_same_grid(u: GridField, v: GridField) -> None:
    if u.grid != v.grid:
        raise ValueError("Fields live on different grids")


def make_grid(L: float, N: int) -> Grid2D:
    """
    Build the cell-centred grid on [-L, L]^2.

    Parameters:
    -----------
    L : float
        Truncation half-width (> 0)
    N : int
        Points per axis; must be even and >= 8 so that x -> -x, mirrors and
        90 degree rotations are exact index permutations

    Returns:
    --------
    Grid2D
        Grid with spacing h = 2L/N
    """
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if int(N) != N:
        raise ValueError(f"N must be an integer, got {N}")
    N = int(N)
    if N % 2 != 0:
        raise ValueError(f"odd N: N={N} (N must be even)")
    if N < 8:
        raise ValueError(f"N must be >= 8, got {N}")
    return Grid2D(float(L), N)


def field_from_function(grid: Grid2D, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> GridField:
    """Sample func(x, y) at every node."""
    x, y = grid.mesh
    return GridField(grid, np.broadcast_to(func(x, y), (grid.N, grid.N)).astype(float))


def zeros(grid: Grid2D) -> GridField:
    return GridField(grid, np.zeros((grid.N, grid.N)))


def quadrature(grid: Grid2D, values: np.ndarray) -> float:
    """Midpoint rule h^2 * sum on a raw array (no finiteness check)."""
    return float(grid.h ** 2 * np.sum(values))


def integrate(w: GridField) -> float:
    """Midpoint quadrature h^2 sum_ij w(x_ij) of a grid field."""
    return quadrature(w.grid, w.values)


def boundary_ring_max(u: GridField) -> float:
    """Largest |u| on the outermost ring of nodes."""
    v = np.abs(u.values)
    return float(max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max()))


def check_decay(u: GridField, decay_tol: float = DECAY_TOL) -> bool:
    """Warn (do not raise) when u does not vanish on the outer ring."""
    ring = boundary_ring_max(u)
    if ring >= decay_tol:
        warnings.warn(
            f"Field does not decay on the boundary ring (max |u| = {ring:.3e} >= {decay_tol:.1e}); "
            "zero extension outside the box is inaccurate",
            stacklevel=2,
        )
        return False
    return True


# ---------------------------------------------------------------------------
# Discrete Dirichlet form
# ---------------------------------------------------------------------------

def face_differences(u: GridField) -> Tuple[np.ndarray, np.ndarray]:
    """
    Difference quotients on cell faces with zero extension outside the box.

    Returns arrays of shape (N+1, N) and (N, N+1); each entry is centred on the
    face between two neighbouring nodes.
    """
    h = u.grid.h
    up = np.pad(u.values, 1)
    dx = (up[1:, 1:-1] - up[:-1, 1:-1]) / h
    dy = (up[1:-1, 1:] - up[1:-1, :-1]) / h
    return dx, dy


def dirichlet_form(u: GridField, v: GridField) -> float:
    """Discrete integral of grad u . grad v."""
    _check_same_grid(u, v)
    ux, uy = face_differences(u)
    vx, vy = face_differences(v)
    return float(u.grid.h ** 2 * (np.sum(ux * vx) + np.sum(uy * vy)))


def neg_laplacian(u: GridField) -> GridField:
    """
    5-point -Delta_h u with zero extension.

    integrate(neg_laplacian(u) * v) equals dirichlet_form(u, v) exactly.
    """
    h = u.grid.h
    up = np.pad(u.values, 1)
    lap = (4.0 * up[1:-1, 1:-1] - up[2:, 1:-1] - up[:-2, 1:-1]
           - up[1:-1, 2:] - up[1:-1, :-2]) / h ** 2
    return GridField(u.grid, lap)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """
    Nonnegative potential V(x).

    kind 'constant'   : V = value
    kind 'radial'     : V = value + amplitude * exp(-|x|^2 / width^2)
    kind 'ksymmetric' : V = value + amplitude * Re((x + iy)^k) * exp(-|x|^2 / width^2),
                        invariant under rotation by 2pi/k and under z -> conj(z)
    """

    kind: str = 'constant'
    value: float = 1.0
    amplitude: float = 0.0
    width: float = 1.0
    k: int = 4

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == 'constant':
            return np.full(np.broadcast(x, y).shape, self.value)
        envelope = np.exp(-(x ** 2 + y ** 2) / self.width ** 2)
        if self.kind == 'radial':
            return self.value + self.amplitude * envelope
        return self.value + self.amplitude * np.real((x + 1j * y) ** self.k) * envelope

    @property
    def is_constant(self) -> bool:
        return self.kind == 'constant' or self.amplitude == 0.0


def make_potential(kind: str = 'constant', value: float = 1.0, amplitude: float = 0.0,
                   width: float = 1.0, k: int = 4) -> Potential:
    """
    Build a potential and check V >= 0 analytically.

    Parameters:
    -----------
    kind : str
        One of 'constant', 'radial', 'ksymmetric'
    value : float
        Background level (> 0 so that liminf V > 0 at infinity)
    amplitude, width : float
        Shape of the localised perturbation
    k : int
        Rotation order for 'ksymmetric'

    Returns:
    --------
    Potential
    """
    if kind not in POTENTIAL_KINDS:
        raise ValueError(f"Unknown potential kind: {kind}")
    if value < 0:
        raise ValueError(f"Potential value must be >= 0, got {value}")
    if width <= 0:
        raise ValueError(f"Potential width must be positive, got {width}")
    if kind == 'radial' and value + min(amplitude, 0.0) < 0:
        raise ValueError("Radial potential would become negative")
    if kind == 'ksymmetric':
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        # max over r of r^k exp(-r^2/w^2) is attained at r^2 = k w^2 / 2
        peak = (k * width ** 2 / 2.0) ** (k / 2.0) * np.exp(-k / 2.0)
        if abs(amplitude) * peak > value:
            raise ValueError("k-symmetric potential would become negative")
    return Potential(kind, float(value), float(amplitude), float(width), int(k))


@lru_cache(maxsize=32)
def sample_potential(V: Potential, grid: Grid2D) -> np.ndarray:
    """V at every node (cached, read-only)."""
    x, y = grid.mesh
    values = np.broadcast_to(V(x, y), (grid.N, grid.N)).astype(float)
    values.setflags(write=False)
    return values


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def inner_H(u: GridField, v: GridField, V: Potential) -> float:
    """<u, v> = int (grad u . grad v + V u v)."""
    _check_same_grid(u, v)
    Vs = sample_potential(V, u.grid)
    return dirichlet_form(u, v) + quadrature(u.grid, Vs * u.values * v.values)


def norm_H(u: GridField, V: Potential) -> float:
    """||u|| = (int |grad u|^2 + V u^2)^(1/2)."""
    sq = inner_H(u, u, V)
    if np.isnan(sq):
        raise ValueError("NaN in H-norm evaluation")
    return float(np.sqrt(max(sq, 0.0)))


def norm_star(u: GridField, p: float) -> float:
    """||u||_* = (int ln(1+|x|) |u|^p)^(1/p)."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    weight = np.log1p(u.grid.radius)
    return quadrature(u.grid, weight * np.abs(u.values) ** p) ** (1.0 / p)


def norm_Lq(u: GridField, q: float) -> float:
    """Standard L^q norm."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return quadrature(u.grid, np.abs(u.values) ** q) ** (1.0 / q)


def norm_X(u: GridField, V: Potential, p: float) -> float:
    """||u||_{X_p} = ||u|| + ||u||_*."""
    return norm_H(u, V) + norm_star(u, p)


# ---------------------------------------------------------------------------
# CSV dumps
# ---------------------------------------------------------------------------

def save_field(u: GridField, output_path: str) -> None:
    """
    Save a field as CSV rows "x,y,u" in row-major node order.

    Parameters:
    -----------
    u : GridField
        Field to save
    output_path : str
        Path to save CSV file
    """
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    x, y = u.grid.mesh
    df = pd.DataFrame({'x': x.ravel(), 'y': y.ravel(), 'u': u.values.ravel()})
    df.to_csv(output_path, index=False, float_format='%.17g')


def load_field(input_path: str, grid: Optional[Grid2D] = None) -> GridField:
    """
    Load a field written by save_field.

    Parameters:
    -----------
    input_path : str
        Path to CSV file
    grid : Grid2D, optional
        Expected grid; inferred from the node coordinates when omitted

    Returns:
    --------
    GridField
    """
    df = pd.read_csv(input_path, float_precision='round_trip')
    if list(df.columns) != ['x', 'y', 'u']:
        raise ValueError(f"Expected columns x,y,u in {input_path}")
    N = int(round(np.sqrt(len(df))))
    if N * N != len(df):
        raise ValueError(f"{input_path} does not hold a square grid ({len(df)} rows)")
    xs = df['x'].to_numpy().reshape(N, N)[:, 0]
    h = xs[1] - xs[0]
    inferred = make_grid(float(-xs[0] + h / 2.0), N)
    if grid is None:
        grid = inferred
    elif grid.N != inferred.N or not np.isclose(grid.L, inferred.L):
        raise ValueError(f"{input_path} holds a grid (L={inferred.L}, N={N}) "
                         f"different from the expected (L={grid.L}, N={grid.N})")
    return GridField(grid, df['u'].to_numpy().reshape(N, N))
