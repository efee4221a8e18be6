"""
Finite rotation / dihedral group actions on grid fields.

The group acts by (g.u)(x) = u(g^-1 x). On the cell-centred grid with even N,
multiples of 90 degrees and the axis mirrors are exact index permutations;
every other element is applied by bilinear interpolation.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .grid import GridField, norm_Lq


GROUP_KINDS = ('rotation', 'dihedral')
MIRROR = np.array([[1.0, 0.0], [0.0, -1.0]])
DEFECT_EPS = 1e-300
SNAP_TOL = 1e-12


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    g = np.array([[c, -s], [s, c]])
    # snap entries that are 0 or +-1 up to rounding so 90 degree multiples stay exact
    snapped = np.round(g)
    close = np.abs(g - snapped) < SNAP_TOL
    g[close] = snapped[close]
    return g


def is_signed_permutation(g: np.ndarray) -> bool:
    """True when g maps grid nodes onto grid nodes (entries in {-1, 0, 1})."""
    return bool(np.all(np.isin(g, (-1.0, 0.0, 1.0))))


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    """Cyclic rotation group C_k or dihedral group D_k as 2 x 2 orthogonal matrices."""

    kind: str
    k: int
    elements: Tuple[np.ndarray, ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def exact(self) -> bool:
        """Every element acts as an index permutation."""
        return all(is_signed_permutation(g) for g in self.elements)

    @property
    def satisfies_vf(self) -> bool:
        """k >= 4 for pure rotations, k >= 2 once the mirror is included."""
        return self.k >= 4 if self.kind == 'rotation' else self.k >= 2

    def exact_elements(self) -> Tuple[np.ndarray, ...]:
        return tuple(g for g in self.elements if is_signed_permutation(g))

    def __repr__(self) -> str:
        return f"SymmetryGroup(kind={self.kind!r}, k={self.k}, order={self.order})"


def _check_closure(elements) -> None:
    for a in elements:
        for b in elements:
            prod = a @ b
            if not any(np.allclose(prod, c, atol=1e-9) for c in elements):
                raise ValueError("Group elements are not closed under composition")


def make_group(kind: str, k: int) -> SymmetryGroup:
    """
    Build the rotation group of order k or the dihedral group of order 2k.

    Parameters:
    -----------
    kind : str
        'rotation' (z -> z e^{2 pi i/k}) or 'dihedral' (adds z -> conj(z))
    k : int
        Rotation order (>= 2)

    Returns:
    --------
    SymmetryGroup
    """
    if kind not in GROUP_KINDS:
        raise ValueError(f"Unknown symmetry kind: {kind}")
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k}")
    k = int(k)
    rotations = [rotation_matrix(2.0 * np.pi * j / k) for j in range(k)]
    elements = list(rotations)
    if kind == 'dihedral':
        elements += [r @ MIRROR for r in rotations]
    _check_closure(elements)
    for g in elements:
        g.setflags(write=False)
    return SymmetryGroup(kind, k, tuple(elements))


def apply(g: np.ndarray, u: GridField) -> GridField:
    """(g.u)(x) = u(g^-1 x)."""
    grid = u.grid
    N = grid.N
    centre = (N - 1) / 2.0
    idx = np.arange(N) - centre
    ci, cj = np.meshgrid(idx, idx, indexing='ij')
    g_inv = np.asarray(g).T
    src_i = g_inv[0, 0] * ci + g_inv[0, 1] * cj + centre
    src_j = g_inv[1, 0] * ci + g_inv[1, 1] * cj + centre

    if is_signed_permutation(g):
        ii = np.rint(src_i).astype(int)
        jj = np.rint(src_j).astype(int)
        return GridField(grid, u.values[ii, jj])

    values = ndimage.map_coordinates(u.values, [src_i, src_j], order=1,
                                     mode='constant', cval=0.0)
    return GridField(grid, values)


def group_average(G: SymmetryGroup, u: GridField) -> GridField:
    """Projection (1/#G) sum_g g.u onto the G-invariant fields."""
    total = np.zeros_like(u.values)
    for g in G.elements:
        total += apply(g, u).values
    return GridField(u.grid, total / G.order)


def symmetry_defect(G: SymmetryGroup, u: GridField) -> float:
    """max_g ||g.u - u||_2 / max(||u||_2, eps)."""
    scale = max(norm_Lq(u, 2.0), DEFECT_EPS)
    return max(norm_Lq(apply(g, u) - u, 2.0) for g in G.elements) / scale
