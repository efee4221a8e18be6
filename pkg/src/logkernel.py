"""
Logarithmic convolution kernels on the grid.

Bilinear forms A_i(w1, w2) = iint K_i(|x - y|) w1(x) w2(y) dx dy for
K_1 = ln(1 + r), K_2 = ln(1 + 1/r), K_0 = ln r = K_1 - K_2, the functionals
I_i(u) = A_i(|u|^p, |u|^p), the planar Newton potential and the G_alpha
kernel family. Kernels are sampled once on the (2N-1) x (2N-1) difference
lattice; the r = 0 cell holds the exact cell average of the kernel.
"""

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import fft as sp_fft
from scipy import integrate

from .grid import Grid2D, GridField, norm_Lq, norm_star, quadrature


KERNELS = ('ln', 'ln1p', 'ln1p_inv', 'g_alpha')
WHICH_KERNEL = {0: 'ln', 1: 'ln1p', 2: 'ln1p_inv'}
DIRECT_MAX_N = 64
SYM_TOL = 1e-10


def _fft_workers() -> Optional[int]:
    """Worker cap for scipy.fft from LOGSP_THREADS (None = scipy default)."""
    value = os.getenv('LOGSP_THREADS')
    if value is None or value.strip() == '':
        return None
    workers = int(value)
    if workers < 1:
        raise ValueError(f"LOGSP_THREADS must be >= 1, got {value}")
    return workers


# ---------------------------------------------------------------------------
# Kernel functions and singular-cell averages
# ---------------------------------------------------------------------------

def g_alpha_kernel(r, alpha: float):
    """
    G_alpha(r) = (r^-alpha - 1) / alpha, which tends to -ln r as alpha -> 0+.

    Parameters:
    -----------
    r : float or array
        Distance (> 0)
    alpha : float
        Exponent in (0, 1)
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("G_alpha kernel requires r > 0")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    value = np.expm1(-alpha * np.log(r)) / alpha
    return float(value) if value.ndim == 0 else value


def _kernel_values(kernel: str, r: np.ndarray, alpha: Optional[float]) -> np.ndarray:
    if kernel == 'ln':
        return np.log(r)
    if kernel == 'ln1p':
        return np.log1p(r)
    if kernel == 'ln1p_inv':
        return np.log1p(1.0 / r)
    return g_alpha_kernel(r, alpha)


def _radial_primitive(kernel: str, R: float, alpha: Optional[float]) -> float:
    """int_0^R K(r) r dr in closed form."""
    if kernel == 'ln':
        return R ** 2 / 2.0 * np.log(R) - R ** 2 / 4.0
    if kernel == 'ln1p':
        return (R ** 2 - 1.0) / 2.0 * np.log1p(R) - R ** 2 / 4.0 + R / 2.0
    if kernel == 'ln1p_inv':
        return _radial_primitive('ln1p', R, alpha) - _radial_primitive('ln', R, alpha)
    return (R ** (2.0 - alpha) / (2.0 - alpha) - R ** 2 / 2.0) / alpha


def cell_average(kernel: str, h: float, alpha: Optional[float] = None) -> float:
    """
    Average of K(|x|) over the h x h cell centred at the origin.

    By the eight-fold symmetry of the square the average reduces to
    (2/a^2) int_0^{pi/4} G(a sec theta) dtheta with a = h/2 and G the radial
    primitive of K.
    """
    a = h / 2.0
    value, _ = integrate.quad(
        lambda theta: _radial_primitive(kernel, a / np.cos(theta), alpha),
        0.0, np.pi / 4.0, epsabs=1e-15, epsrel=1e-13,
    )
    return 2.0 / a ** 2 * value


def log_cell_average(h: float) -> float:
    """Closed form of the ln|x| average over the h-cell at the origin."""
    return np.log(h / 2.0) + (np.log(2.0) - 3.0 + np.pi / 2.0) / 2.0


# ---------------------------------------------------------------------------
# Convolution plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvolutionPlan:
    """
    Sampled kernel on the difference lattice plus its padded transform.

    samples[a + N - 1, b + N - 1] = K(h * |(a, b)|) for |a|, |b| <= N - 1.
    """

    grid: Grid2D
    kernel: str
    alpha: Optional[float]
    samples: np.ndarray = field(repr=False)
    spectrum: np.ndarray = field(repr=False)


def build_plan(grid: Grid2D, kernel: str, alpha: Optional[float] = None,
               sign: float = 1.0) -> ConvolutionPlan:
    """
    Precompute kernel samples and their (2N x 2N) real transform.

    Parameters:
    -----------
    grid : Grid2D
        Grid the plan serves
    kernel : str
        One of 'ln', 'ln1p', 'ln1p_inv', 'g_alpha'
    alpha : float, optional
        Exponent for 'g_alpha'
    sign : float
        Multiplier applied to every sample (+1 in normal use)

    Returns:
    --------
    ConvolutionPlan
    """
    if kernel not in KERNELS:
        raise ValueError(f"Unknown kernel: {kernel}")
    if kernel == 'g_alpha' and (alpha is None or not 0 < alpha < 1):
        raise ValueError(f"g_alpha kernel needs alpha in (0, 1), got {alpha}")

    N, h = grid.N, grid.h
    offsets = np.arange(-(N - 1), N)
    ia, ib = np.meshgrid(offsets, offsets, indexing='ij')
    r = h * np.hypot(ia, ib)
    r[N - 1, N - 1] = 1.0
    samples = _kernel_values(kernel, r, alpha)
    samples[N - 1, N - 1] = cell_average(kernel, h, alpha)
    samples = sign * samples

    padded = np.zeros((2 * N, 2 * N))
    padded[:2 * N - 1, :2 * N - 1] = samples
    spectrum = sp_fft.rfft2(padded, workers=_fft_workers())

    samples.setflags(write=False)
    spectrum.setflags(write=False)
    return ConvolutionPlan(grid, kernel, alpha, samples, spectrum)


@dataclass(frozen=True, eq=False)
class KernelSet:
    """The three plans behind I_0, I_1, I_2 on one grid."""

    grid: Grid2D
    ln: ConvolutionPlan
    ln1p: ConvolutionPlan
    ln1p_inv: ConvolutionPlan

    def plan(self, which: int) -> ConvolutionPlan:
        if which not in WHICH_KERNEL:
            raise ValueError(f"which must be 0, 1 or 2, got {which}")
        return getattr(self, WHICH_KERNEL[which])


@lru_cache(maxsize=8)
def get_kernel_set(grid: Grid2D, flip_a2: bool = False) -> KernelSet:
    """Build (once per grid) the ln, ln(1+r), ln(1+1/r) plans.

    flip_a2 negates the ln(1+1/r) samples; it only exists to exercise the
    failure path of the verification suite.
    """
    return KernelSet(
        grid,
        build_plan(grid, 'ln'),
        build_plan(grid, 'ln1p'),
        build_plan(grid, 'ln1p_inv', sign=-1.0 if flip_a2 else 1.0),
    )


def _as_array(w, grid: Grid2D) -> np.ndarray:
    if isinstance(w, GridField):
        if w.grid != grid:
            raise ValueError("Field grid does not match the convolution plan")
        return w.values
    values = np.asarray(w, dtype=float)
    if values.shape != (grid.N, grid.N):
        raise ValueError(f"Array shape {values.shape} does not match grid N={grid.N}")
    if not np.all(np.isfinite(values)):
        raise ValueError("Non-finite values in kernel input")
    return values


def convolve(plan: ConvolutionPlan, w, method: str = 'fast') -> np.ndarray:
    """
    (K * w)(x_ij) = h^2 sum_kl K(x_ij - x_kl) w(x_kl) at every node.

    method 'fast' uses the zero-padded transform; 'direct' sums window by
    window and is the reference path.
    """
    grid = plan.grid
    N = grid.N
    values = _as_array(w, grid)

    if method == 'fast':
        workers = _fft_workers()
        spectrum = sp_fft.rfft2(values, s=(2 * N, 2 * N), workers=workers)
        full = sp_fft.irfft2(spectrum * plan.spectrum, s=(2 * N, 2 * N), workers=workers)
        return grid.h ** 2 * full[N - 1:2 * N - 1, N - 1:2 * N - 1]

    if method == 'direct':
        K = plan.samples
        out = np.empty((N, N))
        for a in range(N):
            rows = K[N - 1 - a:2 * N - 1 - a]
            for b in range(N):
                out[a, b] = np.sum(rows[:, N - 1 - b:2 * N - 1 - b] * values)
        return grid.h ** 2 * out

    raise ValueError(f"Unknown method: {method}")


def bilinear_A(plan: ConvolutionPlan, w1, w2, method: str = 'fast') -> float:
    """iint K(|x - y|) w1(x) w2(y) by midpoint quadrature."""
    v1 = _as_array(w1, plan.grid)
    return quadrature(plan.grid, v1 * convolve(plan, w2, method))


def functional_I(kernels: KernelSet, u: GridField, p: float, which: int,
                 method: str = 'fast') -> float:
    """I_which(u) = A_which(|u|^p, |u|^p)."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    w = np.abs(u.values) ** p
    return bilinear_A(kernels.plan(which), w, w, method)


def newton_potential(kernels: KernelSet, u: GridField, p: float,
                     method: str = 'fast') -> GridField:
    """phi_u = (1/2pi) ln|.| * |u|^p sampled at the nodes."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    w = np.abs(u.values) ** p
    return GridField(u.grid, convolve(kernels.ln, w, method) / (2.0 * np.pi))


def poisson_residual(kernels: KernelSet, u: GridField, p: float) -> float:
    """
    max |Delta_h phi_u - |u|^p| over interior nodes.

    phi_u solves Delta phi = |u|^p in the plane; the 5-point stencil uses
    only nodes inside the box.
    """
    phi = newton_potential(kernels, u, p).values
    h = u.grid.h
    lap = (phi[2:, 1:-1] + phi[:-2, 1:-1] + phi[1:-1, 2:] + phi[1:-1, :-2]
           - 4.0 * phi[1:-1, 1:-1]) / h ** 2
    density = np.abs(u.values[1:-1, 1:-1]) ** p
    return float(np.max(np.abs(lap - density)))


def hls_ratio(kernels: KernelSet, u: GridField, p: float) -> float:
    """|I_2(u)| / ||u||_{4p/3}^{2p}, scale invariant in u."""
    denom = norm_Lq(u, 4.0 * p / 3.0) ** (2.0 * p)
    if denom == 0:
        raise ValueError("hls_ratio is undefined for the zero field")
    return abs(functional_I(kernels, u, p, 2)) / denom


def coercivity_constant(kind: str, k: int) -> Optional[float]:
    """
    Lower bound C_k for A_1(|u|^p,|v|^p) / (||u||_*^p ||v||_p^p) on G-invariant fields.

    A quadrant carries at least a 1/k share of each invariant density once a
    full rotation sector fits in it (k >= 4). Dihedral k = 2 contains both axis
    reflections, so every quadrant carries exactly a quarter. None when no
    quadrant argument applies.
    """
    if k >= 4:
        return 1.0 / k ** 2
    if kind == 'dihedral' and k == 2:
        return 1.0 / 16.0
    return None


def coercivity_ratio(kernels: KernelSet, u: GridField, v: GridField, p: float,
                     k: int, group=None, sym_tol: float = SYM_TOL) -> float:
    """
    A_1(|u|^p, |v|^p) / (||u||_*^p ||v||_p^p).

    When a symmetry group is given both fields must be invariant under it.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if group is not None:
        from .symmetry import symmetry_defect
        for name, w in (('u', u), ('v', v)):
            defect = symmetry_defect(group, w)
            if defect > sym_tol:
                raise ValueError(f"{name} is not invariant under the group (defect {defect:.3e})")
    denom = norm_star(u, p) ** p * norm_Lq(v, p) ** p
    if denom == 0:
        raise ValueError("coercivity_ratio is undefined for zero fields")
    A1 = bilinear_A(kernels.ln1p, np.abs(u.values) ** p, np.abs(v.values) ** p)
    return A1 / denom


def g_alpha_sweep(u: GridField, p: float, alphas: Sequence[float]) -> pd.DataFrame:
    """
    Compare -A_{G_alpha}(|u|^p, |u|^p) with I_0(u) for decreasing alpha.

    Returns:
    --------
    pd.DataFrame
        Columns alpha, value, i0, error
    """
    kernels = get_kernel_set(u.grid)
    i0 = functional_I(kernels, u, p, 0)
    w = np.abs(u.values) ** p
    rows = []
    for alpha in alphas:
        plan = build_plan(u.grid, 'g_alpha', alpha=alpha)
        value = -bilinear_A(plan, w, w)
        rows.append({'alpha': alpha, 'value': value, 'i0': i0, 'error': abs(value - i0)})
    return pd.DataFrame(rows)
