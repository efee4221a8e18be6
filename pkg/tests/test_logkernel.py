"""
Unit tests for the logarithmic kernel module.
"""

import math

import numpy as np
import pytest

from src.grid import GridField, field_from_function, integrate, make_grid, zeros
from src.logkernel import (
    _fft_workers,
    bilinear_A,
    build_plan,
    cell_average,
    coercivity_constant,
    coercivity_ratio,
    convolve,
    functional_I,
    g_alpha_kernel,
    g_alpha_sweep,
    get_kernel_set,
    hls_ratio,
    log_cell_average,
    newton_potential,
    poisson_residual,
)
from src.symmetry import group_average, make_group


@pytest.fixture
def small_grid():
    """Box [-4, 4]^2 with 32 cells per side."""
    return make_grid(4.0, 32)


@pytest.fixture
def kernels(small_grid):
    """Cached kernel set for the small grid."""
    return get_kernel_set(small_grid)


@pytest.fixture
def fields(small_grid):
    """Two seeded nonnegative weights on the small grid."""
    rng = np.random.default_rng(0)
    x, y = small_grid.mesh
    out = []
    for _ in range(2):
        w = np.zeros_like(x)
        for _ in range(3):
            cx, cy = rng.uniform(-1.5, 1.5, size=2)
            w += rng.uniform(0.5, 1.5) * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 0.5)
        out.append(w)
    return out


def _bump(grid, radius, centre=(0.0, 0.0)):
    cx, cy = centre
    return field_from_function(
        grid, lambda x, y: np.clip(1.0 - ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2, 0.0, None) ** 2
    )


def test_g_alpha_kernel_values():
    """The regularised kernel tends to -ln r as alpha -> 0."""
    assert g_alpha_kernel(1.0, 0.5) == 0.0
    assert g_alpha_kernel(2.0, 1e-3) == pytest.approx(-math.log(2.0), abs=2.5e-4)
    errors = [abs(g_alpha_kernel(math.e, a) + 1.0) for a in (1e-1, 1e-2, 1e-3)]
    assert errors[0] > errors[1] > errors[2]
    # error ~ alpha (ln r)^2 / 2
    assert errors[2] == pytest.approx(5e-4, rel=1e-2)


def test_g_alpha_kernel_rejects_bad_input():
    """r must be positive and alpha below 1."""
    with pytest.raises(ValueError):
        g_alpha_kernel(0.0, 0.5)
    with pytest.raises(ValueError):
        g_alpha_kernel(1.0, 1.5)


def test_log_cell_average_closed_form():
    """Numerical and closed-form ln averages over a cell agree."""
    for h in (0.5, 0.125, 1.0 / 64):
        assert cell_average('ln', h) == pytest.approx(log_cell_average(h), rel=1e-10, abs=1e-12)


def test_plan_samples_symmetric(small_grid):
    """Kernel samples are even in both axes and finite."""
    plan = build_plan(small_grid, 'ln1p_inv')
    np.testing.assert_array_equal(plan.samples, plan.samples[::-1, ::-1])
    np.testing.assert_allclose(plan.samples, plan.samples.T, rtol=1e-14, atol=0)
    assert np.all(np.isfinite(plan.samples))
    with pytest.raises(ValueError):
        plan.samples[0, 0] = 1.0


def test_kernel_identity(kernels, fields):
    """A_0 = A_1 - A_2."""
    w1, w2 = fields
    A = [bilinear_A(kernels.plan(i), w1, w2) for i in range(3)]
    assert abs(A[0] - (A[1] - A[2])) <= 1e-10 * (abs(A[1]) + abs(A[2]))


def test_fast_matches_direct(kernels, fields):
    """Transform convolution reproduces the direct sum."""
    w = fields[0]
    for which in range(3):
        plan = kernels.plan(which)
        fast = convolve(plan, w, 'fast')
        direct = convolve(plan, w, 'direct')
        assert np.max(np.abs(fast - direct)) <= 1e-10 * np.max(np.abs(direct))


def test_bilinear_symmetry_and_sign(kernels, fields):
    """A_i is symmetric and the two split kernels are nonnegative."""
    w1, w2 = fields
    for which in range(3):
        plan = kernels.plan(which)
        assert bilinear_A(plan, w1, w2) == pytest.approx(bilinear_A(plan, w2, w1), rel=1e-12, abs=1e-10)
    assert bilinear_A(kernels.ln1p_inv, w1, w2) >= 0
    assert bilinear_A(kernels.ln1p, w1, w2) >= 0


def test_bilinear_rejects_mismatched_input(kernels):
    """Wrong shapes and unknown methods raise."""
    with pytest.raises(ValueError):
        bilinear_A(kernels.ln, np.ones((16, 16)), np.ones((16, 16)))
    with pytest.raises(ValueError):
        convolve(kernels.ln, np.ones((32, 32)), method='spectral')


def test_bump_pair_limit():
    """Two unit-mass bumps at distance 4 see ln(1 + 4)."""
    grid = make_grid(4.0, 128)
    kernels = get_kernel_set(grid)
    x, y = grid.mesh
    left = np.exp(-((x + 2.0) ** 2 + y ** 2) / 0.01)
    right = np.exp(-((x - 2.0) ** 2 + y ** 2) / 0.01)
    left /= integrate(GridField(grid, left))
    right /= integrate(GridField(grid, right))
    assert bilinear_A(kernels.ln1p, left, right) == pytest.approx(math.log(5.0), rel=0.02)


def test_functional_I_zero_field(kernels, small_grid):
    """I_i(0) = 0; p < 2 is rejected."""
    for which in range(3):
        assert functional_I(kernels, zeros(small_grid), 2.0, which) == 0.0
    with pytest.raises(ValueError):
        functional_I(kernels, zeros(small_grid), 1.5, 0)
    with pytest.raises(ValueError):
        kernels.plan(3)


@pytest.mark.parametrize('p', [2.0, 3.0])
def test_i0_nonpositive_on_small_support(p):
    """Supports of diameter <= 1 give ln|x - y| <= 0 pointwise."""
    grid = make_grid(2.0, 64)
    kernels = get_kernel_set(grid)
    rng = np.random.default_rng(7)
    for _ in range(5):
        values = np.zeros((grid.N, grid.N))
        for _ in range(3):
            rho = rng.uniform(0.1, 0.25)
            r_c = (0.5 - rho) * math.sqrt(rng.uniform())
            theta = rng.uniform(0, 2 * math.pi)
            values += _bump(grid, rho, (r_c * math.cos(theta), r_c * math.sin(theta))).values
        u = GridField(grid, values)
        I = [functional_I(kernels, u, p, i) for i in range(3)]
        assert I[0] <= 1e-9 * (I[1] + abs(I[2]))
        assert I[1] == pytest.approx(I[0] + I[2], rel=1e-10)


def test_newton_potential_consistency(kernels, small_grid):
    """int phi_u |u|^p = I_0 / 2 pi; phi_0 = 0."""
    u = _bump(small_grid, 1.5)
    p = 2.0
    phi_u = newton_potential(kernels, u, p)
    lhs = integrate(GridField(small_grid, phi_u.values * np.abs(u.values) ** p))
    assert lhs == pytest.approx(functional_I(kernels, u, p, 0) / (2.0 * math.pi), rel=1e-9)
    np.testing.assert_array_equal(newton_potential(kernels, zeros(small_grid), p).values, 0.0)


def test_newton_potential_far_field():
    """Outside a radial density phi_u = (m / 2 pi) ln|x|."""
    grid = make_grid(4.0, 256)
    kernels = get_kernel_set(grid)
    u = _bump(grid, 0.5)
    p = 2.0
    m = integrate(GridField(grid, np.abs(u.values) ** p))
    phi_u = newton_potential(kernels, u, p)
    i = int(np.argmin(np.abs(grid.nodes - 2.0)))
    j = grid.N // 2
    r = math.hypot(grid.nodes[i], grid.nodes[j])
    assert phi_u.values[i, j] == pytest.approx(m / (2.0 * math.pi) * math.log(r), rel=1e-3)


def test_poisson_residual_small():
    """Delta_h phi_u stays close to |u|^p on interior nodes."""
    grid = make_grid(4.0, 256)
    kernels = get_kernel_set(grid)
    u = _bump(grid, 1.5)
    assert poisson_residual(kernels, u, 2.0) <= 0.1 * np.max(np.abs(u.values)) ** 2


def test_hls_ratio(kernels, small_grid):
    """The HLS ratio is finite, positive and scale invariant."""
    u = _bump(small_grid, 1.5)
    r = hls_ratio(kernels, u, 2.0)
    assert np.isfinite(r) and r > 0
    assert hls_ratio(kernels, u * 3.0, 2.0) == pytest.approx(r, rel=1e-12)
    with pytest.raises(ValueError):
        hls_ratio(kernels, zeros(small_grid), 2.0)


def test_coercivity_constant():
    """Closed-form constants for exact groups, None otherwise."""
    assert coercivity_constant('rotation', 4) == pytest.approx(1.0 / 16.0)
    assert coercivity_constant('rotation', 8) == pytest.approx(1.0 / 64.0)
    assert coercivity_constant('dihedral', 2) == pytest.approx(1.0 / 16.0)
    assert coercivity_constant('rotation', 3) is None


def test_coercivity_ratio_on_invariant_fields(kernels, small_grid, fields):
    """Invariant fields respect the coercivity constant."""
    G = make_group('rotation', 4)
    u = group_average(G, GridField(small_grid, fields[0]))
    v = group_average(G, GridField(small_grid, fields[1]))
    assert coercivity_ratio(kernels, u, v, 2.0, 4, group=G) >= 1.0 / 16.0 - 1e-6

    radial = _bump(small_grid, 1.5)
    assert coercivity_ratio(kernels, radial, radial, 2.0, 4, group=G) >= 1.0 / 16.0


def test_coercivity_ratio_rejects_asymmetric(kernels, small_grid):
    """Fields that are not invariant are rejected."""
    G = make_group('rotation', 4)
    off_centre = _bump(small_grid, 0.8, (1.0, 0.0))
    with pytest.raises(ValueError, match="not invariant"):
        coercivity_ratio(kernels, off_centre, off_centre, 2.0, 4, group=G)
    with pytest.raises(ValueError):
        coercivity_ratio(kernels, zeros(small_grid), zeros(small_grid), 2.0, 4)


def test_g_alpha_sweep_converges(small_grid):
    """Errors shrink as alpha decreases."""
    u = _bump(small_grid, 1.0)
    sweep = g_alpha_sweep(u, 2.0, [1e-1, 1e-2, 1e-3])
    assert list(sweep.columns) == ['alpha', 'value', 'i0', 'error']
    errors = sweep['error'].to_numpy()
    assert np.all(np.diff(errors) < 0)
    # error is linear in alpha
    assert 5.0 < errors[0] / errors[1] < 20.0


def test_flip_a2_negates_kernel(small_grid):
    """The flipped set negates A_2 and the plain set is cached."""
    normal = get_kernel_set(small_grid)
    flipped = get_kernel_set(small_grid, True)
    assert get_kernel_set(small_grid) is normal
    np.testing.assert_array_equal(flipped.ln1p_inv.samples, -normal.ln1p_inv.samples)


def test_fft_workers_env(monkeypatch):
    """LOGSP_THREADS sets the FFT worker count."""
    monkeypatch.delenv('LOGSP_THREADS', raising=False)
    assert _fft_workers() is None
    monkeypatch.setenv('LOGSP_THREADS', '2')
    assert _fft_workers() == 2
    monkeypatch.setenv('LOGSP_THREADS', '0')
    with pytest.raises(ValueError):
        _fft_workers()
