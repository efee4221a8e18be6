"""
Unit tests for the grid module.
"""

import numpy as np
import pytest

from src.grid import (
    GridField,
    check_decay,
    dirichlet_form,
    field_from_function,
    inner_H,
    integrate,
    load_field,
    make_grid,
    make_potential,
    neg_laplacian,
    norm_H,
    norm_Lq,
    norm_star,
    norm_X,
    sample_potential,
    save_field,
    zeros,
)


@pytest.fixture
def grid():
    """Box [-4, 4]^2, h = 1/8."""
    return make_grid(4.0, 64)


@pytest.fixture
def gaussian(grid):
    """exp(-r^2) on the box."""
    return field_from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2)))


@pytest.fixture
def random_field(grid):
    """Seeded white noise."""
    rng = np.random.default_rng(42)
    return GridField(grid, rng.normal(size=(grid.N, grid.N)))


def test_make_grid_layout(grid):
    """Nodes are cell centres, symmetric about the origin."""
    assert grid.h == pytest.approx(0.125)
    assert grid.nodes[0] == pytest.approx(-4.0 + 0.0625)
    np.testing.assert_allclose(grid.nodes, -grid.nodes[::-1], atol=1e-14)
    assert not np.any(grid.nodes == 0)


def test_make_grid_rejects_odd_and_small_N():
    """Odd N, N < 8 and non-positive L are rejected."""
    with pytest.raises(ValueError, match="odd N"):
        make_grid(4.0, 63)
    with pytest.raises(ValueError):
        make_grid(4.0, 6)
    with pytest.raises(ValueError):
        make_grid(-1.0, 64)


def test_grid_field_validation(grid):
    """Shape mismatches and non-finite values are rejected."""
    with pytest.raises(ValueError):
        GridField(grid, np.zeros((10, 10)))
    values = np.zeros((grid.N, grid.N))
    values[3, 3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        GridField(grid, values)


def test_field_arithmetic(grid, gaussian):
    """Fields combine pointwise only on the same grid."""
    doubled = gaussian * 2.0
    np.testing.assert_array_equal(doubled.values, 2.0 * gaussian.values)
    np.testing.assert_array_equal((gaussian - gaussian).values, 0.0)
    np.testing.assert_array_equal((-gaussian).values, -gaussian.values)
    other = zeros(make_grid(4.0, 32))
    with pytest.raises(ValueError):
        gaussian + other


def test_integrate_gaussian(gaussian):
    """Midpoint rule for int exp(-|x|^2) = pi."""
    assert integrate(gaussian) == pytest.approx(np.pi, rel=1e-6)


def test_neg_laplacian_is_dirichlet_form(grid, random_field, gaussian):
    """Summation by parts holds exactly with zero extension."""
    lhs = integrate(GridField(grid, neg_laplacian(random_field).values * gaussian.values))
    rhs = dirichlet_form(random_field, gaussian)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_dirichlet_form_of_gaussian(gaussian):
    """int |grad exp(-r^2)|^2 = pi."""
    assert dirichlet_form(gaussian, gaussian) == pytest.approx(np.pi, rel=1e-2)


def test_second_order_refinement():
    """Halving h cuts the Delta_h and Dirichlet-form errors on exp(-r^2) by about 4."""
    lap_err, form_err = [], []
    for N in (32, 64, 128):
        grid = make_grid(6.0, N)
        u = field_from_function(grid, lambda x, y: np.exp(-(x ** 2 + y ** 2)))
        exact = field_from_function(
            grid, lambda x, y: (4.0 - 4.0 * (x ** 2 + y ** 2)) * np.exp(-(x ** 2 + y ** 2)))
        diff = neg_laplacian(u) - exact
        lap_err.append(np.sqrt(integrate(GridField(grid, diff.values ** 2))))
        form_err.append(abs(dirichlet_form(u, u) - np.pi))

    for errors in (lap_err, form_err):
        ratios = np.array(errors[:-1]) / np.array(errors[1:])
        assert np.all((ratios >= 3.0) & (ratios <= 5.0)), ratios


def test_norms_of_gaussian(gaussian):
    """H, L^2, star and X norms of the Gaussian."""
    V = make_potential('constant', 1.0)
    # ||u||^2 = int |grad u|^2 + int u^2 = pi + pi/2
    assert norm_H(gaussian, V) ** 2 == pytest.approx(1.5 * np.pi, rel=1e-2)
    assert norm_Lq(gaussian, 2.0) ** 2 == pytest.approx(np.pi / 2.0, rel=1e-8)
    assert norm_X(gaussian, V, 2.0) == pytest.approx(norm_H(gaussian, V) + norm_star(gaussian, 2.0))
    assert norm_star(gaussian, 2.0) > 0


def test_norm_star_rejects_small_p(gaussian):
    """The star norm needs p >= 2."""
    with pytest.raises(ValueError):
        norm_star(gaussian, 1.5)


def test_inner_H_symmetric(grid, gaussian, random_field):
    """The H inner product is symmetric."""
    V = make_potential('radial', 1.0, 0.5, 1.0)
    assert inner_H(gaussian, random_field, V) == pytest.approx(inner_H(random_field, gaussian, V), rel=1e-12)


def test_check_decay_warns(grid, gaussian):
    """Mass on the boundary ring triggers a warning."""
    assert check_decay(gaussian * 1e-12)
    with pytest.warns(UserWarning, match="boundary ring"):
        assert not check_decay(GridField(grid, np.ones((grid.N, grid.N))))


def test_potentials(grid):
    """Potentials are positive, k-symmetric and read-only."""
    V = make_potential('ksymmetric', 1.0, 0.2, 1.0, k=4)
    values = sample_potential(V, grid)
    assert values.min() >= 0
    # invariant under the 90 degree rotation (x, y) -> (-y, x)
    np.testing.assert_allclose(values, np.rot90(values), atol=1e-12)
    with pytest.raises(ValueError):
        values[0, 0] = 0.0
    with pytest.raises(ValueError, match="negative"):
        make_potential('ksymmetric', 0.1, 5.0, 1.0, k=4)
    with pytest.raises(ValueError):
        make_potential('radial', 1.0, -2.0, 1.0)
    with pytest.raises(ValueError):
        make_potential('harmonic')


def test_save_and_load_field(tmp_path, grid, random_field):
    """CSV dumps reload bit for bit and the grid is inferred."""
    path = tmp_path / 'field.csv'
    save_field(random_field, str(path))
    loaded = load_field(str(path), grid)
    np.testing.assert_array_equal(loaded.values, random_field.values)

    inferred = load_field(str(path))
    assert inferred.grid.N == grid.N
    assert inferred.grid.L == pytest.approx(grid.L)

    with pytest.raises(ValueError, match="different"):
        load_field(str(path), make_grid(2.0, 64))
