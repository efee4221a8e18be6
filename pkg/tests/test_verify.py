"""
Unit tests for the verify module.
"""

import numpy as np
import pytest

from src.config import config_from_dict
from src.grid import make_grid
from src.verify import (
    CHECKS,
    VERDICTS,
    CheckResult,
    compact_field,
    run_suite,
    smooth_field,
    suite_passed,
)


@pytest.fixture
def cfg():
    """Small verification grid so single checks stay quick."""
    return config_from_dict({'verify': {'L': 4.0, 'N': 32, 'samples': 3}})


def test_compact_field_support():
    """Compact fields vanish outside their disc."""
    grid = make_grid(2.0, 64)
    rng = np.random.default_rng(0)
    u = compact_field(grid, rng, radius=0.5)
    x, y = grid.mesh
    assert np.all(u.values[x ** 2 + y ** 2 > 0.25] == 0.0)
    assert u.values.max() > 0.0


def test_smooth_field_is_reproducible():
    """Same generator state, same field."""
    grid = make_grid(2.0, 32)
    a = smooth_field(grid, np.random.default_rng(4))
    b = smooth_field(grid, np.random.default_rng(4))
    np.testing.assert_array_equal(a.values, b.values)


def test_kernel_identity_and_flip(cfg):
    """A_0 = A_1 - A_2 passes; the flipped kernel fails with a witness."""
    [ok] = run_suite(cfg, only=['kernel_identity'], verbose=False)
    assert ok.verdict == 'pass'
    assert ok.values['max_relative_gap'] <= 1e-10

    [broken] = run_suite(cfg, flip_a2=True, only=['kernel_identity'], verbose=False)
    assert broken.verdict == 'fail'
    assert 'witness' in broken.values
    assert not suite_passed([ok, broken])


def test_fast_vs_direct(cfg):
    """Transform and direct convolution agree for every kernel."""
    [result] = run_suite(cfg, only=['fast_vs_direct'], verbose=False)
    assert result.verdict == 'pass'
    assert set(result.values['max_relative_error']) == {'ln', 'ln1p', 'ln1p_inv'}


def test_subset_reproduces_full_run(cfg):
    """Each check draws from its own generator, so running it alone changes nothing."""
    alone = run_suite(cfg, only=['hls_ratio'], verbose=False)[0]
    together = run_suite(cfg, only=['kernel_identity', 'hls_ratio'], verbose=False)[1]
    assert alone.to_dict() == together.to_dict()


def test_unknown_check_id(cfg):
    """Unknown ids are rejected up front."""
    with pytest.raises(ValueError, match="Unknown check ids"):
        run_suite(cfg, only=['kernel_identity', 'telepathy'], verbose=False)


def test_interpolated_group_is_approximate():
    """Interpolated rotations downgrade the symmetry checks to approximate."""
    cfg = config_from_dict({'symmetry': {'kind': 'rotation', 'k': 3, 'require_exact': True},
                            'verify': {'L': 4.0, 'N': 32, 'samples': 2}})
    results = run_suite(cfg, only=['symmetry_energy', 'gradient_equivariance', 'coercivity'],
                        verbose=False)
    assert [r.verdict for r in results] == ['approximate'] * 3
    assert suite_passed(results)


def test_exact_group_symmetry_checks(cfg):
    """Exact groups pass the symmetry checks."""
    results = run_suite(cfg, only=['symmetry_energy', 'gradient_equivariance', 'potential_V0'],
                        verbose=False)
    assert [r.verdict for r in results] == ['pass'] * 3


def test_conditions_for_default_family(cfg):
    """The critical family meets every growth condition."""
    [result] = run_suite(cfg, only=['conditions'], verbose=False)
    assert result.verdict == 'pass'
    assert result.values['family'] == 'critical_exp'
    assert set(result.values['reports']) == {'F1_growth', 'F2', 'F3', 'F4', 'F5'}


def test_suite_passed_ignores_non_failures():
    """Only a fail verdict fails the suite."""
    results = [CheckResult(f'c{i}', v) for i, v in enumerate(VERDICTS) if v != 'fail']
    assert suite_passed(results)
    assert not suite_passed(results + [CheckResult('bad', 'fail')])


@pytest.mark.slow
def test_full_suite_passes():
    """Every check runs in order and nothing fails on the defaults."""
    results = run_suite(config_from_dict({'verify': {'samples': 3}}), verbose=False)
    assert [r.id for r in results] == list(CHECKS)
    assert all(r.verdict in VERDICTS for r in results)
    failed = [r.id for r in results if r.verdict == 'fail']
    assert failed == []
