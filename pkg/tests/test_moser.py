"""
Unit tests for the moser module.
"""

import math

import numpy as np
import pytest

from src.functional import make_model
from src.grid import make_grid, make_potential
from src.moser import (
    MOSER_COLUMNS,
    RESOLUTION_TOL,
    RadialEvaluator,
    build_moser,
    case2_envelope,
    case2_window,
    case_bounds,
    envelope_dominance,
    max_on_moser_ray,
    maximizer_trend,
    moser_grad_norm_sq,
    threshold_certificate,
    v1_max,
)
from src.nonlinearity import make_nonlinearity
from src.symmetry import make_group, symmetry_defect


@pytest.fixture
def model():
    """Critical family, lambda = 1, alpha0 = 4 pi, V = 1, p = 2."""
    return make_model(make_grid(2.0, 32), make_potential('constant', 1.0),
                      make_nonlinearity('critical_exp', lam=1.0, alpha0=4.0 * np.pi))


@pytest.fixture
def strong_model():
    """lambda = 200 puts the plateau above the growth threshold on the whole window."""
    return make_model(make_grid(2.0, 32), make_potential('constant', 1.0),
                      make_nonlinearity('critical_exp', lam=200.0, alpha0=4.0 * np.pi))


def test_plateau_continuity():
    """The profile is continuous at r_in."""
    for n in (20.0, 1e6, 1e12):
        mf = build_moser(n, 2.0)
        assert mf.plateau == pytest.approx(mf.log_inv_r_in / mf.c, rel=1e-12)
        assert float(mf.profile(mf.r_in)) == pytest.approx(mf.plateau, rel=1e-12)


def test_plateau_value():
    """Plateau height and r_in in closed form for q = 2."""
    mf = build_moser(1e6, 2.0)
    ln_n = math.log(1e6)
    expected = (math.sqrt(ln_n) / math.sqrt(2.0 * math.pi)
                - 2.0 * math.log(ln_n) / (2.0 * math.sqrt(2.0 * math.pi * ln_n)))
    assert mf.plateau == pytest.approx(expected, rel=1e-14)
    assert mf.r_in == pytest.approx(ln_n / 1e6, rel=1e-12)


def test_profile_shape():
    """Nonincreasing in r, zero from r = 1 on."""
    mf = build_moser(1e4, 2.0)
    assert float(mf.profile(1.0)) == 0.0
    assert float(mf.profile(1.5)) == 0.0
    r = np.geomspace(1e-8, 2.0, 500)
    assert np.all(np.diff(mf.profile(r)) <= 0)
    # continuity at r = 1 from inside
    assert float(mf.profile(1.0 - 1e-12)) == pytest.approx(0.0, abs=1e-11)


def test_T_n():
    """T_n in closed form and equal to 2 pi plateau^2."""
    mf = build_moser(math.exp(100.0), 2.0)
    expected = 100.0 - 2.0 * math.log(100.0) + math.log(100.0) ** 2 / 100.0
    assert mf.T_n == pytest.approx(expected, rel=1e-12)
    assert mf.T_n == pytest.approx(2.0 * math.pi * mf.plateau ** 2, rel=1e-12)


def test_build_moser_errors_and_warning():
    """Bad n or q raise; a coarse grid warns."""
    with pytest.raises(ValueError):
        build_moser(2.0, 2.0)
    with pytest.raises(ValueError):
        build_moser(1e4, 1.5)
    with pytest.raises(ValueError, match="r_in"):
        build_moser(10.0, 20.0)
    with pytest.warns(UserWarning, match="does not resolve"):
        build_moser(1e8, 2.0, make_grid(2.0, 64))


def test_grad_norm_closed_form():
    """The radial gradient energy matches 1 - q ln ln n / (2 ln n)."""
    n = math.exp(math.exp(2.0))
    value = moser_grad_norm_sq(n, 2.0)
    assert value.analytic == pytest.approx(1.0 - 2.0 / math.e ** 2, rel=1e-12)
    assert value.grid is None
    for n in (1e4, 1e6, 1e8):
        value = moser_grad_norm_sq(n, 2.0)
        assert value.analytic < 1.0
        assert value.radial == pytest.approx(value.analytic, rel=1e-5)


def test_grad_norm_on_grid():
    """The 2-D face-difference energy agrees with the closed form when the plateau is resolved."""
    value = moser_grad_norm_sq(20.0, 2.0, make_grid(2.0, 512))
    assert value.grid == pytest.approx(value.analytic, rel=1e-2)


def test_moser_function_is_radial():
    """Sampled omega_n is invariant under exact groups."""
    grid = make_grid(2.0, 64)
    u = build_moser(20.0, 2.0).realize(grid)
    for G in (make_group('rotation', 4), make_group('dihedral', 2)):
        assert symmetry_defect(G, u) <= 1e-12


def test_radial_evaluator_norms(model):
    """With V = 1 the H norm splits into gradient plus delta_n."""
    mf = build_moser(1e6, 2.0)
    evaluator = RadialEvaluator(mf, model)
    assert evaluator.grad == pytest.approx(moser_grad_norm_sq(1e6, 2.0).analytic, rel=1e-14)
    assert 0 < evaluator.delta_n < 1.0
    # V = 1: ||omega||^2 = grad + delta_n
    assert evaluator.norm_sq == pytest.approx(evaluator.grad + evaluator.delta_n, rel=1e-12)
    assert evaluator.I0 <= 0.0
    assert evaluator.phi(0.0) == 0.0


def test_radial_evaluator_norm_bound_with_bump_potential():
    """The potential part is bounded by max V1 times delta_n."""
    V = make_potential('radial', 1.0, 0.5, 1.0)
    bumped = make_model(make_grid(2.0, 32), V, make_nonlinearity('critical_exp'))
    evaluator = RadialEvaluator(build_moser(1e6, 2.0), bumped)
    assert v1_max(V) == pytest.approx(1.5)
    assert evaluator.norm_sq <= evaluator.grad + v1_max(V) * evaluator.delta_n + 1e-12


def test_radial_evaluator_rejects_custom():
    """Custom nonlinearities have no radial evaluator."""
    nl = make_nonlinearity('custom', f=lambda x, y, t: t ** 3, F=lambda x, y, t: t ** 4 / 4.0)
    custom = make_model(make_grid(2.0, 32), make_potential(), nl)
    with pytest.raises(ValueError):
        RadialEvaluator(build_moser(1e4, 2.0), custom)


def test_delta_n_decays():
    """delta_n decreases like 1 / ln n."""
    model = make_model(make_grid(2.0, 32), make_potential(), make_nonlinearity('critical_exp'))
    deltas = [RadialEvaluator(build_moser(n, 2.0), model).delta_n for n in (1e4, 1e8, 1e16)]
    assert deltas[0] > deltas[1] > deltas[2]
    # O(1 / ln n)
    assert deltas[2] * math.log(1e16) < 1.0


def test_case2_envelope_window(model):
    """Window endpoints for alpha0 = 4 pi; t outside raises."""
    lo, hi = case2_window(4.0 * np.pi)
    assert lo == pytest.approx(math.sqrt(0.75))
    assert hi == pytest.approx(math.sqrt(2.0))
    with pytest.raises(ValueError, match="window"):
        case2_envelope(1e8, 2.0, 0.5, model)


def test_case2_envelope_unique_maximum(model):
    """The envelope has a single interior maximum on the window."""
    lo, hi = case2_window(4.0 * np.pi)
    t = np.linspace(lo, hi, 10_000)
    values = case2_envelope(1e8, 2.0, t, model)
    signs = np.sign(np.diff(values))
    assert np.count_nonzero(np.diff(signs) != 0) == 1


def test_envelope_dominance(strong_model):
    """Phi(t omega_n) lies below the envelope once the growth bound applies."""
    lo, hi = case2_window(4.0 * np.pi)
    frame = envelope_dominance(1e8, 2.0, np.linspace(lo, hi, 25), strong_model)
    assert frame['applicable'].all()
    assert frame['dominated'].all()


def test_case_bounds(model):
    """Small and large t both stay below the threshold."""
    bounds = case_bounds(1e8, 2.0, model)
    assert bounds['case_i_pass']
    assert bounds['case_iii_pass']
    assert bounds['case_iii_max_phi'] <= 0.0


def test_maximizer_trend(model):
    """Squared maximisers approach 4 pi / alpha0 from above."""
    trend = maximizer_trend([1e8, 1e16, 1e30], 2.0, model)
    assert list(trend.columns) == ['n', 't_n_sq', 'deviation', 'leading_term']
    deviation = trend['deviation'].to_numpy()
    assert np.all(deviation > 0)
    assert deviation[2] < deviation[1]
    assert np.all(deviation < 0.1)
    assert np.all(np.diff(trend['leading_term'].to_numpy()) < 0)


def test_threshold_certificate(model):
    """The first passing n is certified."""
    certificate = threshold_certificate([1e4, 1e6], model, q=2.0, margin=1e-3)
    assert certificate.threshold == pytest.approx(0.5)
    assert certificate.verdict == 'pass'
    assert certificate.n0 == 1e4
    assert 0.0 <= certificate.max_phi < 0.499
    assert list(certificate.rows.columns) == MOSER_COLUMNS
    assert certificate.rows['pass'].all()
    # h = 0.125 is far above r_in for both n
    assert not certificate.rows['resolved'].any()

    payload = certificate.to_dict()
    assert payload['n0'] == 1e4
    assert len(payload['rows']) == 2


def test_threshold_certificate_flags_unresolved_grid(model):
    """A concentrated omega_n on a coarse grid is flagged; the radial verdict stands."""
    certificate = threshold_certificate([1e8], model)
    row = certificate.rows.iloc[0]
    with pytest.warns(UserWarning, match='does not resolve'):
        expected = moser_grad_norm_sq(1e8, 2.0, model.grid).grid
    assert row['grid_grad_sq'] == expected
    assert row['grad_norm_sq'] == pytest.approx(moser_grad_norm_sq(1e8, 2.0).analytic, rel=1e-12)
    assert row['rel_diff'] > RESOLUTION_TOL
    assert not row['resolved']
    assert row['pass'] == (row['max_t_phi'] < certificate.threshold - 1e-3)


def test_threshold_certificate_records_bad_n(model):
    """n below e becomes an error row and the verdict is inconclusive."""
    certificate = threshold_certificate([2.0], model)
    assert certificate.verdict == 'inconclusive'
    assert certificate.n0 is None
    assert 'n must exceed e' in certificate.rows['error'].iloc[0]


def test_moser_needs_critical_family():
    """Power families are rejected."""
    power = make_model(make_grid(2.0, 32), make_potential(),
                       make_nonlinearity('subcritical_power', q_pow=4.0))
    with pytest.raises(ValueError, match="critical_exp"):
        threshold_certificate([1e4], power)
    with pytest.raises(ValueError):
        maximizer_trend([1e8], 2.0, power)


def test_max_on_moser_ray_nonnegative(model):
    """The ray maximum is at least Phi(0) = 0 and below 2 pi/alpha0."""
    value = max_on_moser_ray(1e6, 2.0, model)
    assert 0.0 <= value < 0.5
