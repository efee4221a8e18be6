"""
Nonlinearities f(x, t) with primitives F(x, t) and sampling-based condition checks.

Built-in families are autonomous (f(x, t) = f(t)):

- critical_exp      f = lam t (e^{alpha0 t^2} - 1)
- subcritical_power f = b |t|^{q-2} t
- subcritical_exp   f = lam |t|^2 t e^{a|t|}

A 'custom' family takes user callables f(x, y, t) and F(x, y, t).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate

from .grid import Grid2D, Potential, sample_potential


FAMILIES = ('critical_exp', 'subcritical_power', 'subcritical_exp', 'custom')
CONDITIONS = ('F1_growth', 'F1prime', 'F2', 'F3', 'F4', 'F4prime_mono',
              'F4prime_AR', 'F5', 'V0')
CHECK_TOL = 1e-8
ROUNDING = 64 * np.finfo(float).eps
N_SAMPLES = 10_000


def _expm1_minus_x(s):
    """e^s - 1 - s without cancellation for small s."""
    s = np.asarray(s, dtype=float)
    small = np.abs(s) < 1e-2
    with np.errstate(over='ignore', invalid='ignore'):
        direct = np.expm1(s) - s
    series = s ** 2 / 2 + s ** 3 / 6 + s ** 4 / 24 + s ** 5 / 120 + s ** 6 / 720
    return np.where(small, series, direct)


@dataclass(frozen=True)
class Nonlinearity:
    """
    A pair (f, F) with F(x, t) = int_0^t f(x, s) ds in closed form.

    alpha0 is the critical exponent for 'critical_exp' and the reference
    exponent of the growth checks otherwise; a is the rate of 'subcritical_exp';
    s0 is the exponent in f(t) = O(|t|^s0) near 0.
    """

    family: str
    lam: float = 1.0
    alpha0: float = 4.0 * np.pi
    b: float = 1.0
    q_pow: float = 4.0
    a: float = 1.0
    clamp: bool = False
    s0: float = 3.0
    f_custom: Optional[Callable] = field(default=None, compare=False, repr=False)
    F_custom: Optional[Callable] = field(default=None, compare=False, repr=False)

    # -- evaluation ---------------------------------------------------------

    def f(self, t, x=None, y=None):
        t = np.asarray(t, dtype=float)
        if self.family == 'critical_exp':
            with np.errstate(over='ignore'):
                value = self.lam * t * np.expm1(self.alpha0 * t ** 2)
        elif self.family == 'subcritical_power':
            value = self.b * np.abs(t) ** (self.q_pow - 2.0) * t
        elif self.family == 'subcritical_exp':
            with np.errstate(over='ignore'):
                value = self.lam * t ** 3 * np.exp(self.a * np.abs(t))
        else:
            value = np.asarray(self.f_custom(x, y, t), dtype=float)
        if self.clamp:
            value = np.where(t > 0, value, 0.0)
        return value

    def F(self, t, x=None, y=None):
        t = np.asarray(t, dtype=float)
        if self.family == 'critical_exp':
            value = self.lam / (2.0 * self.alpha0) * _expm1_minus_x(self.alpha0 * t ** 2)
        elif self.family == 'subcritical_power':
            value = self.b / self.q_pow * np.abs(t) ** self.q_pow
        elif self.family == 'subcritical_exp':
            value = self._subexp_F(np.abs(t))
        else:
            value = np.asarray(self.F_custom(x, y, t), dtype=float)
        if self.clamp:
            value = np.where(t > 0, value, 0.0)
        return value

    def _subexp_F(self, s: np.ndarray) -> np.ndarray:
        a = self.a
        z = a * s
        with np.errstate(over='ignore', invalid='ignore'):
            closed = (np.exp(z) * (s ** 3 / a - 3 * s ** 2 / a ** 2 + 6 * s / a ** 3 - 6 / a ** 4)
                      + 6 / a ** 4)
        series = np.zeros_like(s)
        term = s ** 4 / 4.0
        for k in range(20):
            series = series + term
            term = term * z * (k + 4) / ((k + 1) * (k + 5))
        return self.lam * np.where(z < 0.1, series, closed)

    def log_f(self, t):
        """ln f(t) for t > 0, finite where f itself overflows."""
        t = np.asarray(t, dtype=float)
        if self.family == 'critical_exp':
            s = self.alpha0 * t ** 2
            with np.errstate(over='ignore'):
                tail = np.where(s > 30, s + np.log1p(-np.exp(-s)), np.log(np.expm1(np.minimum(s, 30))))
            return np.log(self.lam) + np.log(t) + tail
        if self.family == 'subcritical_power':
            return np.log(self.b) + (self.q_pow - 1.0) * np.log(t)
        if self.family == 'subcritical_exp':
            return np.log(self.lam) + 3.0 * np.log(t) + self.a * t
        with np.errstate(divide='ignore'):
            return np.log(self.f(t))

    def log_F(self, t):
        """ln F(t) for t > 0."""
        t = np.asarray(t, dtype=float)
        if self.family == 'critical_exp':
            s = self.alpha0 * t ** 2
            big = s > 30
            with np.errstate(over='ignore', divide='ignore'):
                tail = np.where(big, s + np.log1p(-(1.0 + s) * np.exp(-s)),
                                np.log(_expm1_minus_x(np.minimum(s, 30))))
            return np.log(self.lam / (2.0 * self.alpha0)) + tail
        if self.family == 'subcritical_power':
            return np.log(self.b / self.q_pow) + self.q_pow * np.log(t)
        if self.family == 'subcritical_exp':
            z = self.a * t
            with np.errstate(divide='ignore'):
                small = np.log(self._subexp_F(np.minimum(t, 50.0 / self.a)))
            # e^{z} (t^3/a)(1 - 3/z + 6/z^2 - 6/z^3) dominates for large z
            large = (np.log(self.lam) + z + 3.0 * np.log(t) - np.log(self.a)
                     + np.log1p(-3.0 / z + 6.0 / z ** 2 - 6.0 / z ** 3))
            return np.where(z > 50.0, large, small)
        with np.errstate(divide='ignore'):
            return np.log(self.F(t))

    def default_t_max(self) -> float:
        """Largest |t| sampled by the condition checks without overflow."""
        if self.family == 'critical_exp':
            return math.sqrt(600.0 / self.alpha0)
        if self.family == 'subcritical_exp':
            return min(50.0, 600.0 / self.a)
        return 50.0


def make_nonlinearity(family: str, lam: float = 1.0, alpha0: float = 4.0 * np.pi,
                      b: float = 1.0, q_pow: float = 4.0, a: float = 1.0,
                      clamp: bool = False, f=None, F=None, s0: Optional[float] = None) -> Nonlinearity:
    """
    Build a nonlinearity and validate its parameters.

    Parameters:
    -----------
    family : str
        'critical_exp', 'subcritical_power', 'subcritical_exp' or 'custom'
    lam : float
        Amplitude lambda > 0 of the exponential families
    alpha0 : float
        Critical exponent > 0
    b, q_pow : float
        Power family coefficient (> 0) and exponent (> 2)
    a : float
        Rate of the subcritical exponential family (> 0)
    clamp : bool
        Set f = F = 0 for t <= 0
    f, F : callable, optional
        f(x, y, t), F(x, y, t) for the custom family
    s0 : float, optional
        Near-zero exponent metadata for the custom family

    Returns:
    --------
    Nonlinearity
    """
    if family not in FAMILIES:
        raise ValueError(f"Unknown nonlinearity family: {family}")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if alpha0 <= 0:
        raise ValueError(f"alpha0 must be positive, got {alpha0}")
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    if q_pow <= 2:
        raise ValueError(f"q_pow must exceed 2, got {q_pow}")
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")

    if family == 'custom':
        if f is None or F is None:
            raise ValueError("custom family needs both f and F callables")
        s0 = 3.0 if s0 is None else s0
    elif family == 'subcritical_power':
        s0 = q_pow - 1.0
    else:
        s0 = 3.0
    if s0 <= 1:
        raise ValueError(f"s0 must exceed 1, got {s0}")
    return Nonlinearity(family, float(lam), float(alpha0), float(b), float(q_pow),
                        float(a), bool(clamp), float(s0), f, F)


def eval_f(nl: Nonlinearity, x, t):
    """f(x, t); x is a point (x, y) or None for autonomous families."""
    xx, yy = (None, None) if x is None else x
    return nl.f(t, xx, yy)


def eval_F(nl: Nonlinearity, x, t):
    """F(x, t)."""
    xx, yy = (None, None) if x is None else x
    return nl.F(t, xx, yy)


def quadrature_F(nl: Nonlinearity, t: float, x=None) -> float:
    """int_0^t f(x, s) ds by adaptive quadrature (reference for the closed forms)."""
    value, _ = integrate.quad(lambda s: float(eval_f(nl, x, s)), 0.0, t,
                              epsabs=1e-14, epsrel=1e-12, limit=200)
    return value


# ---------------------------------------------------------------------------
# Condition checks
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    """Verdict of a sampled condition check; 'fail' always carries a witness."""

    condition: str
    verdict: str
    witness: Optional[Dict[str, float]] = None
    ratios: Dict[str, float] = field(default_factory=dict)
    note: str = ''

    def to_dict(self) -> dict:
        return {
            'condition': self.condition,
            'verdict': self.verdict,
            'witness': self.witness,
            'ratios': dict(self.ratios),
            'note': self.note,
        }


def t_samples(t_max: float, n: int = N_SAMPLES) -> np.ndarray:
    """Sorted t in [-t_max, t_max] \\ {0}, log-spaced towards 0 and towards +-t_max."""
    quarter = max(n // 4, 2)
    near_zero = np.geomspace(1e-6 * t_max, t_max, quarter)
    near_end = t_max - np.geomspace(1e-6 * t_max, t_max, quarter)[::-1]
    positive = np.unique(np.concatenate([near_zero, near_end[near_end > 0], [t_max]]))
    return np.concatenate([-positive[::-1], positive])


def _judge(condition: str, margin: np.ndarray, scale: np.ndarray, t: np.ndarray,
           check_tol: float, ratios: Dict[str, float], note: str = '',
           extra: Optional[Dict[str, np.ndarray]] = None) -> ConditionReport:
    """Turn a margin array (>= 0 required) into a verdict."""
    scale = np.maximum(np.abs(scale), np.finfo(float).tiny)
    rel = margin / scale
    i = int(np.argmin(rel))
    ratios = dict(ratios)
    ratios['min_relative_margin'] = float(rel[i])
    witness = {'t': float(t[i]), 'margin': float(margin[i])}
    if extra:
        witness.update({key: float(val[i]) for key, val in extra.items()})
    if rel[i] < -check_tol:
        return ConditionReport(condition, 'fail', witness, ratios, note)
    if rel[i] < -ROUNDING:
        return ConditionReport(condition, 'inconclusive', witness, ratios,
                               (note + '; ' if note else '') + 'tight within check_tol')
    return ConditionReport(condition, 'pass', None, ratios, note)


def _v_extremes(V: Potential, grid: Optional[Grid2D]):
    if grid is None:
        if not V.is_constant:
            raise ValueError("A grid is needed to sample a non-constant potential")
        return V.value, V.value
    Vs = sample_potential(V, grid)
    return float(Vs.min()), float(Vs.max())


def check_condition(nl: Nonlinearity, V: Potential, cond: str, grid: Optional[Grid2D] = None,
                    p: float = 2.0, t_max: Optional[float] = None, check_tol: float = CHECK_TOL,
                    n_samples: int = N_SAMPLES, **params) -> ConditionReport:
    """
    Check one condition on a dense t-sample.

    Parameters:
    -----------
    nl : Nonlinearity
        Nonlinearity under test (x-dependence sampled at grid nodes for 'custom')
    V : Potential
        Potential entering the V-dependent conditions (worst case inf V)
    cond : str
        Condition id from CONDITIONS
    grid : Grid2D, optional
        Grid for sampling V (required unless V is constant; required for 'V0')
    p : float
        Exponent p >= 2 of the nonlocal term
    t_max : float, optional
        Sampling box [-t_max, t_max]; a family-dependent default otherwise
    check_tol : float
        Relative violation above which a check fails
    **params
        M0, t0 (F2); q (F3); mu1, mu2 (F4); mu (F4prime_mono, F4prime_AR);
        t1 (F4prime_AR); group, sym_tol (V0)

    Returns:
    --------
    ConditionReport
    """
    if cond not in CONDITIONS:
        raise ValueError(f"Unknown condition: {cond}")
    if cond == 'V0':
        if grid is None:
            raise ValueError("V0 check needs a grid")
        return check_potential(V, grid, params.get('group'), params.get('sym_tol', 1e-10))

    t_max = nl.default_t_max() if t_max is None else t_max
    t = t_samples(t_max, n_samples)

    if nl.family == 'custom' and grid is not None:
        return _check_custom(nl, V, cond, grid, p, t, check_tol, params)

    f = nl.f(t)
    F = nl.F(t)
    v_min, _ = _v_extremes(V, grid)

    if cond == 'F1_growth':
        # f(t) / e^{alpha t^2} -> 0 above alpha0 and -> infinity below it
        t_sample = float(params.get('t_sample', 10.0))
        log_f = float(nl.log_f(t_sample))
        above = log_f - 1.2 * nl.alpha0 * t_sample ** 2
        below = log_f - 0.8 * nl.alpha0 * t_sample ** 2
        ratios = {'log_ratio_above': above, 'log_ratio_below': below}
        if above < math.log(1e-6) and below > math.log(1e6):
            return ConditionReport(cond, 'pass', None, ratios)
        return ConditionReport(cond, 'fail', {'t': t_sample, 'log_f': log_f}, ratios,
                               'growth is not critical at alpha0')

    if cond == 'F1prime':
        worst = -np.inf
        witness = None
        for alpha in (1.0, 0.1, 0.01):
            t_sample = math.sqrt(200.0 / alpha)
            value = float(nl.log_f(t_sample)) - 200.0
            if value > worst:
                worst, witness = value, {'t': t_sample, 'alpha': alpha}
        ratios = {'max_log_ratio': worst}
        if worst < math.log(1e-6):
            return ConditionReport(cond, 'pass', None, ratios)
        return ConditionReport(cond, 'fail', witness, ratios, 'f is not subcritical')

    if cond == 'F2':
        M0 = float(params.get('M0', 1.0))
        t0 = float(params.get('t0', 1.0))
        sign = _judge(cond, f * t, np.abs(f * t), t, check_tol, {})
        if sign.verdict == 'fail':
            sign.note = 'f(t) t < 0'
            return sign
        mask = np.abs(t) >= t0
        if not mask.any():
            sign.note = f'no samples with |t| >= t0 = {t0}'
            return sign
        margin = M0 * np.abs(f[mask]) - F[mask]
        with np.errstate(divide='ignore', invalid='ignore'):
            worst_ratio = float(np.nanmax(F[mask] / np.abs(f[mask])))
        return _judge(cond, margin, np.abs(F[mask]) + M0 * np.abs(f[mask]), t[mask],
                      check_tol, {'max_F_over_f': worst_ratio})

    if cond == 'F3':
        q = float(params.get('q', 2.0))
        tail = np.geomspace(max(t_max, 1.0), 1e6, 60)
        values = q * np.log(tail) + nl.log_F(tail) - nl.alpha0 * tail ** 2
        ratios = {'log_ratio_start': float(values[0]), 'log_ratio_end': float(values[-1])}
        increasing = np.all(np.diff(values) > -ROUNDING * np.abs(values[1:]))
        if increasing and values[-1] > math.log(1e6):
            return ConditionReport(cond, 'pass', None, ratios)
        i = int(np.argmin(values))
        return ConditionReport(cond, 'fail', {'t': float(tail[i]), 'log_ratio': float(values[i])},
                               ratios, '|t|^q F / e^{alpha0 t^2} does not diverge')

    if cond == 'F4':
        mu1 = float(params.get('mu1', 4.0))
        mu2 = float(params.get('mu2', 0.0))
        if not mu1 > 2:
            raise ValueError(f"mu1 must exceed 2, got {mu1}")
        if not mu2 < mu1 / 2.0 - 1.0:
            raise ValueError(f"mu2 must be below mu1/2 - 1, got {mu2}")
        margin = f * t - mu1 * F + mu2 * v_min * t ** 2
        scale = np.abs(f * t) + mu1 * np.abs(F) + mu2 * v_min * t ** 2
        return _judge(cond, margin, scale, t, check_tol, {'mu1': mu1, 'mu2': mu2})

    if cond == 'F4prime_mono':
        mu = float(params.get('mu', 1.0 if p == 2 else 0.5))
        if p > 2 and not mu < 1:
            raise ValueError(f"mu must be below 1 for p > 2, got {mu}")
        g = (f - mu * v_min * t) / np.abs(t) ** (2.0 * p - 1.0)
        margins, scales, points = [], [], []
        for half in (t < 0, t > 0):
            gh, th = g[half], t[half]
            margins.append(np.diff(gh))
            scales.append(np.maximum(np.abs(gh[1:]), np.abs(gh[:-1])) + 1.0)
            points.append(th[1:])
        return _judge(cond, np.concatenate(margins), np.concatenate(scales),
                      np.concatenate(points), check_tol, {'mu': mu},
                      note='monotonicity of g_p on each half line')

    if cond == 'F4prime_AR':
        mu = float(params.get('mu', 4.0))
        t1 = float(params.get('t1', 0.0))
        if not mu > 2:
            raise ValueError(f"mu must exceed 2, got {mu}")
        mask = np.abs(t) >= t1
        margin = f[mask] * t[mask] - mu * F[mask]
        scale = np.abs(f[mask] * t[mask]) + mu * np.abs(F[mask])
        return _judge(cond, margin, scale, t[mask], check_tol, {'mu': mu, 't1': t1})

    # F5: f(t) = o(t) for p = 2, f(t) = O(|t|^s0) for p > 2 (exponent s taken equal to s0)
    small = np.geomspace(1e-8, 1e-2, 200)
    if p == 2:
        ratio = np.abs(nl.f(small)) / small
        ratios = {'ratio_at_min_t': float(ratio[0]), 'ratio_at_max_t': float(ratio[-1])}
        if ratio[0] <= 1e-6 * max(1.0, ratio[-1]):
            return ConditionReport(cond, 'pass', None, ratios)
        return ConditionReport(cond, 'fail', {'t': float(small[0]), 'ratio': float(ratio[0])},
                               ratios, 'f(t)/t does not vanish at 0')
    ratio = np.abs(nl.f(small)) / small ** nl.s0
    ratios = {'s0': nl.s0, 'max_ratio': float(ratio.max())}
    growth = ratio[:-1] - ratio[1:]
    # ratio must stay bounded as t -> 0: no growth towards small t beyond tolerance
    return _judge(cond, -growth, ratio[1:] + 1.0, small[:-1], check_tol, ratios,
                  note='exponent s taken equal to s0')


def _check_custom(nl, V, cond, grid, p, t, check_tol, params) -> ConditionReport:
    """Sample x at a coarse subset of nodes and keep the worst report."""
    x, y = grid.mesh
    stride = max(grid.N // 8, 1)
    Vs = sample_potential(V, grid)
    worst = None
    for i in range(0, grid.N, stride):
        for j in range(0, grid.N, stride):
            x0, y0 = float(x[i, j]), float(y[i, j])
            frozen = make_nonlinearity(
                'custom', alpha0=nl.alpha0, clamp=nl.clamp, s0=nl.s0,
                f=lambda _x, _y, s, x0=x0, y0=y0: nl.f_custom(x0, y0, s),
                F=lambda _x, _y, s, x0=x0, y0=y0: nl.F_custom(x0, y0, s),
            )
            report = check_condition(frozen, Potential('constant', float(Vs[i, j])), cond, None,
                                     p, float(np.max(np.abs(t))), check_tol, len(t), **params)
            if report.witness is not None:
                report.witness.update({'x': x0, 'y': y0})
            if worst is None or _rank(report) > _rank(worst):
                worst = report
    return worst


def _rank(report: ConditionReport) -> int:
    return {'pass': 0, 'inconclusive': 1, 'fail': 2}[report.verdict]


def check_potential(V: Potential, grid: Grid2D, group=None, sym_tol: float = 1e-10) -> ConditionReport:
    """
    Discrete (V0): V >= 0 at every node, inf V > 0 on the outer ring, and
    invariance of V under the symmetry group.
    """
    Vs = sample_potential(V, grid)
    x, y = grid.mesh
    i, j = np.unravel_index(int(np.argmin(Vs)), Vs.shape)
    ring = np.concatenate([Vs[0, :], Vs[-1, :], Vs[:, 0], Vs[:, -1]])
    ratios = {'min_V': float(Vs.min()), 'ring_inf_V': float(ring.min())}
    if Vs[i, j] < 0:
        return ConditionReport('V0', 'fail', {'x': float(x[i, j]), 'y': float(y[i, j]),
                                              'V': float(Vs[i, j])}, ratios, 'V < 0')
    if ring.min() <= 0:
        return ConditionReport('V0', 'fail', {'ring_inf_V': float(ring.min())}, ratios,
                               'V does not stay positive at the boundary')
    if group is None:
        return ConditionReport('V0', 'pass', None, ratios)

    from .grid import GridField
    from .symmetry import symmetry_defect
    defect = symmetry_defect(group, GridField(grid, np.array(Vs)))
    ratios['symmetry_defect'] = defect
    if defect <= sym_tol:
        return ConditionReport('V0', 'pass', None, ratios)
    if not group.exact and defect <= 10.0 * grid.h ** 2:
        return ConditionReport('V0', 'inconclusive', None, ratios,
                               'approximate (interpolated group)')
    return ConditionReport('V0', 'fail', {'symmetry_defect': defect}, ratios,
                           'V is not invariant under the symmetry group')


# ---------------------------------------------------------------------------
# Subcritical-theorem constants
# ---------------------------------------------------------------------------

def gamma_floor(V: Potential) -> Optional[float]:
    """min(1, sqrt(V)) for constant V, None otherwise."""
    if not V.is_constant:
        return None
    return min(1.0, math.sqrt(V.value))


def estimate_gamma(V: Potential, grid: Grid2D, samples: int = 20, seed: int = 0) -> float:
    """
    Empirical upper estimate of inf ||u|| / ||u||_{H^1}.

    Minimises the ratio over random sums of Gaussians; for constant V the
    analytic value min(1, sqrt(V)) caps the estimate.
    """
    from .grid import GridField, dirichlet_form, quadrature

    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    Vs = sample_potential(V, grid)
    x, y = grid.mesh
    best = np.inf
    for _ in range(samples):
        values = np.zeros((grid.N, grid.N))
        for _ in range(3):
            cx, cy = rng.uniform(-grid.L / 4, grid.L / 4, size=2)
            width = rng.uniform(0.3, 1.5)
            values += rng.normal() * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
        u = GridField(grid, values)
        D = dirichlet_form(u, u)
        ratio = math.sqrt((D + quadrature(grid, Vs * values ** 2)) / (D + quadrature(grid, values ** 2)))
        best = min(best, ratio)
    floor = gamma_floor(V)
    if floor is not None and floor < 1.0:
        # constant V < 1: the infimum is sqrt(V), approached by spread-out fields
        best = min(best, floor)
    return best


def m_t1(nl: Nonlinearity, t1: float, n: int = 10_001) -> float:
    """sup F(t) / t^2 over 0 < |t| <= t1."""
    if t1 <= 0:
        raise ValueError(f"t1 must be positive, got {t1}")
    t = np.linspace(-t1, t1, n)
    t = t[t != 0]
    return float(np.max(nl.F(t) / t ** 2))


def check_subcritical_theorem(nl: Nonlinearity, V: Potential, grid: Grid2D, t1: float,
                              mu: float, p: float, samples: int = 20, seed: int = 0) -> ConditionReport:
    """M_t1 < (1/2 - 1/mu) gamma^2 for p > 2."""
    if p <= 2:
        raise ValueError(f"the subcritical constant check applies to p > 2, got {p}")
    if mu <= 2:
        raise ValueError(f"mu must exceed 2, got {mu}")
    M = m_t1(nl, t1)
    gamma = estimate_gamma(V, grid, samples, seed)
    bound = (0.5 - 1.0 / mu) * gamma ** 2
    ratios = {'M_t1': M, 'gamma': gamma, 'bound': bound}
    if M < bound:
        return ConditionReport('subcritical_theorem', 'pass', None, ratios)
    return ConditionReport('subcritical_theorem', 'fail', {'t1': t1, 'M_t1': M}, ratios,
                           'M_t1 exceeds (1/2 - 1/mu) gamma^2')
