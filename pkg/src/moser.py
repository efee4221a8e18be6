"""
Moser-type concentrating functions and the threshold certificate.

omega_n(x) = plateau                          for |x| <= r_in = (ln n)^{q/2} / n
           = ln(1/|x|) / sqrt(2 pi ln n)      for r_in < |x| < 1
           = 0                                for |x| >= 1

The plateau is far below grid resolution for the n of interest, so
Phi(t omega_n) is evaluated by a radial quadrature (exact plateau, Gauss-Legendre
in s = ln(1/r) on the annulus, I_0 from Newton's theorem for radial densities).
The 2-D grid value of the Dirichlet energy serves only as a resolution check.
"""

import math
import warnings
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize, special

from .functional import Model
from .grid import Grid2D, GridField, Potential, dirichlet_form


GL_PANELS = 16
GL_ORDER = 32
N_ANGLES = 64
RADIAL_STEPS = 2000
RESOLUTION_TOL = 1e-2


@dataclass(frozen=True)
class MoserFunction:
    n: float
    q: float

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def c(self) -> float:
        """sqrt(2 pi ln n)."""
        return math.sqrt(2.0 * math.pi * self.log_n)

    @property
    def log_inv_r_in(self) -> float:
        """ln(1/r_in) = ln n - (q/2) ln ln n."""
        return self.log_n - 0.5 * self.q * math.log(self.log_n)

    @property
    def r_in(self) -> float:
        return math.exp(-self.log_inv_r_in)

    @property
    def plateau(self) -> float:
        return (math.sqrt(self.log_n) / math.sqrt(2.0 * math.pi)
                - self.q * math.log(self.log_n) / (2.0 * math.sqrt(2.0 * math.pi * self.log_n)))

    @property
    def T_n(self) -> float:
        """ln n - q ln ln n + q^2 (ln ln n)^2 / (4 ln n) = 2 pi plateau^2."""
        lln = math.log(self.log_n)
        return self.log_n - self.q * lln + self.q ** 2 * lln ** 2 / (4.0 * self.log_n)

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore'):
            annulus = -np.log(r) / self.c
        return np.where(r <= self.r_in, self.plateau, np.where(r < 1.0, annulus, 0.0))

    def realize(self, grid: Grid2D) -> GridField:
        return GridField(grid, self.profile(grid.radius))


def build_moser(n: float, q: float = 2.0, grid: Optional[Grid2D] = None) -> MoserFunction:
    """
    Build omega_n; optionally check that the grid resolves the plateau.

    Parameters:
    -----------
    n : float
        Concentration index (ln ln n > 0 needs n > e)
    q : float
        Exponent from the growth condition at infinity (>= 2)
    grid : Grid2D, optional
        Grid on which the function will be sampled

    Returns:
    --------
    MoserFunction
    """
    if not n > math.e:
        raise ValueError(f"n must exceed e, got {n}")
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    mf = MoserFunction(float(n), float(q))
    if mf.log_inv_r_in <= 0:
        raise ValueError(f"r_in >= 1 for n={n:g}, q={q:g}")
    if grid is not None and grid.h >= mf.r_in / 2.0:
        warnings.warn(
            f"Grid spacing h={grid.h:.3e} does not resolve the plateau radius "
            f"r_in={mf.r_in:.3e}; use the radial evaluator",
            stacklevel=2,
        )
    return mf


class MoserGradNorm(NamedTuple):
    analytic: float
    radial: float
    grid: Optional[float]


def moser_grad_norm_sq(n: float, q: float = 2.0, grid: Optional[Grid2D] = None) -> MoserGradNorm:
    """
    int |grad omega_n|^2: analytic 1 - q ln ln n / (2 ln n), a radial finite-difference
    value on a geometric r-grid, and the 2-D grid value when a grid is given.
    """
    mf = build_moser(n, q, grid)
    analytic = mf.log_inv_r_in / mf.log_n

    r = mf.r_in * np.exp(mf.log_inv_r_in * np.arange(RADIAL_STEPS + 1) / RADIAL_STEPS)
    w = mf.profile(r)
    w[-1] = 0.0
    slopes = np.diff(w) / np.diff(r)
    radial = float(np.sum(slopes ** 2 * math.pi * np.diff(r ** 2)))

    grid_value = None
    if grid is not None:
        u = mf.realize(grid)
        grid_value = dirichlet_form(u, u)
    return MoserGradNorm(analytic, radial, grid_value)


def _gauss_legendre(a: float, b: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


def angular_mean(V: Potential, r: np.ndarray, n_angles: int = N_ANGLES) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    rr = np.asarray(r, dtype=float)[:, None]
    return np.mean(V(rr * np.cos(theta), rr * np.sin(theta)), axis=1)


def v1_max(V: Potential, n_r: int = 64, n_angles: int = N_ANGLES) -> float:
    """max of V over the closed unit disk by polar sampling."""
    r = np.linspace(0.0, 1.0, n_r)[:, None]
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    return float(np.max(V(r * np.cos(theta), r * np.sin(theta))))


class RadialEvaluator:
    """Phi(t omega_n) by 1-D radial quadrature."""

    def __init__(self, mf: MoserFunction, model: Model):
        if model.nonlinearity.family == 'custom':
            raise ValueError("The radial evaluator needs an autonomous nonlinearity")
        self.mf = mf
        self.model = model
        p = model.p
        S = mf.log_inv_r_in
        c = mf.c
        plateau = mf.plateau
        V = model.potential

        # annulus r = e^{-s}, s in [0, S], dA = 2 pi e^{-2s} ds
        s, ws = _gauss_legendre(0.0, S, GL_PANELS, GL_ORDER)
        r = np.exp(-s)
        dA = 2.0 * np.pi * np.exp(-2.0 * s) * ws
        omega = s / c
        # plateau disk r in [0, r_in]
        rp, wp = _gauss_legendre(0.0, mf.r_in, 1, GL_ORDER)
        dAp = 2.0 * np.pi * rp * wp

        self.omega = omega
        self.dA = dA
        self.plateau_area = math.pi * mf.r_in ** 2
        self.grad = S / mf.log_n
        self.delta_n = plateau ** 2 * self.plateau_area + float(np.sum(omega ** 2 * dA))
        self.potential_part = (plateau ** 2 * float(np.sum(angular_mean(V, rp) * dAp))
                               + float(np.sum(angular_mean(V, r) * omega ** 2 * dA)))
        self.norm_sq = self.grad + self.potential_part

        # I_0 = 2 int rho ln|x| M(|x|) dA with rho = omega^p and M the enclosed mass
        rho_p = plateau ** p
        mass_plateau = rho_p * self.plateau_area
        mass_scale = 2.0 * math.pi * c ** (-p) * 2.0 ** (-(p + 1.0)) * special.gamma(p + 1.0)
        mass_outer = mass_scale * (special.gammaincc(p + 1.0, 2.0 * s)
                                   - special.gammaincc(p + 1.0, 2.0 * S))
        enclosed = mass_plateau + mass_outer
        r_in = mf.r_in
        plateau_i0 = 4.0 * math.pi ** 2 * rho_p ** 2 * (
            r_in ** 4 * math.log(r_in) / 4.0 - r_in ** 4 / 16.0)
        annulus_i0 = 2.0 * float(np.sum(omega ** p * (-s) * enclosed * dA))
        self.I0 = plateau_i0 + annulus_i0

    def potential_integral(self, t: float) -> float:
        nl = self.model.nonlinearity
        with np.errstate(over='ignore', invalid='ignore'):
            plateau = float(nl.F(t * self.mf.plateau)) * self.plateau_area
            annulus = float(np.sum(nl.F(t * self.omega) * self.dA))
        return plateau + annulus

    def phi(self, t: float) -> float:
        p = self.model.p
        F = self.potential_integral(t)
        if not np.isfinite(F):
            return -np.inf
        return 0.5 * t ** 2 * self.norm_sq + t ** (2 * p) * self.I0 / (4.0 * p * math.pi) - F


def maximize_on_ray(evaluator: RadialEvaluator, t_lo: float = 1e-3, t_hi: float = 1e2,
                    n_coarse: int = 200, xtol: float = 1e-8):
    """max_{t >= 0} Phi(t omega): log-spaced scan, then golden-section refinement."""
    ts = np.geomspace(t_lo, t_hi, n_coarse)
    values = np.array([evaluator.phi(float(t)) for t in ts])
    i = int(np.argmax(values))
    if i == 0 or i == len(ts) - 1:
        return float(ts[i]), max(0.0, float(values[i]))
    result = optimize.minimize_scalar(lambda t: -evaluator.phi(t),
                                      bracket=(ts[i - 1], ts[i], ts[i + 1]),
                                      method='golden', tol=xtol)
    best_t, best = float(result.x), float(-result.fun)
    if best < values[i]:
        best_t, best = float(ts[i]), float(values[i])
    # the maximum over t >= 0 is at least Phi(0) = 0
    return best_t, max(0.0, best)


# ---------------------------------------------------------------------------
# Envelope phi_n(t) on sqrt(3 pi/alpha0) <= t <= sqrt(8 pi/alpha0)
# ---------------------------------------------------------------------------

def _require_critical(model: Model) -> float:
    if not model.is_critical:
        raise ValueError("Moser estimates need the critical_exp family")
    return model.nonlinearity.alpha0


def case2_window(alpha0: float):
    return math.sqrt(3.0 * math.pi / alpha0), math.sqrt(8.0 * math.pi / alpha0)


def _envelope_log_coefficient(mf: MoserFunction, alpha0: float) -> float:
    """ln of alpha0^{q/2} pi (ln n)^q / (2^q n^2 T_n^{q/2})."""
    q = mf.q
    return (0.5 * q * math.log(alpha0) + math.log(math.pi) + q * math.log(mf.log_n)
            - q * math.log(2.0) - 2.0 * mf.log_n - 0.5 * q * math.log(mf.T_n))


def case2_envelope(n: float, q: float, t, model: Model, delta_n: Optional[float] = None):
    """
    phi_n(t) = ((1 + V1 delta_n)/2) t^2 - (q ln ln n / (4 ln n)) t^2
               - alpha0^{q/2} pi (ln n)^q / (2^q n^2 T_n^{q/2}) e^{(alpha0/2pi) t^2 T_n}
    """
    alpha0 = _require_critical(model)
    mf = build_moser(n, q)
    lo, hi = case2_window(alpha0)
    t = np.asarray(t, dtype=float)
    if np.any(t < lo * (1 - 1e-12)) or np.any(t > hi * (1 + 1e-12)):
        raise ValueError(f"t outside the window [{lo:.6g}, {hi:.6g}]")
    if delta_n is None:
        delta_n = RadialEvaluator(mf, model).delta_n
    V1 = v1_max(model.potential)
    quad = (0.5 * (1.0 + V1 * delta_n) - q * math.log(mf.log_n) / (4.0 * mf.log_n)) * t ** 2
    log_term = _envelope_log_coefficient(mf, alpha0) + alpha0 / (2.0 * math.pi) * t ** 2 * mf.T_n
    value = quad - np.exp(log_term)
    return float(value) if value.ndim == 0 else value


def envelope_dominance(n: float, q: float, t_values: Sequence[float], model: Model,
                       tol: float = 1e-9) -> pd.DataFrame:
    """
    Compare Phi(t omega_n) with phi_n(t) on the window.

    'applicable' marks t where |s|^q F(s) / e^{alpha0 s^2} >= 1 at s = t * plateau,
    the growth threshold the envelope relies on.
    """
    alpha0 = _require_critical(model)
    mf = build_moser(n, q)
    evaluator = RadialEvaluator(mf, model)
    nl = model.nonlinearity
    rows = []
    for t in t_values:
        t = float(t)
        value = evaluator.phi(t)
        env = case2_envelope(n, q, t, model, evaluator.delta_n)
        s = t * mf.plateau
        log_ratio = q * math.log(s) + float(nl.log_F(s)) - alpha0 * s ** 2
        rows.append({
            't': t,
            'phi': value,
            'envelope': env,
            'applicable': bool(log_ratio >= 0.0),
            'dominated': bool(value <= env + tol * (1.0 + abs(env))),
        })
    return pd.DataFrame(rows)


def case_bounds(n: float, q: float, model: Model, n_t: int = 50) -> dict:
    """
    Case (i): Phi(t omega_n) <= ((1 + V1 delta_n)/2) t^2 on t <= sqrt(3pi/alpha0).
    Case (iii): Phi(t omega_n) <= 0 on t >= sqrt(8pi/alpha0).
    """
    alpha0 = _require_critical(model)
    mf = build_moser(n, q)
    evaluator = RadialEvaluator(mf, model)
    lo, hi = case2_window(alpha0)
    V1 = v1_max(model.potential)

    t1 = np.linspace(0.0, lo, n_t)
    excess = [evaluator.phi(float(t)) - 0.5 * (1.0 + V1 * evaluator.delta_n) * t ** 2 for t in t1]
    t3 = np.geomspace(hi, 10.0 * hi, n_t)
    tail = [evaluator.phi(float(t)) for t in t3]
    return {
        'n': mf.n,
        'case_i_max_excess': float(np.max(excess)),
        'case_i_pass': bool(np.max(excess) <= 1e-12),
        'case_iii_max_phi': float(np.max(tail)),
        'case_iii_pass': bool(np.max(tail) <= 0.0),
    }


def maximizer_trend(n_list: Sequence[float], q: float, model: Model) -> pd.DataFrame:
    """
    Maximiser t_n of phi_n over t > 0 against 4 pi / alpha0.

    phi_n(t) = A t^2 - B e^{C t^2} peaks at t^2 = ln(A / (B C)) / C.
    deviation = alpha0 t_n^2 / (4 pi) - 1; leading_term = (q - 1) ln ln n / (2 ln n).
    """
    alpha0 = _require_critical(model)
    V1 = v1_max(model.potential)
    rows = []
    for n in n_list:
        mf = build_moser(n, q)
        delta_n = RadialEvaluator(mf, model).delta_n
        A = 0.5 * (1.0 + V1 * delta_n) - q * math.log(mf.log_n) / (4.0 * mf.log_n)
        C = alpha0 / (2.0 * math.pi) * mf.T_n
        log_ratio = math.log(A) - _envelope_log_coefficient(mf, alpha0) - math.log(C)
        t_sq = log_ratio / C if log_ratio > 0 else float('nan')
        rows.append({
            'n': float(n),
            't_n_sq': t_sq,
            'deviation': alpha0 * t_sq / (4.0 * math.pi) - 1.0,
            'leading_term': (q - 1.0) * math.log(mf.log_n) / (2.0 * mf.log_n),
        })
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Threshold certificate
# ---------------------------------------------------------------------------

@dataclass
class ThresholdCertificate:
    n0: Optional[float]
    max_phi: Optional[float]
    threshold: float
    rows: pd.DataFrame
    verdict: str

    def to_dict(self) -> dict:
        return {
            'n0': self.n0,
            'max_t_phi': self.max_phi,
            'threshold': self.threshold,
            'verdict': self.verdict,
            'rows': self.rows.to_dict(orient='records'),
        }


MOSER_COLUMNS = ['n', 'grad_norm_sq', 'grid_grad_sq', 'rel_diff', 'resolved', 'delta_n', 'max_t_phi',
                 'threshold', 'pass', 't_max', 'error']


def threshold_certificate(n_list: Sequence[float], model: Model, q: float = 2.0,
                          margin: float = 1e-3, verbose: bool = False) -> ThresholdCertificate:
    """
    Find the first n with max_{t>=0} Phi(t omega_n) < 2 pi/alpha0 - margin.

    Parameters:
    -----------
    n_list : sequence of float
        Candidate concentration indices, tried in order
    model : Model
        Critical-family model (V, f, p)
    q : float
        Moser exponent
    margin : float
        Safety margin below the threshold

    Returns:
    --------
    ThresholdCertificate
        n0 and the certified maximum, or an inconclusive verdict when no n qualifies.
        Rows flag whether the 2-D grid resolves omega_n (rel_diff <= RESOLUTION_TOL)
    """
    alpha0 = _require_critical(model)
    threshold = 2.0 * math.pi / alpha0
    rows: List[dict] = []
    n0, best = None, None
    for n in n_list:
        row = {'n': float(n), 'grad_norm_sq': np.nan, 'grid_grad_sq': np.nan, 'rel_diff': np.nan,
               'resolved': False, 'delta_n': np.nan, 'max_t_phi': np.nan,
               'threshold': threshold, 'pass': False, 't_max': np.nan, 'error': ''}
        try:
            mf = build_moser(n, q)
        except ValueError as e:
            row['error'] = str(e)
            rows.append(row)
            if verbose:
                print(f"  n={float(n):.3g}: skipped ({e})")
            continue
        evaluator = RadialEvaluator(mf, model)
        t_star, value = maximize_on_ray(evaluator)
        passed = value < threshold - margin
        # the 2-D value only cross-checks resolution; the verdict uses the radial one
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            grid_value = moser_grad_norm_sq(mf.n, q, model.grid).grid
        rel_diff = abs(grid_value - evaluator.grad) / evaluator.grad
        row.update({'grad_norm_sq': evaluator.grad, 'grid_grad_sq': grid_value, 'rel_diff': rel_diff,
                    'resolved': bool(rel_diff <= RESOLUTION_TOL), 'delta_n': evaluator.delta_n,
                    'max_t_phi': value, 'pass': bool(passed), 't_max': t_star})
        rows.append(row)
        if verbose:
            print(f"  n={mf.n:.3g}: max_t Phi = {value:.6f} at t = {t_star:.6f} "
                  f"(threshold {threshold:.6f})"
                  + ("" if row["resolved"] else f", grid misses the plateau by {rel_diff:.1%}"))
        if passed and n0 is None:
            n0, best = mf.n, value
    verdict = 'pass' if n0 is not None else 'inconclusive'
    return ThresholdCertificate(n0, best, threshold, pd.DataFrame(rows, columns=MOSER_COLUMNS), verdict)


def max_on_moser_ray(n: float, q: float, model: Model) -> float:
    """max_{t>=0} Phi(t omega_n) (the critical-level upper bound used by the solver)."""
    return maximize_on_ray(RadialEvaluator(build_moser(n, q), model))[1]
