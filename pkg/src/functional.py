"""
Energy functional and derivative on grid fields.

Phi(u) = 1/2 ||u||^2 + (1/(4 p pi)) I_0(u) - int F(x, u)

with the Gateaux derivative
<Phi'(u), v> = <u, v> + (1/2pi) A_0(|u|^p, |u|^{p-2} u v) - int f(x, u) v.
Also the small-ball lower bound, the fiber inequality machinery and the
residual proxy used by the solvers.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from .grid import (Grid2D, GridField, Potential, inner_H, integrate, neg_laplacian,
                   norm_H, norm_Lq, norm_star, quadrature, sample_potential)
from .logkernel import KernelSet, functional_I, get_kernel_set, newton_potential
from .nonlinearity import Nonlinearity


@dataclass(frozen=True, eq=False)
class Model:
    """Everything Phi depends on: grid, V, (f, F), p, kernel plans, symmetry group."""

    grid: Grid2D
    potential: Potential
    nonlinearity: Nonlinearity
    p: float
    kernels: KernelSet
    group: Optional[object] = None

    @property
    def V(self) -> np.ndarray:
        return sample_potential(self.potential, self.grid)

    @property
    def is_critical(self) -> bool:
        return self.nonlinearity.family == 'critical_exp'

    @property
    def threshold(self) -> Optional[float]:
        """2 pi / alpha0 for critical-growth models."""
        return 2.0 * math.pi / self.nonlinearity.alpha0 if self.is_critical else None


def make_model(grid: Grid2D, potential: Potential, nonlinearity: Nonlinearity,
               p: float = 2.0, group=None, flip_a2: bool = False) -> Model:
    """Assemble a model; kernel plans are shared per grid."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    return Model(grid, potential, nonlinearity, float(p), get_kernel_set(grid, flip_a2), group)


def _f_values(model: Model, values: np.ndarray) -> np.ndarray:
    x, y = model.grid.mesh
    with np.errstate(over='ignore', invalid='ignore'):
        return model.nonlinearity.f(values, x, y)


def _F_values(model: Model, values: np.ndarray) -> np.ndarray:
    x, y = model.grid.mesh
    with np.errstate(over='ignore', invalid='ignore'):
        return model.nonlinearity.F(values, x, y)


def _weighted(values: np.ndarray, p: float) -> np.ndarray:
    """|u|^{p-2} u, equal to 0 at u = 0."""
    if p == 2:
        return values
    return np.abs(values) ** (p - 2.0) * values


# ---------------------------------------------------------------------------
# Energy and gradient
# ---------------------------------------------------------------------------

@dataclass
class EnergyBreakdown:
    quadratic: float
    nonlocal_: float
    potential_term: float

    @property
    def total(self) -> float:
        return self.quadratic + self.nonlocal_ - self.potential_term

    @property
    def phi(self) -> float:
        return self.total

    def to_dict(self) -> dict:
        return {
            'phi': self.total,
            'quadratic': self.quadratic,
            'nonlocal': self.nonlocal_,
            'potential_term': self.potential_term,
        }


def energy(u: GridField, model: Model) -> EnergyBreakdown:
    """
    Evaluate the three terms of Phi(u).

    Parameters:
    -----------
    u : GridField
        Field on the model grid
    model : Model
        Assembled model

    Returns:
    --------
    EnergyBreakdown
        quadratic = 1/2 ||u||^2, nonlocal = I_0(u)/(4 p pi), potential_term = int F(x, u)
    """
    p = model.p
    quadratic = 0.5 * inner_H(u, u, model.potential)
    nonlocal_ = functional_I(model.kernels, u, p, 0) / (4.0 * p * math.pi)
    with np.errstate(over='ignore', invalid='ignore'):
        potential_term = quadrature(model.grid, _F_values(model, u.values))
    return EnergyBreakdown(quadratic, nonlocal_, potential_term)


def phi(u: GridField, model: Model) -> float:
    return energy(u, model).total


def gradient(u: GridField, model: Model) -> GridField:
    """
    L^2 representative g of Phi'(u): integrate(g * v) = <Phi'(u), v>.

    g = -Delta_h u + V u + phi_u |u|^{p-2} u - f(x, u), phi_u the Newton potential.
    """
    p = model.p
    linear = neg_laplacian(u).values + model.V * u.values
    phi_u = newton_potential(model.kernels, u, p).values
    g = linear + phi_u * _weighted(u.values, p) - _f_values(model, u.values)
    return GridField(u.grid, g)


def derivative(u: GridField, v: GridField, model: Model) -> float:
    """<Phi'(u), v>."""
    return integrate(GridField(u.grid, gradient(u, model).values * v.values))


def nehari_value(u: GridField, model: Model) -> float:
    """<Phi'(u), u>; zero on the Nehari set."""
    return derivative(u, u, model)


def residual_proxy(u: GridField, model: Model, g: Optional[GridField] = None) -> float:
    """rho = ||g||_2 (1 + ||u|| + ||u||_*), stand-in for the dual-norm Cerami residual."""
    if g is None:
        g = gradient(u, model)
    return norm_Lq(g, 2.0) * (1.0 + norm_H(u, model.potential) + norm_star(u, model.p))


def energy_report(u: GridField, model: Model) -> dict:
    """JSON-ready energy entry with the residual proxy."""
    report = energy(u, model).to_dict()
    report['residual_proxy'] = residual_proxy(u, model)
    return report


@dataclass
class CeramiDiagnostic:
    iteration: int
    phi: float
    rho: float
    defect: float = 0.0

    def to_dict(self) -> dict:
        return {'iter': self.iteration, 'phi': self.phi, 'rho': self.rho, 'defect': self.defect}


# ---------------------------------------------------------------------------
# Fiber map t -> Phi(t u)
# ---------------------------------------------------------------------------

class FiberMap:
    """
    zeta(t) = Phi(t u) with the quadratic and nonlocal parts precomputed.

    zeta(t)  = t^2 A/2 + t^{2p} I_0/(4 p pi) - int F(x, t u)
    zeta'(t) = t A + t^{2p-1} I_0/(2 pi) - int f(x, t u) u
    """

    def __init__(self, u: GridField, model: Model):
        self.u = u
        self.model = model
        self.A = inner_H(u, u, model.potential)
        self.I0 = functional_I(model.kernels, u, model.p, 0)
        self.scale = float(np.max(np.abs(u.values)))
        if self.scale == 0:
            raise ValueError("Fiber map of the zero field is degenerate")

    def value(self, t: float) -> float:
        p = self.model.p
        with np.errstate(over='ignore', invalid='ignore'):
            F = quadrature(self.model.grid, _F_values(self.model, t * self.u.values))
        if not np.isfinite(F):
            return -np.inf
        return 0.5 * t ** 2 * self.A + t ** (2 * p) * self.I0 / (4.0 * p * math.pi) - F

    def derivative(self, t: float) -> float:
        p = self.model.p
        with np.errstate(over='ignore', invalid='ignore'):
            fu = quadrature(self.model.grid, _f_values(self.model, t * self.u.values) * self.u.values)
        if not np.isfinite(fu):
            return -np.inf
        return t * self.A + t ** (2 * p - 1) * self.I0 / (2.0 * math.pi) - fu

    def sample(self, t: Sequence[float]) -> np.ndarray:
        return np.array([self.value(float(s)) for s in t])

    def default_ray(self, n: int = 200) -> np.ndarray:
        """Log-spaced t in [1e-3, 1e3] / max|u|."""
        return np.geomspace(1e-3, 1e3, n) / self.scale


class RayCheck(NamedTuple):
    t_negative: Optional[float]
    decreasing: bool


def ray_check(u: GridField, model: Model, t_max: float = 1e3, n: int = 400) -> RayCheck:
    """Find t <= t_max with Phi(t u) < 0 and check Phi decreases beyond it on the ray."""
    fiber = FiberMap(u, model)
    ts = np.geomspace(1e-3, t_max, n)
    values = fiber.sample(ts)
    negative = np.nonzero(values < 0)[0]
    if negative.size == 0:
        return RayCheck(None, False)
    i = int(negative[0])
    tail = np.where(np.isfinite(values[i:]), values[i:], -np.finfo(float).max)
    steps = np.diff(tail)
    decreasing = bool(np.all(steps <= 1e-12 * (1.0 + np.abs(tail[:-1]))))
    return RayCheck(float(ts[i]), decreasing)


# ---------------------------------------------------------------------------
# Small-ball lower bound Phi(u) >= 1/4 ||u||^2 - C3 ||u||^3 - C4 ||u||^{2p}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmallBallConstants:
    C3: float
    C4: float
    regime: float
    kappa0: float

    def rhs(self, s, p: float):
        s = np.asarray(s, dtype=float)
        return 0.25 * s ** 2 - self.C3 * s ** 3 - self.C4 * s ** (2.0 * p)


def small_ball_regime(model: Model) -> float:
    """Radius sqrt(pi/alpha0) of the small-ball bound (1 without critical growth)."""
    if model.is_critical:
        return math.sqrt(math.pi / model.nonlinearity.alpha0)
    return 1.0


def calibrate_small_ball(model: Model, directions: Sequence[GridField],
                         n_sweep: int = 40) -> SmallBallConstants:
    """
    Fit C3, C4 so the bound holds on a sweep s * w/||w||, s in (0, regime].

    C3 takes half of the largest cubic defect, C4 absorbs what remains; kappa0
    is the maximum of the fitted right-hand side over (0, regime].
    """
    p = model.p
    regime = small_ball_regime(model)
    s = np.linspace(regime / n_sweep, regime, n_sweep)
    energies = []
    for w in directions:
        unit = w * (1.0 / norm_H(w, model.potential))
        energies.append(np.array([phi(unit * float(si), model) for si in s]))
    energies = np.array(energies)

    defect3 = (0.25 * s ** 2 - energies) / s ** 3
    C3 = 0.5 * max(0.0, float(defect3.max()))
    defect4 = (0.25 * s ** 2 - C3 * s ** 3 - energies) / s ** (2.0 * p)
    C4 = max(0.0, float(defect4.max()))

    def negative_rhs(x):
        return -(0.25 * x ** 2 - C3 * x ** 3 - C4 * x ** (2.0 * p))

    best = optimize.minimize_scalar(negative_rhs, bounds=(0.0, regime), method='bounded',
                                    options={'xatol': 1e-10})
    kappa0 = max(0.0, float(-best.fun), float(-negative_rhs(regime)))
    return SmallBallConstants(C3, C4, regime, kappa0)


def small_ball_bound(u: GridField, model: Model, constants: SmallBallConstants):
    """
    Return (Phi(u), 1/4 ||u||^2 - C3 ||u||^3 - C4 ||u||^{2p}).

    Raises ValueError outside the regime ||u|| <= sqrt(pi/alpha0).
    """
    s = norm_H(u, model.potential)
    if s > constants.regime * (1.0 + 1e-12):
        raise ValueError(f"||u|| = {s:.6g} lies outside the small-ball regime "
                         f"{constants.regime:.6g}")
    if s == 0:
        return 0.0, 0.0
    return phi(u, model), float(constants.rhs(s, model.p))


# ---------------------------------------------------------------------------
# Fiber inequality
# ---------------------------------------------------------------------------

def g_poly(t, p: float):
    """g(t) = t^{2p} - p t^2 + p - 1, minimal (= 0) at t = 1."""
    t = np.asarray(t, dtype=float)
    return t ** (2.0 * p) - p * t ** 2 + p - 1.0


def fiber_gap(u: GridField, t: float, model: Model) -> float:
    """
    Phi(u) - Phi(t u) - ((1 - t^{2p})/2p) <Phi'(u), u> - (g(t)/2p) ||u||^2.

    Nonnegative whenever f(s)/|s|^{2p-1} is nondecreasing.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    p = model.p
    return (phi(u, model) - phi(u * t, model)
            - (1.0 - t ** (2 * p)) / (2 * p) * nehari_value(u, model)
            - float(g_poly(t, p)) / (2 * p) * inner_H(u, u, model.potential))


def ar_combo_bound(u: GridField, model: Model, lam0: float, mu1: float, mu2: float) -> float:
    """
    Phi(u) - lam0 <Phi'(u),u> - (1/2 - mu2/mu1 - lam0) ||u||^2 - (lam0 - 1/mu1) int f u.

    Requires lam0 in (1/mu1, 1/2 - mu2/mu1).
    """
    lo, hi = 1.0 / mu1, 0.5 - mu2 / mu1
    if not lo < lam0 < hi:
        raise ValueError(f"lambda0 outside interval ({lo:.6g}, {hi:.6g}): {lam0}")
    fu = quadrature(model.grid, _f_values(model, u.values) * u.values)
    return (phi(u, model) - lam0 * nehari_value(u, model)
            - (0.5 - mu2 / mu1 - lam0) * inner_H(u, u, model.potential)
            - (lam0 - 1.0 / mu1) * fu)


def pointwise_gap(nl: Nonlinearity, V_value: float, t, p: float, mu: float, x=None):
    """(1/2p) f(x,t) t - F(x,t) - (mu (1-p)/2p) V(x) t^2."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    xx, yy = (None, None) if x is None else x
    t = np.asarray(t, dtype=float)
    lhs = nl.f(t, xx, yy) * t / (2.0 * p) - nl.F(t, xx, yy)
    return lhs - mu * (1.0 - p) / (2.0 * p) * V_value * t ** 2


def sweep_fiber_gap(fields: List[GridField], ts: Sequence[float], model: Model) -> float:
    """Smallest fiber_gap over a (u, t) sweep."""
    return min(fiber_gap(u, float(t), model) for u in fields for t in ts)
