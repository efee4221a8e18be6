"""
Critical-point search for Phi on the G-invariant fields.

- fiber_maximize: unique maximiser t_u of t -> Phi(t u), i.e. t_u u on the Nehari set
- nehari_minimize: projected Sobolev-gradient descent on the Nehari set
- mountain_pass: descent of the highest node of a path from 0 to e, Phi(e) < 0
- moser_level_bound: upper level for the critical family from a Moser ray below 2pi/alpha0

Descent directions are H-gradients d = (-Delta_h + V)^{-1} g, so that
<d, v> = <Phi'(u), v> in the H inner product.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, sparse
from scipy.sparse.linalg import factorized

from .functional import (CeramiDiagnostic, FiberMap, Model, calibrate_small_ball, energy,
                         gradient, nehari_value, phi, residual_proxy)
from .grid import GridField, inner_H, integrate, load_field, norm_H
from .moser import max_on_moser_ray
from .symmetry import SymmetryGroup, group_average, symmetry_defect


METHODS = ('nehari', 'mountain_pass')
INITIAL_FIELDS = ('ring', 'random', 'file')
RELAXED_DECREASE = 1e-12


class DivergenceError(RuntimeError):
    """Raised when a descent cannot decrease the energy or the path collapses."""


@dataclass
class SolveConfig:
    method: str = 'nehari'
    max_iter: int = 500
    tol: float = 1e-6
    step0: float = 1.0
    armijo: float = 1e-4
    max_backtracks: int = 20
    path_nodes: int = 40
    reparam_every: int = 50
    initial: str = 'ring'
    initial_file: Optional[str] = None
    seed: int = 0
    sym_tol: float = 1e-10
    moser_n_list: Tuple[float, ...] = (1e4, 1e6, 1e8, 1e10)
    moser_q: float = 2.0
    verbose: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown method: {self.method}")
        if self.initial not in INITIAL_FIELDS:
            raise ValueError(f"Unknown initial field: {self.initial}")
        if self.initial == 'file' and not self.initial_file:
            raise ValueError("initial = 'file' needs initial_file")
        for name in ('tol', 'step0', 'armijo', 'sym_tol'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise ValueError("max_iter and max_backtracks must be >= 1")
        if self.path_nodes < 3:
            raise ValueError(f"path_nodes must be >= 3, got {self.path_nodes}")
        if not self.moser_n_list:
            raise ValueError("moser_n_list must not be empty")
        self.moser_n_list = tuple(float(n) for n in self.moser_n_list)


@dataclass
class SolveReport:
    method: str
    verdict: str
    phi: float
    rho: float
    defect: float
    t_u: float
    iterations: int
    solution: GridField = field(repr=False)
    trace: List[CeramiDiagnostic] = field(default_factory=list, repr=False)
    energy: dict = field(default_factory=dict)
    nehari_value: float = 0.0
    level_upper: Optional[float] = None
    level_source: Optional[str] = None
    kappa0: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'verdict': self.verdict,
            'phi': self.phi,
            'rho': self.rho,
            'defect': self.defect,
            't_u': self.t_u,
            'iterations': self.iterations,
            'nehari_value': self.nehari_value,
            'norm_sq': self.energy.get('quadratic', float('nan')) * 2.0,
            'energy': dict(self.energy),
            'level_upper': self.level_upper,
            'level_source': self.level_source,
            'kappa0': self.kappa0,
        }

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame([d.to_dict() for d in self.trace], columns=['iter', 'phi', 'rho', 'defect'])


# ---------------------------------------------------------------------------
# Preconditioner
# ---------------------------------------------------------------------------

class SobolevPreconditioner:
    """Sparse LU of -Delta_h + V (5-point stencil, zero extension)."""

    def __init__(self, model: Model):
        grid = model.grid
        N, h = grid.N, grid.h
        D = sparse.diags([-np.ones(N - 1), 2.0 * np.ones(N), -np.ones(N - 1)], [-1, 0, 1]) / h ** 2
        eye = sparse.identity(N)
        A = sparse.kron(D, eye) + sparse.kron(eye, D) + sparse.diags(model.V.ravel())
        self.matrix = A.tocsc()
        self._solve = factorized(self.matrix)
        self.grid = grid

    def apply(self, g: GridField) -> GridField:
        return GridField(self.grid, self._solve(g.values.ravel()).reshape(g.values.shape))


def _project(u: GridField, G: Optional[SymmetryGroup]) -> GridField:
    return group_average(G, u) if G is not None else u


def _defect(u: GridField, G: Optional[SymmetryGroup]) -> float:
    return symmetry_defect(G, u) if G is not None else 0.0


# ---------------------------------------------------------------------------
# Fiber maximisation
# ---------------------------------------------------------------------------

class FiberMax(NamedTuple):
    t: float
    value: float
    sign_changes: int


def fiber_sign_changes(u: GridField, model: Model, n: int = 10_000) -> int:
    """Number of sign changes of zeta'(t) on a log-spaced ray."""
    fiber = FiberMap(u, model)
    ts = np.geomspace(1e-3, 1e3, n) / fiber.scale
    signs = np.sign([fiber.derivative(float(t)) for t in ts])
    signs = signs[signs != 0]
    return int(np.count_nonzero(np.diff(signs)))


def fiber_maximize(u: GridField, model: Model, n_scan: int = 200) -> FiberMax:
    """
    Maximise zeta(t) = Phi(t u) over t > 0.

    Log-spaced scan over [1e-3, 1e3] / max|u|, golden-section refinement of the
    best bracket, then a root polish of zeta'(t) inside it.

    Returns:
    --------
    FiberMax
        t_u, Phi(t_u u) and the number of sign changes of zeta' on the scan
    """
    fiber = FiberMap(u, model)
    ts = fiber.default_ray(n_scan)
    values = fiber.sample(ts)
    i = int(np.argmax(values))
    if values[i] <= 0 or i == 0 or i == len(ts) - 1:
        raise ValueError("No positive interior maximum of Phi along the ray")

    derivs = np.array([fiber.derivative(float(t)) for t in ts])
    signs = np.sign(derivs[derivs != 0])
    sign_changes = int(np.count_nonzero(np.diff(signs)))

    result = optimize.minimize_scalar(lambda t: -fiber.value(t),
                                      bracket=(ts[i - 1], ts[i], ts[i + 1]), method='golden')
    t_best = float(result.x)
    lo, hi = ts[i - 1], ts[i + 1]
    d_lo, d_hi = fiber.derivative(lo), fiber.derivative(hi)
    if d_lo > 0 > d_hi:
        t_best = optimize.brentq(fiber.derivative, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return FiberMax(t_best, fiber.value(t_best), sign_changes)


# ---------------------------------------------------------------------------
# Diagnostics and initial fields
# ---------------------------------------------------------------------------

def residual(u: GridField, model: Model, iteration: int = 0,
             group: Optional[SymmetryGroup] = None) -> CeramiDiagnostic:
    """Energy, residual proxy and symmetry defect of one iterate."""
    if not np.any(u.values):
        return CeramiDiagnostic(iteration, 0.0, 0.0, 0.0)
    return CeramiDiagnostic(iteration, phi(u, model), residual_proxy(u, model), _defect(u, group))


def ring_field(model: Model, k: int, radius: float = 1.0, amplitude: float = 1.0,
               width: float = 0.5) -> GridField:
    """k Gaussian bumps evenly spaced on a circle, the first on the positive x axis."""
    x, y = model.grid.mesh
    values = np.zeros_like(x)
    for j in range(k):
        theta = 2.0 * math.pi * j / k
        cx, cy = radius * math.cos(theta), radius * math.sin(theta)
        values += amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
    return GridField(model.grid, values)


def random_field(model: Model, rng: np.random.Generator, n_bumps: int = 6,
                 radius: float = 2.0) -> GridField:
    """Sum of Gaussians with centres uniform in the disk B_radius."""
    x, y = model.grid.mesh
    values = np.zeros_like(x)
    for _ in range(n_bumps):
        r = radius * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        amplitude = rng.uniform(0.5, 1.5)
        width = rng.uniform(0.4, 1.0)
        cx, cy = r * math.cos(theta), r * math.sin(theta)
        values += amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
    return GridField(model.grid, values)


def initial_field(cfg: SolveConfig, model: Model, G: Optional[SymmetryGroup],
                  rng: Optional[np.random.Generator] = None) -> GridField:
    """Starting field projected onto the G-invariant fields."""
    if cfg.initial == 'ring':
        u = ring_field(model, G.k if G is not None else 4)
    elif cfg.initial == 'random':
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        u = random_field(model, rng)
    else:
        u = load_field(cfg.initial_file, model.grid)
    u = _project(u, G)
    if not np.any(u.values):
        raise ValueError("Initial field vanishes after symmetry projection")
    return u


# ---------------------------------------------------------------------------
# Line search
# ---------------------------------------------------------------------------

def _backtrack(u: GridField, phi_u: float, d: GridField, slope: float, cfg: SolveConfig,
               candidate):
    """
    Halve eta from step0 until candidate(u - eta d) satisfies the Armijo rule.

    candidate maps a trial field to (field, energy). Falls back to the best trial
    when it does not increase the energy beyond rounding; raises otherwise.
    """
    eta = cfg.step0
    best = None
    for _ in range(cfg.max_backtracks):
        try:
            trial, value = candidate(u - d * eta)
        except ValueError:
            trial, value = None, np.inf
        if trial is not None and value <= phi_u - cfg.armijo * eta * slope:
            return trial, value
        if trial is not None and (best is None or value < best[1]):
            best = (trial, value)
        eta *= 0.5
    if best is not None and best[1] <= phi_u + RELAXED_DECREASE * (1.0 + abs(phi_u)):
        return best
    raise DivergenceError(
        f"Energy did not decrease after {cfg.max_backtracks} backtracking steps (Phi = {phi_u:.6e})"
    )


def _converged(rho: float, phi_u: float, tol: float) -> bool:
    return rho <= tol * (1.0 + abs(phi_u))


def _finish(method, u, model, G, cfg, trace, iterations, verdict, t_u, **extra) -> SolveReport:
    g = gradient(u, model)
    rho = residual_proxy(u, model, g)
    breakdown = energy(u, model)
    phi_u = breakdown.total
    if verdict == 'converged' and not (_converged(rho, phi_u, cfg.tol) and phi_u > 0):
        verdict = 'max_iter'
    return SolveReport(
        method=method, verdict=verdict, phi=phi_u, rho=rho, defect=_defect(u, G), t_u=t_u,
        iterations=iterations, solution=u, trace=trace, energy=breakdown.to_dict(),
        nehari_value=integrate(GridField(u.grid, g.values * u.values)), **extra,
    )


# ---------------------------------------------------------------------------
# Nehari minimisation
# ---------------------------------------------------------------------------

def nehari_minimize(cfg: SolveConfig, model: Model, G: Optional[SymmetryGroup],
                    u0: Optional[GridField] = None) -> SolveReport:
    """
    Minimise Phi on the Nehari set within the G-invariant fields.

    Each step moves along the H-gradient projected tangentially to the ray,
    projects onto the invariant fields and returns to the Nehari set by fiber
    maximisation; the step is halved until the Armijo rule holds.

    Parameters:
    -----------
    cfg : SolveConfig
        Iteration controls
    model : Model
        Assembled model, G-invariant
    G : SymmetryGroup or None
        Symmetry group for the projection
    u0 : GridField, optional
        Starting field; built from cfg.initial when omitted

    Returns:
    --------
    SolveReport
    """
    if cfg.verbose:
        print("Running Nehari minimization...")
    precond = SobolevPreconditioner(model)

    def to_nehari(w: GridField):
        w = _project(w, G)
        fm = fiber_maximize(w, model)
        return w * fm.t, fm.value

    u = initial_field(cfg, model, G) if u0 is None else _project(u0, G)
    u, phi_u = to_nehari(u)
    t_u = 1.0
    trace: List[CeramiDiagnostic] = []
    verdict = 'max_iter'
    it = 0
    for it in range(cfg.max_iter):
        g = gradient(u, model)
        rho = residual_proxy(u, model, g)
        trace.append(CeramiDiagnostic(it, phi_u, rho, _defect(u, G)))
        if cfg.verbose and it % 20 == 0:
            print(f"  iter {it}: phi={phi_u:.10f}, rho={rho:.3e}")
        if _converged(rho, phi_u, cfg.tol):
            verdict = 'converged'
            break

        d = _project(precond.apply(g), G)
        d = d - u * (inner_H(d, u, model.potential) / inner_H(u, u, model.potential))
        slope = inner_H(d, d, model.potential)
        u, phi_u = _backtrack(u, phi_u, d, slope, cfg, to_nehari)
    else:
        it = cfg.max_iter

    t_u = fiber_maximize(u, model).t
    report = _finish('nehari', u, model, G, cfg, trace, it, verdict, t_u)
    if cfg.verbose:
        print(f"  {report.verdict} after {report.iterations} iterations: "
              f"phi={report.phi:.10f}, rho={report.rho:.3e}")
    return report


# ---------------------------------------------------------------------------
# Mountain pass
# ---------------------------------------------------------------------------

def find_endpoint(omega: GridField, model: Model, n: int = 400) -> GridField:
    """e = t* omega with Phi(e) < 0, t* the first such t on a log-spaced ray."""
    fiber = FiberMap(omega, model)
    for t in np.geomspace(1e-2, 1e3, n) / fiber.scale:
        value = fiber.value(float(t))
        if value < 0 and np.isfinite(value):
            return omega * float(t)
    raise ValueError("No point with Phi < 0 found along the ray")


def moser_level_bound(model: Model, n_list, q: float = 2.0) -> Optional[float]:
    """max_t Phi(t omega_n) for the first n in n_list below 2 pi/alpha0, else None."""
    if not model.is_critical:
        return None
    for n in n_list:
        try:
            value = max_on_moser_ray(n, q, model)
        except ValueError:
            continue
        if value < model.threshold:
            return value
    return None


def _reparametrize(path: List[GridField], model: Model) -> List[GridField]:
    """Redistribute the nodes at equal arc length in the H norm (end points fixed)."""
    seg = np.array([norm_H(b - a, model.potential) for a, b in zip(path[:-1], path[1:])])
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0:
        return path
    targets = np.linspace(0.0, arc[-1], len(path))
    new = [path[0]]
    for s in targets[1:-1]:
        j = min(int(np.searchsorted(arc, s, side='right')) - 1, len(seg) - 1)
        w = (s - arc[j]) / seg[j] if seg[j] > 0 else 0.0
        new.append(path[j] * (1.0 - w) + path[j + 1] * w)
    new.append(path[-1])
    return new


def mountain_pass(cfg: SolveConfig, model: Model, G: Optional[SymmetryGroup],
                  u0: Optional[GridField] = None) -> SolveReport:
    """
    Numerical mountain pass between 0 and an endpoint e with Phi(e) < 0.

    Each sweep maximises Phi on the polyline around the highest interior node,
    then moves that node down the H-gradient with the path tangent removed.

    Returns:
    --------
    SolveReport
        level_upper is max_t Phi(t omega_n0) for critical families when some
        Moser ray stays below the threshold, otherwise the maximum of Phi on the
        initial straight path; kappa0 is the calibrated small-ball level
    """
    if cfg.verbose:
        print("Running mountain pass...")
    precond = SobolevPreconditioner(model)
    omega = initial_field(cfg, model, G) if u0 is None else _project(u0, G)
    e = _project(find_endpoint(omega, model), G)
    if phi(e, model) >= 0:
        raise ValueError("Path endpoint does not satisfy Phi(e) < 0")

    kappa0 = calibrate_small_ball(model, [omega]).kappa0
    m = cfg.path_nodes
    path = [e * (j / m) for j in range(m + 1)]
    energies = np.array([phi(w, model) for w in path])
    level_upper, level_source = float(energies.max()), 'path'
    bound = moser_level_bound(model, cfg.moser_n_list, cfg.moser_q)
    if bound is not None:
        level_upper, level_source = bound, 'moser'

    def refine(j: int):
        """Highest point of Phi on the polyline path[j-1] -> path[j] -> path[j+1]."""
        a, b, c = path[j - 1], path[j], path[j + 1]

        def point(s):
            return b + (c - b) * s if s >= 0 else b + (a - b) * (-s)

        res = optimize.minimize_scalar(lambda s: -phi(point(s), model), bounds=(-1.0, 1.0),
                                       method='bounded', options={'xatol': 1e-12})
        if -res.fun > energies[j]:
            path[j] = _project(point(float(res.x)), G)
            energies[j] = phi(path[j], model)

    trace: List[CeramiDiagnostic] = []
    verdict = 'max_iter'
    sweep = 0
    for sweep in range(cfg.max_iter):
        if sweep > 0 and sweep % cfg.reparam_every == 0:
            path = _reparametrize(path, model)
            energies = np.array([phi(w, model) for w in path])

        j = 1 + int(np.argmax(energies[1:-1]))
        refine(j)
        u = path[j]
        phi_u = float(energies[j])
        g = gradient(u, model)
        rho = residual_proxy(u, model, g)
        trace.append(CeramiDiagnostic(sweep, phi_u, rho, _defect(u, G)))
        if cfg.verbose and sweep % 20 == 0:
            print(f"  sweep {sweep}: node {j}, phi={phi_u:.10f}, rho={rho:.3e}")
        if _converged(rho, phi_u, cfg.tol):
            verdict = 'converged'
            break

        tangent = path[j + 1] - path[j - 1]
        tangent = tangent * (1.0 / norm_H(tangent, model.potential))
        d = _project(precond.apply(g), G)
        d = d - tangent * inner_H(d, tangent, model.potential)
        slope = inner_H(d, d, model.potential)

        def candidate(w: GridField):
            w = _project(w, G)
            return w, phi(w, model)

        path[j], energies[j] = _backtrack(u, phi_u, d, slope, cfg, candidate)
        if energies[1:-1].max() < kappa0 / 2.0:
            raise DivergenceError(
                f"Path collapsed: max node energy {energies[1:-1].max():.3e} < kappa0/2 = {kappa0 / 2:.3e}"
            )
    else:
        sweep = cfg.max_iter

    j = 1 + int(np.argmax(energies[1:-1]))
    u = path[j]
    try:
        t_u = fiber_maximize(u, model).t
    except ValueError:
        t_u = float('nan')
    report = _finish('mountain_pass', u, model, G, cfg, trace, sweep, verdict, t_u,
                     level_upper=level_upper, level_source=level_source, kappa0=kappa0)
    if cfg.verbose:
        print(f"  {report.verdict} after {report.iterations} sweeps: "
              f"phi={report.phi:.10f}, rho={report.rho:.3e}")
    return report


def solve(cfg: SolveConfig, model: Model, G: Optional[SymmetryGroup],
          u0: Optional[GridField] = None) -> SolveReport:
    if G is not None and not G.exact:
        warnings.warn(
            f"{G.kind} group of order {G.order} acts by interpolation; "
            "the reported symmetry defect is O(h^2), not rounding"
        )
    if cfg.method == 'nehari':
        return nehari_minimize(cfg, model, G, u0)
    return mountain_pass(cfg, model, G, u0)


# ---------------------------------------------------------------------------
# Solution certificate
# ---------------------------------------------------------------------------

def certify_solution(report: SolveReport, model: Model, G: Optional[SymmetryGroup],
                     tol: float = 1e-6, n_dirs: int = 10, seed: int = 0) -> dict:
    """
    Four-part certificate of a converged report:
    (a) rho <= tol (1 + |Phi|); (b) |<Phi'(u), v>| <= 1e-5 ||v|| on random invariant v;
    (c) Phi > 0; (d) for critical growth Phi < 2 pi / alpha0 and ||u||^2 < 4 pi / alpha0,
    plus Phi <= max_t Phi(t omega_n0) + tol when the report carries a Moser bound.
    """
    u = report.solution
    g = gradient(u, model)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        v = _project(random_field(model, rng), G)
        nv = norm_H(v, model.potential)
        if nv == 0:
            continue
        worst = max(worst, abs(integrate(GridField(u.grid, g.values * v.values))) / nv)

    checks = {
        'residual': bool(_converged(report.rho, report.phi, tol)),
        'weak_derivative': bool(worst <= 1e-5),
        'positive_level': bool(report.phi > 0),
        'max_directional_derivative': worst,
    }
    if model.is_critical:
        norm_sq = inner_H(u, u, model.potential)
        checks['below_threshold'] = bool(report.phi < model.threshold)
        checks['norm_below_threshold'] = bool(norm_sq < 2.0 * model.threshold)
        if report.level_source == 'moser':
            checks['moser_bound'] = bool(report.phi <= report.level_upper + tol)
    checks['certified'] = all(v for v in checks.values() if isinstance(v, bool))
    return checks


def nehari_gap(u: GridField, model: Model) -> float:
    """|<Phi'(u), u>| / ||u||^2."""
    return abs(nehari_value(u, model)) / inner_H(u, u, model.potential)
