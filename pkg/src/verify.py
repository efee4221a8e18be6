"""
Property suite behind `logsp verify`.

Each check returns a CheckResult with a verdict in
{'pass', 'fail', 'approximate', 'inconclusive'}; the suite passes when no
check fails.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import RunConfig, build_group, build_model
from .functional import Model, fiber_gap, g_poly, gradient, make_model, phi, pointwise_gap
from .grid import GridField, integrate, make_grid
from .logkernel import (bilinear_A, coercivity_constant, coercivity_ratio, convolve,
                        functional_I, g_alpha_kernel, g_alpha_sweep, get_kernel_set, hls_ratio)
from .nonlinearity import check_condition, check_potential, make_nonlinearity
from .solver import fiber_sign_changes
from .symmetry import SymmetryGroup, apply, group_average, symmetry_defect


VERDICTS = ('pass', 'fail', 'approximate', 'inconclusive')
IDENTITY_TOL = 1e-10
FAST_DIRECT_TOL = 1e-10
I0_TOL = 1e-9
COERCIVITY_TOL = 1e-6
FD_EPS = 1e-5
FD_TOL = 1e-5
FIBER_TOL = 1e-9
SYMMETRY_TOL = 1e-10
EQUIVARIANCE_TOL = 1e-9
APPROXIMATE_NOTE = 'approximate (interpolated group)'


@dataclass
class CheckResult:
    id: str
    verdict: str
    values: Dict[str, object] = field(default_factory=dict)
    note: str = ''

    def to_dict(self) -> dict:
        return {'id': self.id, 'verdict': self.verdict, 'values': dict(self.values), 'note': self.note}


def _verdict(ok: bool) -> str:
    return 'pass' if ok else 'fail'


# ---------------------------------------------------------------------------
# Test fields
# ---------------------------------------------------------------------------

def compact_field(grid, rng: np.random.Generator, n_bumps: int = 3,
                  radius: float = 0.5) -> GridField:
    """Sum of (1 - |x - c|^2 / rho^2)^3_+ bumps with |c| + rho <= radius."""
    x, y = grid.mesh
    values = np.zeros_like(x)
    for _ in range(n_bumps):
        rho = rng.uniform(0.2, 0.5) * radius
        r_c = (radius - rho) * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        d2 = (x - r_c * math.cos(theta)) ** 2 + (y - r_c * math.sin(theta)) ** 2
        values += rng.uniform(0.5, 1.5) * np.clip(1.0 - d2 / rho ** 2, 0.0, None) ** 3
    return GridField(grid, values)


def smooth_field(grid, rng: np.random.Generator, n_bumps: int = 4,
                 amplitude: float = 0.5) -> GridField:
    """Gaussians with centres in [-L/4, L/4]^2 and signed amplitudes."""
    x, y = grid.mesh
    values = np.zeros_like(x)
    spread = grid.L / 4.0
    for _ in range(n_bumps):
        cx, cy = rng.uniform(-spread, spread, size=2)
        width = rng.uniform(0.3, 0.8)
        values += amplitude * rng.uniform(-1.0, 1.0) * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
    return GridField(grid, values)


# ---------------------------------------------------------------------------
# Kernel checks
# ---------------------------------------------------------------------------

def check_kernel_identity(model: Model, rng, samples: int, **_) -> CheckResult:
    """A_0 = A_1 - A_2 and I_1 = I_0 + I_2."""
    kernels, p = model.kernels, model.p
    worst, witness = 0.0, {}
    for _ in range(samples):
        u = compact_field(model.grid, rng, radius=1.0)
        v = smooth_field(model.grid, rng)
        w1, w2 = np.abs(u.values) ** p, np.abs(v.values) ** p
        A = [bilinear_A(kernels.plan(i), w1, w2) for i in range(3)]
        I = [functional_I(kernels, u, p, i) for i in range(3)]
        gap_A = abs(A[0] - (A[1] - A[2])) / (abs(A[1]) + abs(A[2]))
        gap_I = abs(I[1] - (I[0] + I[2])) / (abs(I[1]) + abs(I[2]))
        if max(gap_A, gap_I) >= worst:
            worst = max(gap_A, gap_I)
            witness = {'I0': I[0], 'I1': I[1], 'I2': I[2], 'A_gap': gap_A, 'I_gap': gap_I}
    values = {'max_relative_gap': worst}
    if worst > IDENTITY_TOL:
        values['witness'] = witness
        return CheckResult('kernel_identity', 'fail', values, 'I1 = I0 + I2 violated')
    return CheckResult('kernel_identity', 'pass', values)


def check_fast_vs_direct(model: Model, rng, flip_a2: bool = False, **_) -> CheckResult:
    grid = make_grid(model.grid.L, 64)
    kernels = get_kernel_set(grid, flip_a2)
    w = np.abs(smooth_field(grid, rng).values) ** model.p
    worst = {}
    for which in range(3):
        plan = kernels.plan(which)
        direct = convolve(plan, w, 'direct')
        fast = convolve(plan, w, 'fast')
        worst[plan.kernel] = float(np.max(np.abs(fast - direct)) / np.max(np.abs(direct)))
    ok = max(worst.values()) <= FAST_DIRECT_TOL
    return CheckResult('fast_vs_direct', _verdict(ok), {'N': 64, 'max_relative_error': worst})


def check_i0_sign(model: Model, rng, samples: int, **_) -> CheckResult:
    """I_0 <= 0 on fields supported in the disk of diameter 1."""
    kernels = model.kernels
    worst = -np.inf
    for p in (2.0, 3.0):
        for _ in range(samples):
            u = compact_field(model.grid, rng)
            I = [functional_I(kernels, u, p, i) for i in range(3)]
            worst = max(worst, I[0] / (I[1] + abs(I[2])))
    wide = functional_I(kernels, compact_field(model.grid, rng, radius=model.grid.L / 4.0), model.p, 0)
    values = {'max_I0_over_scale': worst, 'wide_support_I0': wide}
    return CheckResult('i0_sign', _verdict(worst <= I0_TOL), values,
                       'sign certified on supports of diameter <= 1; wide support reported only')


def check_hls_ratio(model: Model, rng, **_) -> CheckResult:
    grid, kernels = model.grid, model.kernels
    x, y = grid.mesh
    r2 = x ** 2 + y ** 2
    ratios = {}
    for width in (0.25, 0.5, 1.0):
        ratios[f'gaussian_{width}'] = hls_ratio(kernels, GridField(grid, np.exp(-r2 / width ** 2)), 2.0)
    single = GridField(grid, np.exp(-((x - 1.0) ** 2 + y ** 2) / 0.1))
    pair = GridField(grid, single.values + np.exp(-((x + 1.0) ** 2 + y ** 2) / 0.1))
    ratios['single_bump'] = hls_ratio(kernels, single, 2.0)
    ratios['two_bumps'] = hls_ratio(kernels, pair, 2.0)
    u = smooth_field(grid, rng)
    scaled = abs(hls_ratio(kernels, u * 3.0, model.p) / hls_ratio(kernels, u, model.p) - 1.0)
    values = {'max_ratio': max(ratios.values()), 'ratios': ratios, 'scaling_error': scaled}
    ok = all(np.isfinite(r) and r > 0 for r in ratios.values()) and scaled <= 1e-10
    return CheckResult('hls_ratio', _verdict(ok), values)


def check_coercivity(model: Model, rng, samples: int, G: SymmetryGroup, require_exact: bool,
                     **_) -> CheckResult:
    constant = coercivity_constant(G.kind, G.k)
    exact = G.exact
    ratios, defects = [], []
    for _ in range(samples):
        u = group_average(G, smooth_field(model.grid, rng))
        v = group_average(G, smooth_field(model.grid, rng))
        defects.append(max(symmetry_defect(G, u), symmetry_defect(G, v)))
        ratios.append(coercivity_ratio(model.kernels, u, v, model.p, G.k,
                                       group=G if exact else None))
    values = {'min_ratio': min(ratios), 'constant': constant, 'max_defect': max(defects)}
    if constant is None or not exact:
        note = APPROXIMATE_NOTE if not exact else 'no quadrant bound for this group'
        return CheckResult('coercivity', 'approximate', values, note)
    return CheckResult('coercivity', _verdict(min(ratios) >= constant - COERCIVITY_TOL), values)


def check_g_alpha(model: Model, rng, **_) -> CheckResult:
    alphas = [1e-1, 1e-2, 1e-3]
    worst = 0.0
    for r in (0.5, 2.0, math.e):
        for alpha in alphas:
            bound = alpha * math.log(r) ** 2 / 2.0 * 1.1
            worst = max(worst, abs(g_alpha_kernel(r, alpha) + math.log(r)) / bound)
    sweep = g_alpha_sweep(compact_field(model.grid, rng), model.p, alphas)
    errors = sweep['error'].to_numpy()
    decreasing = bool(np.all(np.diff(errors) < 0))
    values = {'max_error_over_bound': worst, 'functional_errors': [float(e) for e in errors]}
    return CheckResult('g_alpha', _verdict(worst <= 1.0 and decreasing), values)


# ---------------------------------------------------------------------------
# Functional checks
# ---------------------------------------------------------------------------

def _fd_models(model: Model):
    """Both built-in families at p = 2 and p = 3 on the verification grid."""
    V = model.potential
    families = [make_nonlinearity('critical_exp', lam=1.0, alpha0=4.0 * math.pi),
                make_nonlinearity('subcritical_power', b=1.0, q_pow=4.0)]
    for nl in families:
        for p in (2.0, 3.0):
            yield f'{nl.family}_p{p:g}', make_model(model.grid, V, nl, p)


def check_gradient_fd(model: Model, rng, samples: int, **_) -> CheckResult:
    n_dirs = min(samples, 10)
    worst = {}
    for name, m in _fd_models(model):
        u = smooth_field(m.grid, rng, amplitude=0.25)
        g = gradient(u, m)
        scale = 1.0 + abs(phi(u, m))
        err = 0.0
        for _ in range(n_dirs):
            v = smooth_field(m.grid, rng, amplitude=1.0)
            fd = (phi(u + v * FD_EPS, m) - phi(u - v * FD_EPS, m)) / (2.0 * FD_EPS)
            exact = integrate(GridField(u.grid, g.values * v.values))
            err = max(err, abs(fd - exact) / scale)
        worst[name] = err
    return CheckResult('gradient_fd', _verdict(max(worst.values()) <= FD_TOL),
                       {'eps': FD_EPS, 'max_error': worst})


def _mono_mu(model: Model) -> float:
    return 1.0 if model.p == 2 else 0.5


def _mono_report(model: Model):
    return check_condition(model.nonlinearity, model.potential, 'F4prime_mono', model.grid,
                           model.p, mu=_mono_mu(model))


def check_fiber_gap(model: Model, rng, samples: int, **_) -> CheckResult:
    report = _mono_report(model)
    ts = [0.0, 0.5, 0.9, 1.1, 2.0]
    fields = [compact_field(model.grid, rng, radius=1.0) * 0.5 for _ in range(min(samples, 3))]
    gaps = [fiber_gap(u, t, model) for u in fields for t in ts]
    at_one = max(abs(fiber_gap(u, 1.0, model)) for u in fields)
    changes = [fiber_sign_changes(u, model, n=2000) for u in fields[:2]]
    t_grid = np.linspace(0.0, 3.0, 3001)
    g_min_at = float(t_grid[int(np.argmin(g_poly(t_grid, model.p)))])
    values = {'min_gap': min(gaps), 'gap_at_1': at_one, 'sign_changes': changes,
              'g_argmin': g_min_at, 'F4prime_mono': report.verdict}
    if report.verdict == 'fail':
        return CheckResult('fiber_gap', 'inconclusive', values,
                           'nonlinearity outside the monotone regime')
    scale = max(1.0, max(abs(phi(u, model)) for u in fields))
    ok = (min(gaps) >= -FIBER_TOL * scale and at_one <= 1e-12 * scale
          and all(c == 1 for c in changes) and abs(g_min_at - 1.0) < 1e-12)
    return CheckResult('fiber_gap', _verdict(ok), values)


def check_pointwise_gap(model: Model, rng, **_) -> CheckResult:
    nl = model.nonlinearity
    mu = _mono_mu(model)
    t_max = min(5.0, nl.default_t_max())
    t = np.linspace(-t_max, t_max, 2001)
    V_min = float(model.V.min())
    with np.errstate(over='ignore', invalid='ignore'):
        gap = pointwise_gap(nl, V_min, t, model.p, mu)
        scale = np.abs(nl.f(t) * t) / (2.0 * model.p) + np.abs(nl.F(t)) + V_min * t ** 2
    rel = gap / np.maximum(scale, np.finfo(float).tiny)
    i = int(np.argmin(rel))
    values = {'min_relative_gap': float(rel[i]), 't': float(t[i]), 'mu': mu, 'V_min': V_min}
    report = _mono_report(model)
    values['F4prime_mono'] = report.verdict
    if report.verdict == 'fail':
        return CheckResult('pointwise_gap', 'inconclusive', values,
                           'nonlinearity outside the monotone regime')
    return CheckResult('pointwise_gap', _verdict(rel[i] >= -FIBER_TOL), values)


# ---------------------------------------------------------------------------
# Symmetry checks
# ---------------------------------------------------------------------------

def _symmetry_verdict(G: SymmetryGroup, ok: bool, require_exact: bool):
    if G.exact:
        return _verdict(ok), ''
    if require_exact or ok:
        return 'approximate', APPROXIMATE_NOTE
    return 'fail', 'exact elements violated'


def check_symmetry_energy(model: Model, rng, G: SymmetryGroup, require_exact: bool,
                          **_) -> CheckResult:
    u = smooth_field(model.grid, rng)
    base = phi(u, model)
    worst = max(abs(phi(apply(g, u), model) - base) for g in G.exact_elements()) / (1.0 + abs(base))
    values = {'max_relative_change': worst, 'exact_elements': len(G.exact_elements()),
              'order': G.order}
    verdict, note = _symmetry_verdict(G, worst <= SYMMETRY_TOL, require_exact)
    return CheckResult('symmetry_energy', verdict, values, note)


def check_gradient_equivariance(model: Model, rng, G: SymmetryGroup, require_exact: bool,
                                **_) -> CheckResult:
    u = smooth_field(model.grid, rng)
    g_u = gradient(u, model)
    scale = float(np.max(np.abs(g_u.values)))
    worst = 0.0
    for g in G.exact_elements():
        lhs = gradient(apply(g, u), model).values
        rhs = apply(g, g_u).values
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    verdict, note = _symmetry_verdict(G, worst <= EQUIVARIANCE_TOL, require_exact)
    return CheckResult('gradient_equivariance', verdict, {'max_relative_error': worst}, note)


def check_potential_v0(model: Model, rng, G: SymmetryGroup, **_) -> CheckResult:
    report = check_potential(model.potential, model.grid, G)
    return CheckResult('potential_V0', report.verdict, report.ratios, report.note)


def _family_conditions(model: Model):
    nl = model.nonlinearity
    if nl.family == 'critical_exp':
        return [('F1_growth', {}), ('F2', {}), ('F3', {}), ('F4', {'mu1': 4.0, 'mu2': 0.0}), ('F5', {})]
    if nl.family == 'subcritical_power':
        return [('F1prime', {}), ('F4prime_AR', {'mu': nl.q_pow}), ('F5', {})]
    return [('F1prime', {}), ('F4prime_AR', {'mu': 4.0}), ('F5', {})]


def check_conditions(model: Model, rng, **_) -> CheckResult:
    reports = {}
    for cond, params in _family_conditions(model):
        reports[cond] = check_condition(model.nonlinearity, model.potential, cond, model.grid,
                                        model.p, **params).to_dict()
    verdicts = [r['verdict'] for r in reports.values()]
    if 'fail' in verdicts:
        verdict = 'fail'
    elif 'inconclusive' in verdicts:
        verdict = 'inconclusive'
    else:
        verdict = 'pass'
    return CheckResult('conditions', verdict, {'family': model.nonlinearity.family, 'reports': reports})


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    'kernel_identity': check_kernel_identity,
    'fast_vs_direct': check_fast_vs_direct,
    'i0_sign': check_i0_sign,
    'hls_ratio': check_hls_ratio,
    'coercivity': check_coercivity,
    'gradient_fd': check_gradient_fd,
    'fiber_gap': check_fiber_gap,
    'pointwise_gap': check_pointwise_gap,
    'g_alpha': check_g_alpha,
    'symmetry_energy': check_symmetry_energy,
    'gradient_equivariance': check_gradient_equivariance,
    'potential_V0': check_potential_v0,
    'conditions': check_conditions,
}


def run_suite(cfg: RunConfig, flip_a2: bool = False, only: Optional[List[str]] = None,
              verbose: bool = True) -> List[CheckResult]:
    """
    Run the property checks on the verification grid.

    Parameters:
    -----------
    cfg : RunConfig
        Validated configuration; the [verify] table sets L, N and sample counts
    flip_a2 : bool
        Negate the ln(1 + 1/r) kernel (failure-path hook)
    only : list of str, optional
        Subset of check ids
    verbose : bool
        Print one progress line per check

    Returns:
    --------
    List[CheckResult]
    """
    names = list(CHECKS) if only is None else only
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"Unknown check ids: {unknown}")
    model = build_model(cfg, L=float(cfg.verify['L']), N=cfg.verify['N'], flip_a2=flip_a2)
    G = build_group(cfg)
    context = {'samples': cfg.verify['samples'], 'G': G, 'flip_a2': flip_a2,
               'require_exact': cfg.symmetry['require_exact']}

    if verbose:
        print(f"\nRunning verification suite ({len(names)} checks, N={model.grid.N}, L={model.grid.L:g})...")
    results = []
    for name in names:
        # one generator per check so a subset reproduces the full run
        rng = np.random.default_rng([cfg.seed, list(CHECKS).index(name)])
        try:
            result = CHECKS[name](model, rng, **context)
        except (ValueError, FloatingPointError) as e:
            result = CheckResult(name, 'fail', {'error': str(e)}, 'check raised')
        results.append(result)
        if verbose:
            suffix = f" ({result.note})" if result.note else ''
            print(f"  {name}: {result.verdict}{suffix}")
    return results


def suite_passed(results: List[CheckResult]) -> bool:
    return all(r.verdict != 'fail' for r in results)
