"""
Run configuration: TOML loading, defaults, validation and model assembly.
"""

import copy
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .functional import Model, make_model
from .grid import make_grid, make_potential, POTENTIAL_KINDS
from .nonlinearity import FAMILIES, make_nonlinearity
from .solver import INITIAL_FIELDS, METHODS, SolveConfig
from .symmetry import GROUP_KINDS, SymmetryGroup, make_group


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


DEFAULT_CONFIG: Dict[str, Any] = {
    'seed': 0,
    'domain': {'L': 8.0},
    'grid': {'N': 128},
    'model': {'p': 2.0, 'alpha0': 4.0 * math.pi},
    'symmetry': {'kind': 'rotation', 'k': 4, 'require_exact': False},
    'potential': {'kind': 'constant', 'value': 1.0, 'amplitude': 0.0, 'width': 1.0},
    'nonlinearity': {'family': 'critical_exp', 'lambda': 1.0, 'alpha0': None, 'b': 1.0,
                     'q_pow': 4.0, 'a': 1.0, 'clamp': False},
    'solver': {'method': 'nehari', 'max_iter': 500, 'tol': 1e-6, 'step0': 1.0,
               'armijo': 1e-4, 'max_backtracks': 20, 'path_nodes': 40,
               'reparam_every': 50, 'initial': 'ring', 'initial_file': ''},
    'moser': {'n_list': [1e4, 1e6, 1e8, 1e10], 'q': 2.0, 'margin': 1e-3},
    'verify': {'L': 4.0, 'N': 64, 'samples': 20},
}


@dataclass
class RunConfig:
    """Validated configuration; sections mirror the TOML tables."""

    seed: int
    L: float
    N: int
    p: float
    alpha0: float
    symmetry: Dict[str, Any]
    potential: Dict[str, Any]
    nonlinearity: Dict[str, Any]
    solver: Dict[str, Any]
    moser: Dict[str, Any]
    verify: Dict[str, Any]
    source: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            'seed': self.seed,
            'domain': {'L': self.L},
            'grid': {'N': self.N},
            'model': {'p': self.p, 'alpha0': self.alpha0},
            'symmetry': dict(self.symmetry),
            'potential': dict(self.potential),
            'nonlinearity': dict(self.nonlinearity),
            'solver': dict(self.solver),
            'moser': dict(self.moser),
            'verify': dict(self.verify),
        }


def _merge(defaults: dict, overrides: dict, path: str = '') -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"Unknown config key: {where}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Config key {where} must be a table")
            merged[key] = _merge(defaults[key], value, where + '.')
        else:
            merged[key] = value
    return merged


def config_from_dict(data: dict, source: Optional[str] = None) -> RunConfig:
    """Merge data over DEFAULT_CONFIG and validate."""
    merged = _merge(DEFAULT_CONFIG, data)
    nonlinearity = dict(merged['nonlinearity'])
    if nonlinearity['alpha0'] is None:
        nonlinearity['alpha0'] = merged['model']['alpha0']
    cfg = RunConfig(
        seed=merged['seed'],
        L=merged['domain']['L'],
        N=merged['grid']['N'],
        p=merged['model']['p'],
        alpha0=merged['model']['alpha0'],
        symmetry=merged['symmetry'],
        potential=merged['potential'],
        nonlinearity=nonlinearity,
        solver=merged['solver'],
        moser=merged['moser'],
        verify=merged['verify'],
        source=source,
    )
    validate_config(cfg)
    return cfg


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """
    Load a TOML run configuration.

    Parameters:
    -----------
    path : str, optional
        TOML file; defaults only when omitted
    overrides : dict, optional
        Nested values applied after the file (CLI flags)

    Returns:
    --------
    RunConfig
    """
    data: dict = {}
    if path:
        try:
            with open(path, 'rb') as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Cannot parse {path}: {e}")
    if overrides:
        for section, values in overrides.items():
            if isinstance(values, dict):
                data.setdefault(section, {})
                if not isinstance(data[section], dict):
                    raise ConfigError(f"Config key {section} must be a table")
                data[section].update(values)
            else:
                data[section] = values
    return config_from_dict(data, source=path)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _number(value, name: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{name} must be a number, got {value!r}")
    return float(value)


def validate_config(cfg: RunConfig) -> None:
    """Check every precondition before any computation starts."""
    _require(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool), "seed must be an integer")
    _require(_number(cfg.L, 'domain.L') > 0, "domain.L must be positive")
    _require(isinstance(cfg.N, int) and cfg.N >= 8 and cfg.N % 2 == 0,
             f"grid.N must be an even integer >= 8, got {cfg.N}")
    _require(_number(cfg.p, 'model.p') >= 2, "model.p must be >= 2")
    _require(_number(cfg.alpha0, 'model.alpha0') > 0, "model.alpha0 must be positive")

    sym = cfg.symmetry
    _require(sym['kind'] in GROUP_KINDS, f"symmetry.kind must be one of {GROUP_KINDS}")
    _require(isinstance(sym['k'], int) and sym['k'] >= 2, "symmetry.k must be an integer >= 2")

    pot = cfg.potential
    _require(pot['kind'] in POTENTIAL_KINDS, f"potential.kind must be one of {POTENTIAL_KINDS}")
    _require(_number(pot['value'], 'potential.value') > 0, "potential.value must be positive")
    _number(pot['amplitude'], 'potential.amplitude')
    _require(_number(pot['width'], 'potential.width') > 0, "potential.width must be positive")

    nl = cfg.nonlinearity
    _require(nl['family'] in FAMILIES and nl['family'] != 'custom',
             "nonlinearity.family must be critical_exp, subcritical_power or subcritical_exp")
    for key in ('lambda', 'alpha0', 'b', 'a'):
        _require(_number(nl[key], f'nonlinearity.{key}') > 0, f"nonlinearity.{key} must be positive")
    _require(_number(nl['q_pow'], 'nonlinearity.q_pow') > 2, "nonlinearity.q_pow must exceed 2")
    _require(isinstance(nl['clamp'], bool), "nonlinearity.clamp must be true or false")

    sol = cfg.solver
    _require(sol['method'] in METHODS, f"solver.method must be one of {METHODS}")
    _require(sol['initial'] in INITIAL_FIELDS, f"solver.initial must be one of {INITIAL_FIELDS}")
    _require(sol['initial'] != 'file' or bool(sol['initial_file']),
             "solver.initial = 'file' needs solver.initial_file")
    for key in ('tol', 'step0', 'armijo'):
        _require(_number(sol[key], f'solver.{key}') > 0, f"solver.{key} must be positive")
    for key in ('max_iter', 'max_backtracks', 'reparam_every'):
        _require(isinstance(sol[key], int) and sol[key] >= 1, f"solver.{key} must be an integer >= 1")
    _require(isinstance(sol['path_nodes'], int) and sol['path_nodes'] >= 3,
             "solver.path_nodes must be an integer >= 3")

    mos = cfg.moser
    _require(isinstance(mos['n_list'], list) and len(mos['n_list']) > 0, "moser.n_list must be a non-empty list")
    for n in mos['n_list']:
        _number(n, 'moser.n_list entry')
    _require(_number(mos['q'], 'moser.q') >= 2, "moser.q must be >= 2")
    _require(_number(mos['margin'], 'moser.margin') >= 0, "moser.margin must be >= 0")

    ver = cfg.verify
    _require(_number(ver['L'], 'verify.L') > 0, "verify.L must be positive")
    _require(isinstance(ver['N'], int) and ver['N'] >= 8 and ver['N'] % 2 == 0,
             "verify.N must be an even integer >= 8")
    _require(isinstance(ver['samples'], int) and ver['samples'] >= 1, "verify.samples must be >= 1")

    _require(isinstance(sym['require_exact'], bool), "symmetry.require_exact must be true or false")
    try:
        build_potential(cfg)
        build_nonlinearity(cfg)
        build_group(cfg)
    except ValueError as e:
        raise ConfigError(str(e))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def build_group(cfg: RunConfig) -> SymmetryGroup:
    return make_group(cfg.symmetry['kind'], cfg.symmetry['k'])


def build_potential(cfg: RunConfig):
    pot = cfg.potential
    return make_potential(pot['kind'], pot['value'], pot['amplitude'], pot['width'],
                          cfg.symmetry['k'])


def build_nonlinearity(cfg: RunConfig):
    nl = cfg.nonlinearity
    return make_nonlinearity(nl['family'], lam=nl['lambda'], alpha0=nl['alpha0'], b=nl['b'],
                             q_pow=nl['q_pow'], a=nl['a'], clamp=nl['clamp'])


def build_model(cfg: RunConfig, L: Optional[float] = None, N: Optional[int] = None,
                flip_a2: bool = False) -> Model:
    """Model on the configured grid (or on an explicit L, N)."""
    grid = make_grid(cfg.L if L is None else L, cfg.N if N is None else N)
    return make_model(grid, build_potential(cfg), build_nonlinearity(cfg), cfg.p,
                      build_group(cfg), flip_a2)


def build_solve_config(cfg: RunConfig, verbose: bool = False) -> SolveConfig:
    sol = cfg.solver
    return SolveConfig(
        method=sol['method'], max_iter=sol['max_iter'], tol=float(sol['tol']),
        step0=float(sol['step0']), armijo=float(sol['armijo']),
        max_backtracks=sol['max_backtracks'], path_nodes=sol['path_nodes'],
        reparam_every=sol['reparam_every'], initial=sol['initial'],
        initial_file=sol['initial_file'] or None, seed=cfg.seed,
        moser_n_list=tuple(float(n) for n in cfg.moser['n_list']), moser_q=float(cfg.moser['q']),
        verbose=verbose,
    )
