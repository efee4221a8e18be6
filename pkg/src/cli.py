"""
Command-line interface: logsp verify | solve | moser | kernel-bench.
"""

import argparse
import json
import math
import os
import re
import sys
import time
from typing import List, Optional

import numpy as np
import pandas as pd

from .config import ConfigError, RunConfig, build_group, build_model, build_solve_config, load_config
from .grid import make_grid, save_field
from .logkernel import DIRECT_MAX_N, convolve, get_kernel_set
from .moser import case_bounds, maximizer_trend, threshold_certificate
from .solver import DivergenceError, certify_solution, solve
from .verify import run_suite, suite_passed


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

FLOAT_FORMAT = '%.17g'
_FLOAT_MARK = '\x00float:'


def _jsonable(obj):
    """Plain Python types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _format_float(value: float) -> str:
    text = FLOAT_FORMAT % value
    return text if ('.' in text or 'e' in text) else text + '.0'


def _mark_floats(obj):
    if isinstance(obj, dict):
        return {k: _mark_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_mark_floats(v) for v in obj]
    if isinstance(obj, float):
        return _FLOAT_MARK + _format_float(obj)
    return obj


def write_json(payload: dict, path: str) -> None:
    """
    Write a report as JSON with sorted keys and floats at 17 significant
    digits, the same format as the CSV files, so identical runs give
    identical bytes.
    """
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    text = json.dumps(_mark_floats(_jsonable(payload)), indent=2, sort_keys=True, allow_nan=False)
    # json escapes the NUL of the mark as \u0000
    text = re.sub(r'"\\u0000float:([^"]*)"', r'\1', text)
    with open(path, 'w') as fh:
        fh.write(text + '\n')


def write_csv(df: pd.DataFrame, path: str) -> None:
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def run_verify(cfg: RunConfig, out_dir: str = 'results', flip_a2: bool = False) -> int:
    """Run the property suite; exit 0 iff no check fails."""
    results = run_suite(cfg, flip_a2=flip_a2)
    passed = suite_passed(results)
    write_json({'passed': passed, 'seed': cfg.seed, 'config': cfg.to_dict(),
                'checks': [r.to_dict() for r in results]},
               os.path.join(out_dir, 'verify.json'))

    print("\n" + "=" * 60)
    print("VERIFICATION SUMMARY")
    print("=" * 60)
    for verdict in ('pass', 'approximate', 'inconclusive', 'fail'):
        ids = [r.id for r in results if r.verdict == verdict]
        if ids:
            print(f"  {verdict}: {', '.join(ids)}")
    print(f"\nResults saved to {out_dir}/")
    return EXIT_OK if passed else EXIT_FAILED


def run_solve(cfg: RunConfig, out_dir: str = 'results', flip_a2: bool = False) -> int:
    """Find a G-invariant critical point and write report, field and trace."""
    model = build_model(cfg, flip_a2=flip_a2)
    G = build_group(cfg)
    solve_cfg = build_solve_config(cfg, verbose=True)
    report = solve(solve_cfg, model, G)
    certificate = certify_solution(report, model, G, tol=solve_cfg.tol, seed=cfg.seed)

    payload = report.to_dict()
    payload['certificate'] = certificate
    payload['config'] = cfg.to_dict()
    write_json(payload, os.path.join(out_dir, 'solve.json'))
    save_field(report.solution, os.path.join(out_dir, 'field.csv'))
    write_csv(report.trace_frame(), os.path.join(out_dir, 'trace.csv'))

    print("\n" + "=" * 60)
    print("SOLVE SUMMARY")
    print("=" * 60)
    print(f"\nMethod: {report.method} ({report.verdict}, {report.iterations} iterations)")
    print(f"Phi = {report.phi:.12f}")
    print(f"rho = {report.rho:.3e}, symmetry defect = {report.defect:.3e}")
    print(f"Certified: {certificate['certified']}")
    print(f"\nResults saved to {out_dir}/")
    return EXIT_OK if report.verdict == 'converged' and certificate['certified'] else EXIT_FAILED


def run_moser(cfg: RunConfig, out_dir: str = 'results', flip_a2: bool = False) -> int:
    """Threshold certificate along the Moser sequence plus the maximiser trend."""
    model = build_model(cfg, flip_a2=flip_a2)
    q = float(cfg.moser['q'])
    n_list = [float(n) for n in cfg.moser['n_list']]

    print(f"\nCertifying max_t Phi(t omega_n) < 2pi/alpha0 for n in {n_list}...")
    certificate = threshold_certificate(n_list, model, q, float(cfg.moser['margin']), verbose=True)

    usable = [n for n, err in zip(certificate.rows['n'], certificate.rows['error']) if not err]
    trend = maximizer_trend(usable, q, model) if usable else pd.DataFrame()
    bounds = {f'{n:.6g}': case_bounds(n, q, model) for n in usable}

    payload = certificate.to_dict()
    payload['maximizer_trend'] = trend.to_dict(orient='records')
    payload['case_bounds'] = bounds
    payload['config'] = cfg.to_dict()
    write_json(payload, os.path.join(out_dir, 'moser.json'))
    write_csv(certificate.rows, os.path.join(out_dir, 'moser.csv'))

    print("\n" + "=" * 60)
    print("MOSER SUMMARY")
    print("=" * 60)
    if certificate.n0 is not None:
        print(f"\nn0 = {certificate.n0:.3g}: max_t Phi = {certificate.max_phi:.6f} "
              f"< {certificate.threshold:.6f}")
    else:
        print("\nNo n in the list certifies the threshold")
    print(f"\nResults saved to {out_dir}/")
    return EXIT_OK if certificate.verdict == 'pass' else EXIT_FAILED


def run_kernel_bench(cfg: RunConfig, out_dir: str = 'results', flip_a2: bool = False) -> int:
    """Time direct and transform convolution on one grid and record their agreement."""
    N = min(cfg.N, DIRECT_MAX_N)
    grid = make_grid(cfg.L, N)
    kernels = get_kernel_set(grid, flip_a2)
    rng = np.random.default_rng(cfg.seed)
    x, y = grid.mesh
    centres = rng.uniform(-cfg.L / 4.0, cfg.L / 4.0, size=(4, 2))
    w = sum(np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / 0.5) for cx, cy in centres)

    print(f"\nBenchmarking kernel convolution at N={N}...")
    rows = []
    for which in range(3):
        plan = kernels.plan(which)
        start = time.perf_counter()
        direct = convolve(plan, w, 'direct')
        t_direct = time.perf_counter() - start
        start = time.perf_counter()
        fast = convolve(plan, w, 'fast')
        t_fast = time.perf_counter() - start
        agreement = float(np.max(np.abs(fast - direct)) / np.max(np.abs(direct)))
        rows.append({'kernel': plan.kernel, 'N': N, 'direct_seconds': t_direct,
                     'fast_seconds': t_fast, 'relative_difference': agreement})
        print(f"  {plan.kernel}: direct {t_direct:.3f}s, fast {t_fast:.5f}s, "
              f"relative difference {agreement:.2e}")

    write_json({'N': N, 'L': cfg.L, 'kernels': rows}, os.path.join(out_dir, 'kernel_bench.json'))
    print(f"\nResults saved to {out_dir}/")
    worst = max(r['relative_difference'] for r in rows)
    return EXIT_OK if worst <= 1e-10 else EXIT_FAILED


COMMANDS = {
    'verify': run_verify,
    'solve': run_solve,
    'moser': run_moser,
    'kernel-bench': run_kernel_bench,
}


def _float_list(text: str) -> List[float]:
    """'1e4,1e6' -> [10000.0, 1000000.0]."""
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='logsp',
        description='Planar Schrodinger-Poisson variational toolkit'
    )
    parser.add_argument(
        'command',
        choices=list(COMMANDS),
        help='Subcommand to run'
    )
    parser.add_argument(
        '--config',
        type=str,
        default=None,
        help='TOML run configuration (default: built-in defaults)'
    )
    parser.add_argument(
        '--out',
        type=str,
        default='results',
        help='Output directory for reports (default: results)'
    )
    parser.add_argument(
        '--seed',
        type=int,
        default=None,
        help='Override the configured seed'
    )
    parser.add_argument(
        '--N',
        type=int,
        default=None,
        help='Override grid.N'
    )
    parser.add_argument(
        '--L',
        type=float,
        default=None,
        help='Override domain.L'
    )
    parser.add_argument(
        '--n-list',
        type=_float_list,
        default=None,
        help='Override moser.n_list, comma-separated (e.g. 1e4,1e6,1e8)'
    )
    parser.add_argument(
        '--q',
        type=float,
        default=None,
        help='Override moser.q'
    )
    parser.add_argument(
        '--flip-a2',
        action='store_true',
        help=argparse.SUPPRESS
    )
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.N is not None:
        overrides['grid'] = {'N': args.N}
    if args.L is not None:
        overrides['domain'] = {'L': args.L}
    moser = {}
    if args.n_list is not None:
        moser['n_list'] = args.n_list
    if args.q is not None:
        moser['q'] = args.q
    if moser:
        overrides['moser'] = moser
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, args.out, flip_a2=args.flip_a2)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
