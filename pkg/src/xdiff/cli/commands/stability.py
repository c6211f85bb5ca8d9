"""
xdiff check-stability: print the three stability reports for a params file
"""
import argparse
from pathlib import Path

from ...numerics.field import Grid
from ...numerics.stability import (
    DEFAULT_EPS,
    DEFAULT_ZETA,
    check_explicit_gershgorin,
    check_lambda_bound,
    check_semi_implicit,
)
from ..params import ParamsFile


def add_parser(subparsers):
    parser = subparsers.add_parser("check-stability", help="check learned parameters against the stability conditions")
    parser.add_argument("--params", type=Path, required=True, help="params JSON")
    parser.add_argument("--dt", type=float, default=0.05, help="time step for the explicit and lambda checks")
    parser.add_argument("--steps", type=int, default=10, help="number of steps M (reports T = M dt)")
    parser.add_argument("--h", type=float, default=1.0, help="grid spacing (both axes)")
    parser.add_argument("--eps", type=float, default=DEFAULT_EPS, help="epsilon of the explicit and lambda bounds")
    parser.add_argument("--zeta", type=float, default=DEFAULT_ZETA, help="zeta of the lambda bound")
    parser.set_defaults(handler=execute)
    return parser


def stability_lines(params: ParamsFile, dt: float, steps: int, h: float, eps: float, zeta: float):
    """key=value report lines and whether the semi-implicit condition holds"""
    iset = params.influence()
    grid = Grid(2, 2, h, h)
    semi = check_semi_implicit(iset)
    explicit = check_explicit_gershgorin(iset, dt, grid, eps)
    lam = check_lambda_bound(params.lam, dt, eps, zeta)
    lines = [f"dt={dt!r}", f"steps={steps}", f"stopping_time={dt * steps!r}", f"h={h!r}"]
    lines += semi.to_lines() + explicit.to_lines() + lam.to_lines()
    return lines, semi.satisfied


def execute(args: argparse.Namespace) -> int:
    params = ParamsFile.read(args.params)
    lines, ok = stability_lines(params, args.dt, args.steps, args.h, args.eps, args.zeta)
    print("\n".join(lines))
    return 0 if ok else 3
