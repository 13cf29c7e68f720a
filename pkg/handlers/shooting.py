import argparse
import logging
from typing import Any, Dict, List, Optional

import numpy as np

import config
from database.models import FateTag, ShotSource, ShotSpec, enum_value
from handlers.router import Context, Router
from utils import shoot
from utils.artifacts import records
from utils.barriers import interface_threshold
from utils.errors import ConfigError

LOGGER = logging.getLogger(__name__)

router = Router("shooting")


def shot_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--source', choices=[s.value for s in ShotSource], default=None)
    parser.add_argument('--eps', type=float, default=None)
    parser.add_argument('--K', type=float, default=None)
    parser.add_argument('--C', type=float, default=None)
    parser.add_argument('--D', type=float, default=None)
    parser.add_argument('--xi-seed', dest='xi_seed', type=float, default=None)
    parser.add_argument('--v0', type=float, default=None)
    parser.add_argument('--lam', type=float, default=None)
    parser.add_argument('--max-eta', dest='max_eta', type=float, default=None)


def _grid(text: Optional[str]) -> Optional[List[float]]:
    """Either a comma list or start:stop:count."""
    if text is None:
        return None
    if ':' in text:
        start, stop, count = text.split(':')
        return list(np.linspace(float(start), float(stop), int(count)))
    return [float(v) for v in text.split(',') if v.strip()]


def spec_from(ctx: Context, default: ShotSource = ShotSource.FROM_P2) -> ShotSpec:
    source = enum_value(ShotSource, ctx.option('source', default.value), 'source')
    fields = {}
    for name in ('eps', 'K', 'C', 'D', 'xi_seed', 'v0', 'lam'):
        value = ctx.option(name)
        if value is not None:
            fields[name] = float(value)
    return ShotSpec(source=source, **fields)


def integration_options(ctx: Context) -> Dict[str, Any]:
    return {'rtol': ctx.rtol, 'atol': ctx.atol,
            'max_eta': float(ctx.option('max_eta', config.MAX_ETA))}


def sigma_grid(ctx: Context) -> List[float]:
    grid = ctx.option('sigma_grid')
    if isinstance(grid, str):
        grid = _grid(grid)
    if not grid:
        raise ConfigError("a sigma grid is required (--sigma-grid)")
    return [float(s) for s in grid]


@router.command('shoot', help="launch one orbit and classify its fate", arguments=shot_arguments)
def shoot_command(ctx: Context) -> Dict[str, Any]:
    params = ctx.params
    spec = spec_from(ctx)
    trajectory = shoot.launch(spec, params, **integration_options(ctx))
    fate = shoot.classify(trajectory, params)
    ctx.writer.write_csv('trajectory.csv', trajectory.to_frame())
    report = {
        'params': params.to_dict(),
        'spec': spec.to_dict(),
        'fate': fate.to_dict(),
        'events': [e.to_dict() for e in trajectory.events],
        'samples': len(trajectory),
    }
    ctx.writer.write_json('fate.json', report)
    ctx.require_decided(fate.tag is FateTag.UNDECIDED, "orbit fate")
    return report


def _sweep_arguments(parser: argparse.ArgumentParser) -> None:
    shot_arguments(parser)
    parser.add_argument('--sigma-grid', dest='sigma_grid', default=None,
                        help="comma list or start:stop:count")


@router.command('sweep-sigma', help="fate table over a sigma grid", arguments=_sweep_arguments)
def sweep_sigma(ctx: Context) -> Dict[str, Any]:
    run = ctx.run
    table = shoot.sweep_sigma(run.m, run.p, run.N, sigma_grid(ctx), spec_from(ctx),
                              workers=ctx.workers, **integration_options(ctx))
    ctx.writer.write_csv('sweep_sigma.csv', table)
    report = {
        'table': records(table),
        'flips': shoot.fate_flips(table),
        'thresholds': shoot.empirical_thresholds(table),
    }
    ctx.writer.write_json('sweep_sigma.json', report)
    return report


def _bracket_arguments(parser: argparse.ArgumentParser) -> None:
    shot_arguments(parser)
    parser.add_argument('--bracket', type=float, nargs=2, default=None)
    parser.add_argument('--tol', type=float, default=config.SIGMA_TOL)


@router.command('find-sigma-star', help="bisect the critical exponent", arguments=_bracket_arguments)
def find_sigma_star(ctx: Context) -> Dict[str, Any]:
    run = ctx.run
    bracket = ctx.option('bracket')
    if not bracket or len(bracket) != 2:
        raise ConfigError("find-sigma-star needs --bracket LO HI")
    search = shoot.find_sigma_star(run.m, run.p, run.N, tuple(float(b) for b in bracket),
                                   spec_from(ctx), tol=ctx.args.tol, **integration_options(ctx))
    report = search.to_dict()
    ctx.writer.write_json('sigma_star.json', report)
    return report


@router.command('lambda-map', help="parabola capture point against sigma (m+p=2)",
                arguments=_sweep_arguments)
def lambda_map(ctx: Context) -> Dict[str, Any]:
    run = ctx.run
    eps = float(ctx.option('eps', config.SEED_EPS))
    table = shoot.lambda_of_sigma(run.m, run.p, run.N, sigma_grid(ctx), eps=eps,
                                  workers=ctx.workers, **integration_options(ctx))
    ctx.writer.write_csv('lambda_map.csv', table)
    report = {'table': records(table), 'trend': shoot.lambda_trend(table)}
    ctx.writer.write_json('lambda_map.json', report)
    return report


def _v0_arguments(parser: argparse.ArgumentParser) -> None:
    shot_arguments(parser)
    parser.add_argument('--v0-grid', dest='v0_grid', default=None,
                        help="comma list or start:stop:count")


@router.command('interface-sweep', help="backward shots from P(v0) classified by alpha-limit",
                arguments=_v0_arguments)
def interface_sweep(ctx: Context) -> Dict[str, Any]:
    params = ctx.params
    grid = ctx.option('v0_grid')
    if isinstance(grid, str):
        grid = _grid(grid)
    if not grid:
        raise ConfigError("interface-sweep needs --v0-grid")
    eps = float(ctx.option('eps', config.SEED_EPS))
    table = shoot.interface_sweep(params, grid, eps=eps, workers=ctx.workers,
                                  **integration_options(ctx))
    ctx.writer.write_csv('interface_sweep.csv', table)
    report = {
        'table': records(table),
        'good_boundary': shoot.good_boundary(table),
        'threshold': interface_threshold(params),
    }
    ctx.writer.write_json('interface_sweep.json', report)
    return report
