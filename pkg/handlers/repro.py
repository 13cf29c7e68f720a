import argparse
import logging
from dataclasses import replace
from typing import Any, Dict, List, Tuple

import pandas as pd

import config
from database.models import ShotSource, ShotSpec, SurfaceId, enum_value
from handlers.router import Context, Router
from utils import barriers, shoot
from utils.artifacts import records
from utils.errors import ConfigError
from utils.experiments import Experiment, ExperimentManager
from utils.params import validate

LOGGER = logging.getLogger(__name__)

router = Router("repro")

experiment_manager = ExperimentManager()


def _arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--experiment', default=None, help="run a single named experiment")


def _orbits(exp: Experiment, sigma: float, options: Dict[str, Any]) -> Tuple[pd.DataFrame, Dict[str, str]]:
    params = validate(exp.m, exp.p, sigma, exp.N)
    frames, fates = [], {}
    for source in exp.sources:
        spec = ShotSpec(enum_value(ShotSource, source, 'source'))
        trajectory = shoot.launch(spec, params, **options)
        fate = shoot.classify(trajectory, params)
        frame = shoot.finite_states(trajectory, params)
        frames.append(pd.DataFrame({
            'source': source, 'sigma': sigma, 'eta': trajectory.eta,
            'X': frame[:, 0], 'Y': frame[:, 1], 'Z': frame[:, 2],
        }))
        fates[source] = fate.label
    return pd.concat(frames, ignore_index=True), fates


def figure1(ctx: Context, exp: Experiment, options: Dict[str, Any]) -> Dict[str, Any]:
    frame, fates = _orbits(exp, exp.sigma, options)
    ctx.writer.write_csv('figure1_orbits.csv', frame)
    return {'sigma': exp.sigma, 'fates': fates}


def figure2(ctx: Context, exp: Experiment, options: Dict[str, Any]) -> Dict[str, Any]:
    params = validate(exp.m, exp.p, exp.sigma, exp.N)
    rows: List[pd.DataFrame] = []
    counts = {}
    for region in ('D1', 'D2', 'D3'):
        pts = barriers.region_samples(params, region, seed=ctx.writer.seed)
        counts[region] = int(pts.shape[1])
        rows.append(pd.DataFrame({'region': region, 'X': pts[0], 'Y': pts[1], 'Z': pts[2]}))
    ctx.writer.write_csv('figure2_regions.csv', pd.concat(rows, ignore_index=True))
    return {'sigma': exp.sigma, 'samples': counts}


def figure3(ctx: Context, exp: Experiment, options: Dict[str, Any]) -> Dict[str, Any]:
    search = shoot.find_sigma_star(exp.m, exp.p, exp.N, tuple(exp.bracket), **options)
    star, star_fates = _orbits(exp, search.sigma_star, options)
    large, large_fates = _orbits(exp, exp.sigma, options)
    ctx.writer.write_csv('figure3_orbits.csv', pd.concat([star, large], ignore_index=True))
    return {'sigma_star': search.sigma_star, 'fates_at_sigma_star': star_fates,
            'sigma': exp.sigma, 'fates': large_fates}


def figure4(ctx: Context, exp: Experiment, options: Dict[str, Any]) -> Dict[str, Any]:
    params = validate(exp.m, exp.p, exp.sigma, exp.N)
    surface = barriers.make_surface(SurfaceId.PI2, params)
    co = surface.coefficients
    XP, YP = co['XP'], co['YP']
    corners = []
    for X in (co['X0'], XP, 2.0 * XP):
        Y = co['C'] * X - co['B']
        corners.append(('Pi1', X, Y, 0.0))
        corners.append(('Pi1', X, Y, barriers.Z_CAP))
    for Y in (YP, -2.0 * co['Y0']):
        for X in (co['X0'], XP):
            corners.append(('Pi2', X, Y, co['A'] * (YP - Y)))
    frame = pd.DataFrame(corners, columns=['kind', 'X', 'Y', 'Z'])
    curve = barriers.pi1_parabola(params)
    frame = pd.concat([frame, pd.DataFrame({'kind': 'F=0', 'X': curve[0], 'Y': curve[1],
                                            'Z': curve[2]})], ignore_index=True)
    ctx.writer.write_csv('figure4_planes.csv', frame)
    report = barriers.certify(surface, params, config.CERTIFY_SAMPLES, ctx.writer.seed)
    return {'sigma': exp.sigma, 'B': co['B'], 'A': co['A'], 'pi2_verdict': report.verdict,
            'checks': report.to_dict()['checks']}


def lambda_trend(ctx: Context, exp: Experiment, options: Dict[str, Any]) -> Dict[str, Any]:
    table = shoot.lambda_of_sigma(exp.m, exp.p, exp.N, exp.sigmas, workers=ctx.workers, **options)
    ctx.writer.write_csv('lambda_trend.csv', table)
    return {'table': records(table), 'trend': shoot.lambda_trend(table)}


RUNNERS = {
    'figure1': figure1,
    'figure2': figure2,
    'figure3': figure3,
    'figure4': figure4,
    'lambda_trend': lambda_trend,
}


@router.command('repro', help="regenerate the data behind the figures", arguments=_arguments,
                needs_params=False)
def repro(ctx: Context) -> Dict[str, Any]:
    options = {'rtol': ctx.rtol, 'atol': ctx.atol}
    wanted = ctx.option('experiment')
    if wanted:
        exp = experiment_manager.get_experiment(wanted)
        if exp is None:
            raise ConfigError("unknown experiment", experiment=wanted,
                              known=", ".join(sorted(experiment_manager.get_all_experiments())))
        experiments = {wanted: exp}
    else:
        experiments = experiment_manager.get_all_experiments()
    results: Dict[str, Any] = {}
    for name, exp in experiments.items():
        runner = RUNNERS.get(name)
        if runner is None:
            LOGGER.warning("no runner for experiment %s", name)
            continue
        LOGGER.info("reproducing %s", name)
        # artifacts of one experiment carry its own parameters
        local = replace(ctx, writer=ctx.writer.with_config({'experiment': name, **exp.to_dict()}))
        results[name] = {'experiment': exp.to_dict(), 'result': runner(local, exp, options)}
    summary = ctx.writer.with_config({name: exp.to_dict() for name, exp in experiments.items()})
    summary.write_json('repro.json', {'experiments': results})
    return {'experiments': results}
