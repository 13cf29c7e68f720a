import argparse
import logging
from typing import Any, Dict

from database.models import Chart, Trajectory
from handlers.router import Context, Router
from handlers.shooting import integration_options, shot_arguments, spec_from
from utils import profile as profiles
from utils import shoot
from utils.artifacts import read_trajectory_csv
from utils.errors import ConfigError, GridOutsideSupport, NoInterface

LOGGER = logging.getLogger(__name__)

router = Router("profiles")


def _arguments(parser: argparse.ArgumentParser) -> None:
    shot_arguments(parser)
    parser.add_argument('--trajectory', default=None, help="trajectory CSV written by shoot")
    parser.add_argument('--T', type=float, default=None, help="blow-up time")
    parser.add_argument('--samples', type=int, default=profiles.DEFAULT_SAMPLES)


def trajectory_from_csv(path: str) -> Trajectory:
    frame = read_trajectory_csv(path)
    missing = {'eta', 'c1', 'c2', 'c3', 'chart'} - set(frame.columns)
    if missing:
        raise ConfigError("trajectory CSV lacks columns", columns=", ".join(sorted(missing)))
    eta = frame['eta'].to_numpy(dtype=float)
    direction = 1 if len(eta) < 2 or eta[-1] >= eta[0] else -1
    return Trajectory(eta=eta, states=frame[['c1', 'c2', 'c3']].to_numpy(dtype=float),
                      chart=Chart(frame['chart'].iloc[0]), direction=direction)


def profile_report(trajectory: Trajectory, params, T: float = 1.0,
                   n_samples: int = profiles.DEFAULT_SAMPLES):
    """Reconstruct a profile and collect every fit and residual on it."""
    profile = profiles.reconstruct(trajectory, params, n_samples)
    report: Dict[str, Any] = {
        'params': params.to_dict(),
        'origin_class': profile.origin_class.value,
        'pattern': profiles.blowup_pattern(profile).value,
        'diagnostics': dict(profile.diagnostics),
        'expected_origin_exponent': profiles.expected_origin_exponent(profile.origin_class, params),
    }
    try:
        report['interface'] = profiles.fit_interface(profile).to_dict()
    except NoInterface as e:
        report['interface'] = None
        report['no_interface'] = e.message
    report['ssode_residual'] = profiles.ssode_residual(profile).to_dict()
    try:
        report['pde_residual'] = profiles.pde_residual(profile, params, T=T).to_dict()
    except GridOutsideSupport as e:
        report['pde_residual'] = None
        report['pde_skipped'] = e.message
    return profile, report


@router.command('profile', help="reconstruct a profile and verify its residuals", arguments=_arguments)
def profile_command(ctx: Context) -> Dict[str, Any]:
    params = ctx.params
    path = ctx.option('trajectory')
    if path:
        trajectory = trajectory_from_csv(path)
    else:
        trajectory = shoot.launch(spec_from(ctx), params, **integration_options(ctx))
        report_fate = shoot.classify(trajectory, params)
        LOGGER.info("orbit fate %s", report_fate.label)
    T = float(ctx.option('T', 1.0))
    profile, report = profile_report(trajectory, params, T, ctx.args.samples)
    ctx.writer.write_csv('profile.csv', profile.to_frame())
    ctx.writer.write_json('profile.json', report)
    return report
