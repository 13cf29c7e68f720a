import argparse
import logging
from typing import Any, Dict

import config
from database.models import SurfaceId, enum_value
from handlers.router import Context, Router
from utils import barriers

LOGGER = logging.getLogger(__name__)

router = Router("certificates")


def _arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--surface', choices=[s.value for s in SurfaceId], default=None)
    parser.add_argument('--samples', type=int, default=None)
    parser.add_argument('--B', type=float, default=None)
    parser.add_argument('--A', type=float, default=None)
    parser.add_argument('--threshold', action='store_true',
                        help="also search the smallest passing sigma")


@router.command('certify', help="sample the sign condition on a barrier surface", arguments=_arguments)
def certify(ctx: Context) -> Dict[str, Any]:
    params = ctx.params
    surface_id = enum_value(SurfaceId, ctx.option('surface', SurfaceId.PI2.value), 'surface')
    n = int(ctx.option('samples', config.CERTIFY_SAMPLES))
    surface = barriers.make_surface(surface_id, params, B=ctx.args.B, A=ctx.args.A)
    report = barriers.certify(surface, params, n, ctx.writer.seed).to_dict()
    if ctx.args.threshold:
        report['empirical_threshold'] = barriers.certify_threshold(
            surface_id, params, start=params.sigma, n=min(n, 2000), seed=ctx.writer.seed)
    ctx.writer.write_json(f'certificate_{surface_id.value}.json', report)
    return report
