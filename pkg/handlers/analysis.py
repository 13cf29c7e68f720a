import logging
from typing import Any, Dict

from database.models import PointTag
from handlers.router import Context, Router
from utils import dynsys
from utils.errors import NonHyperbolic
from utils.params import exponents, sigma_lower_bound

LOGGER = logging.getLogger(__name__)

router = Router("analysis")


def analysis_report(params) -> Dict[str, Any]:
    """Critical points with their eigen-data and the closed-form cross-checks."""
    ex = exponents(params)
    points = []
    for point in dynsys.critical_points(params):
        entry = point.to_dict()
        try:
            entry['eigen'] = dynsys.eigen(point, params).to_dict()
        except NonHyperbolic as e:
            entry['eigen'] = None
            entry['non_hyperbolic'] = e.message
        points.append(entry)
    if params.critical:
        points.extend(p.to_dict() for p in dynsys.parabola_points(params, 5))

    p2 = next(p for p in dynsys.critical_points(params) if p.tag is PointTag.P2)
    extras = dynsys.eigen(p2, params).extras
    return {
        'params': params.to_dict(),
        'exponents': ex.to_dict(),
        'sigma_lower_bound': sigma_lower_bound(params.m, params.p),
        'flags': {
            'regime': params.regime.value,
            'saddle_node': params.saddle_node,
            'critical_parabola': params.critical,
        },
        'points': points,
        'cross_checks': {k: float(extras[k]) for k in
                         ('sum_residual', 'product_residual', 'lambda3_residual', 'e3_residual')},
        'D_sigma': float(dynsys.d_sigma(params)),
    }


@router.command('analyze', help="critical points, eigen-data and closed-form checks")
def analyze(ctx: Context) -> Dict[str, Any]:
    report = analysis_report(ctx.params)
    ctx.writer.write_json('analysis.json', report)
    LOGGER.info("analyzed %d critical points", len(report['points']))
    return report
