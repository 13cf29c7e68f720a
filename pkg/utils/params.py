import logging
from functools import lru_cache

import numpy as np

import config
from database.models import Exponents, Params, Regime
from utils.errors import RangeViolation

LOGGER = logging.getLogger(__name__)


def sigma_lower_bound(m: float, p: float) -> float:
    return 2.0 * (1.0 - p) / (m - 1.0)


def regime_of(m: float, p: float, tol: float = config.REGIME_TOL) -> Regime:
    """Classify by m+p against 2, with an absolute tolerance."""
    gap = m + p - 2.0
    if abs(gap) <= tol:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL if gap > 0 else Regime.SUBCRITICAL


def validate(m: float, p: float, sigma: float, N: int,
             tol: float = config.REGIME_TOL) -> Params:
    """Check the exponent range and attach the regime.

    Raises:
        RangeViolation: naming the first constraint that fails.
    """
    for name, value in (('m', m), ('p', p), ('sigma', sigma), ('N', N)):
        if value is None or not np.isfinite(value):
            raise RangeViolation(f"{name} finite", value, float('nan'))
    if m <= 1:
        raise RangeViolation("m > 1", m, 1.0)
    if not 0 < p < 1:
        raise RangeViolation("0 < p < 1", p, 0.0 if p <= 0 else 1.0)
    if int(N) != N or N < 1:
        raise RangeViolation("N integer >= 1", N, 1)
    bound = sigma_lower_bound(m, p)
    if sigma <= bound:
        raise RangeViolation("sigma > 2(1-p)/(m-1)", sigma, bound)
    params = Params(m=float(m), p=float(p), sigma=float(sigma), N=int(N),
                    regime=regime_of(m, p, tol), tol=tol)
    LOGGER.debug("validated %s", params)
    return params


def with_sigma(params: Params, sigma: float) -> Params:
    return validate(params.m, params.p, sigma, params.N, params.tol)


@lru_cache(maxsize=4096)
def exponents(params: Params) -> Exponents:
    m, p, sigma = params.m, params.p, params.sigma
    L = sigma * (m - 1.0) + 2.0 * (p - 1.0)
    alpha = (sigma + 2.0) / L
    beta = (m - p) / L
    xi_max = None
    if params.critical:
        xi_max = (beta ** 2 / (4.0 * m)) ** (1.0 / (sigma - 2.0))
    return Exponents(alpha=alpha, beta=beta, L=L, xi_max=xi_max)


def shooting_exponent(params: Params) -> float:
    """e = (m-1)/(m+p-2), so that X = U**e in the shooting chart."""
    return (params.m - 1.0) / (params.m + params.p - 2.0)

