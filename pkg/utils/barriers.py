"""Barrier surfaces of the phase space and sampled sign certificates.

Each surface is a graph over two free coordinates; the third one is solved
from the surface equation. flow_sign evaluates normal . field on it, and
closed_form the simplified polynomial of the same quantity.
"""
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

import config
from database.models import (
    CertificateReport, Chart, Params, Regime, Surface, SurfaceId,
)
from utils import dynsys
from utils.errors import ConfigError, OffSurface, RegimeError
from utils.params import exponents, shooting_exponent, with_sigma

LOGGER = logging.getLogger(__name__)

PI2_DELTA = 0.05
Z_CAP = 1.0
MAX_B_DOUBLINGS = 40


# Coefficients

def _K(params: Params) -> float:
    return params.m * params.N - params.N + 2.0


def choose_B(params: Params) -> float:
    """Smallest power of two pushing the Pi1 foot below -2*Y0."""
    m = params.m
    K = _K(params)
    P2 = dynsys.p2(params)
    Y0 = (m - 1.0) / 2.0
    B = 1.0
    for _ in range(MAX_B_DOUBLINGS):
        x0 = B * B * (m - 1.0) ** 2 / ((2.0 * B * m + m - 1.0) * (B * K + m - 1.0))
        if (P2[1] + B) / P2[0] * x0 - B < -2.0 * Y0:
            return B
        B *= 2.0
    raise RegimeError("no admissible B for the first plane through P2", m=m, N=params.N)


def a_lower_bound(params: Params, B: float) -> float:
    m = params.m
    K = _K(params)
    return ((2.0 * (m - 1.0) * K * B * B + (m - 1.0) * (K + 2.0 * m) * B + (m - 1.0) ** 2)
            / (B * K + m - 1.0))


def _pi1_coefficients(params: Params, B: float) -> Dict[str, float]:
    m, N, s = params.m, params.N, params.sigma
    ex = exponents(params)
    K, L = _K(params), ex.L
    XP, YP, _ = dynsys.p2(params)
    C = (YP + B) / XP
    A1 = C * (m * C - 2.0 + N)
    A2 = -C * B * (m + 1.0) + ex.ratio * C - 1.0 - N * B
    A3 = B * (B - ex.ratio)
    return {
        'B': B, 'C': C, 'A1': A1, 'A2': A2, 'A3': A3,
        'X0_sigma': A3 / (A1 * XP),
        'X0_closed': (B * (m - 1.0) * L * (B * s + 2.0 * B - m + params.p)
                      / ((2.0 * B * m * (s + 2.0) + L) * ((s + 2.0) * K * B + L))),
        'X0': B * B * (m - 1.0) ** 2 / ((2.0 * B * m + m - 1.0) * (B * K + m - 1.0)),
        'Y0': (m - 1.0) / 2.0,
        'XP': XP, 'YP': YP,
    }


def _pi2_coefficients(params: Params, B: float, A: float) -> Dict[str, float]:
    m, p, N, s = params.m, params.p, params.N, params.sigma
    r = exponents(params).ratio
    XP, YP, _ = dynsys.p2(params)
    gap = 1.0 - N * YP
    M = (A - (m + p) * YP - r - (N + s - 2.0) * XP) / gap
    pi1 = _pi1_coefficients(params, B)
    return {'A': A, 'B': B, 'M': M, 'gap': gap, 'C': pi1['C'], 'X0': pi1['X0'],
            'Y0': pi1['Y0'], 'XP': XP, 'YP': YP, 'delta': PI2_DELTA}


def _critical_planes(params: Params) -> Dict[str, float]:
    m, s, N = params.m, params.sigma, params.N
    c = (m - 1.0) ** 2 / (s + 2.0) ** 2
    a = (m - 1.0) ** 2 * (3.0 * s + 7.0 - m) / (3.0 * (s + 2.0) ** 2 * (2.0 * s + 5.0 - m))
    return {
        'c': c, 'd': c / 2.0, 'a': a, 'b': a,
        'e': (3.0 * s + 7.0 - m) / (3.0 * (2.0 * s + 5.0 - m)),
        'Y_star': -(m - 1.0) / (6.0 * (2.0 * s - m + 5.0)),
        'X_star': 2.0 * (m - 1.0) ** 2 / (s * (s + 2.0) ** 2 * (N + 2.0)),
    }


def _nykv_coefficients(params: Params) -> Dict[str, float]:
    m, p, N = params.m, params.p, params.N
    L = exponents(params).L
    XP = dynsys.p2(params)[0]
    UP = XP ** (1.0 / shooting_exponent(params))
    k = N * (m - 1.0) / ((N * (m - 1.0) + L) * XP ** ((1.0 - p) / (m - 1.0)))
    return {'k': k, 'UP': UP, 'UV_bound': UP / k}


# Geometry

@dataclass
class _Geometry:
    chart: Chart
    regimes: Tuple[Regime, ...]
    expected_sign: int
    level: Callable      # (state, co, params) -> residual of the surface equation
    solve: Callable      # (state, co, params) -> state with its dependent coordinate fixed
    normal: Optional[Callable]  # (state, co, params) -> normal vector; None for divergence
    closed: Callable     # (state, co, params) -> simplified sign expression
    box: Callable        # (co, params) -> {coordinate: (lo, hi)} for the free coordinates
    inside: Callable     # (state, co, params) -> bool mask of the certified region


ALL = (Regime.SUPERCRITICAL, Regime.CRITICAL, Regime.SUBCRITICAL)
CRIT = (Regime.CRITICAL,)


def _set(state: np.ndarray, index: int, value) -> np.ndarray:
    out = np.array(state, dtype=float, copy=True)
    out[index] = value
    return out


def _ratio(params: Params) -> float:
    return exponents(params).ratio


def _cylinder() -> _Geometry:
    def closed(x, co, params):
        X, Y, _ = x
        r, s, N = _ratio(params), params.sigma, params.N
        h = (2.0 * N + s - 2.0) * Y * Y + (N + s - 2.0) * r * Y - 2.0 * Y - r
        return X * h + (params.m + params.p - 2.0) * Y * Y * (Y + _ratio(params))

    return _Geometry(
        Chart.FINITE, ALL, -1,
        level=lambda x, co, pr: -x[1] ** 2 - _ratio(pr) * x[1] - x[2],
        solve=lambda x, co, pr: _set(x, 2, -x[1] ** 2 - _ratio(pr) * x[1]),
        normal=lambda x, co, pr: np.array([np.zeros_like(x[1]), -2.0 * x[1] - _ratio(pr),
                                           -np.ones_like(x[1])]),
        closed=closed,
        box=lambda co, pr: {'X': (0.0, co['XP']), 'Y': (-_ratio(pr) / 2.0, 0.0)},
        inside=lambda x, co, pr: (x[0] > 0) & (x[1] < 0),
    )


def _plane_nykv() -> _Geometry:
    def closed(u, co, params):
        U, Y, V = u
        m, p, N = params.m, params.p, params.N
        L = exponents(params).L
        bracket = co['k'] * (N + L / (m - 1.0)) * U ** ((1.0 - p) / (m + p - 2.0)) - N
        return -N * (Y * Y + _ratio(params) * Y) + U * V * bracket

    return _Geometry(
        Chart.UYV, (Regime.SUPERCRITICAL,), -1,
        level=lambda u, co, pr: pr.N * u[1] + co['k'] * u[2] - 1.0,
        solve=lambda u, co, pr: _set(u, 1, (1.0 - co['k'] * u[2]) / pr.N),
        normal=lambda u, co, pr: np.array([np.zeros_like(u[0]), pr.N + 0.0 * u[0],
                                           co['k'] + 0.0 * u[0]]),
        closed=closed,
        box=lambda co, pr: {'U': (0.0, co['UP']), 'V': (0.0, 1.0 / co['k'])},
        inside=lambda u, co, pr: (u[0] > 0) & (u[2] > 0),
    )


def _plane_cyz() -> _Geometry:
    def closed(x, co, params):
        X, Y, _ = x
        m, s, N = params.m, params.sigma, params.N
        q = (m - 1.0) ** 2 / (s + 2.0) ** 2
        return (-q * Y * Y - q * (N + s - 2.0) * X * Y + s * q / 2.0 * X
                - (2.0 * s + 5.0 - m) * (m - 1.0) ** 3 / (s + 2.0) ** 4 * Y
                - (m - 1.0) ** 4 / (2.0 * (s + 2.0) ** 4))

    return _Geometry(
        Chart.FINITE, CRIT, -1,
        level=lambda x, co, pr: co['c'] * x[1] + x[2] - co['d'],
        solve=lambda x, co, pr: _set(x, 2, co['d'] - co['c'] * x[1]),
        normal=lambda x, co, pr: np.array([0.0 * x[0], co['c'] + 0.0 * x[0], 1.0 + 0.0 * x[0]]),
        closed=closed,
        box=lambda co, pr: {'X': (0.0, co['X_star']), 'Y': (co['Y_star'], 0.5)},
        inside=lambda x, co, pr: (x[0] > 0) & (x[0] < co['X_star']) & (x[1] > co['Y_star']),
    )


def _plane_axz() -> _Geometry:
    def closed(x, co, params):
        X, Y, _ = x
        s = params.sigma
        return co['a'] * X * (-s * X + (params.m - 1.0) * Y + s - 2.0)

    return _Geometry(
        Chart.FINITE, CRIT, -1,
        level=lambda x, co, pr: co['a'] * x[0] + x[2] - co['b'],
        solve=lambda x, co, pr: _set(x, 2, co['b'] - co['a'] * x[0]),
        normal=lambda x, co, pr: np.array([co['a'] + 0.0 * x[0], 0.0 * x[0], 1.0 + 0.0 * x[0]]),
        closed=closed,
        box=lambda co, pr: {'X': (0.0, 1.0), 'Y': (-_ratio(pr), 0.5)},
        inside=lambda x, co, pr: ((x[0] > 0)
                                  & ((pr.m - 1.0) * x[1] < pr.sigma * x[0] - pr.sigma + 2.0)),
    )


def _pi1() -> _Geometry:
    def inside(x, co, params):
        X = x[0]
        return ((X > 0) & (X < co['X0_sigma'])) | ((X > co['XP']) & (X < 2.0 * co['XP']))

    return _Geometry(
        Chart.FINITE, ALL, 1,
        level=lambda x, co, pr: co['C'] * x[0] - co['B'] - x[1],
        solve=lambda x, co, pr: _set(x, 1, co['C'] * x[0] - co['B']),
        normal=lambda x, co, pr: np.array([co['C'] + 0.0 * x[0], -1.0 + 0.0 * x[0], 0.0 * x[0]]),
        closed=lambda x, co, pr: co['A1'] * x[0] ** 2 + co['A2'] * x[0] + co['A3'] + x[2],
        box=lambda co, pr: {'X': (0.0, 2.0 * co['XP']), 'Z': (0.0, Z_CAP)},
        inside=inside,
    )


def _pi2() -> _Geometry:
    def closed(x, co, params):
        m, p, N, s = params.m, params.p, params.N, params.sigma
        h, k = x[1] - co['YP'], x[0] - co['XP']
        A = co['A']
        return (A * co['gap'] * (k + co['M'] * h) - A * (N + s - 2.0) * h * k
                - A * (m + p - 1.0) * h * h)

    def box(co, params):
        return {'X': (co['X0'], co['XP']),
                'Y': (co['YP'] - (co['YP'] + 2.0 * co['Y0']), co['YP'] - co['delta'])}

    return _Geometry(
        Chart.FINITE, ALL, 1,
        level=lambda x, co, pr: x[2] - co['A'] * (co['YP'] - x[1]),
        solve=lambda x, co, pr: _set(x, 2, co['A'] * (co['YP'] - x[1])),
        normal=lambda x, co, pr: np.array([0.0 * x[0], co['A'] + 0.0 * x[0], 1.0 + 0.0 * x[0]]),
        closed=closed,
        box=box,
        inside=lambda x, co, pr: (x[0] > co['X0']) & (x[0] < co['XP']),
    )


def _yfloor() -> _Geometry:
    def closed(x, co, params):
        Y0, r, N = co['Y0'], _ratio(params), params.N
        return -Y0 * Y0 + r * Y0 + x[0] * (1.0 + N * Y0) - x[2]

    return _Geometry(
        Chart.FINITE, ALL, -1,
        level=lambda x, co, pr: x[1] + co['Y0'],
        solve=lambda x, co, pr: _set(x, 1, -co['Y0'] + 0.0 * x[0]),
        normal=lambda x, co, pr: np.array([0.0 * x[0], 1.0 + 0.0 * x[0], 0.0 * x[0]]),
        closed=closed,
        box=lambda co, pr: {'X': (0.0, co['XP']), 'Z': (0.0, Z_CAP)},
        inside=lambda x, co, pr: (x[0] > 0) & (x[0] < co['XP']),
    )


def _no_cycles() -> _Geometry:
    def divergence(x, co, params):
        return (params.m - 3.0) * x[1] - (params.N + 4.0) * x[0] - _ratio(params)

    return _Geometry(
        Chart.FINITE, CRIT, -1,
        level=lambda x, co, pr: x[2],
        solve=lambda x, co, pr: _set(x, 2, 0.0 * x[0]),
        normal=None,
        closed=divergence,
        box=lambda co, pr: {'X': (0.0, co['XP']), 'Y': (-_ratio(pr) / 2.0, 1.0)},
        inside=lambda x, co, pr: x[0] >= 0,
    )


def _y_nullcline() -> _Geometry:
    def ydot_without_z(x, params):
        X, Y = x[0], x[1]
        return -Y * Y - _ratio(params) * Y + X - params.N * X * Y

    def closed(x, co, params):
        X, Y, Z = x
        m, N, s = params.m, params.N, params.sigma
        return X * ((1.0 - N * Y) * ((m - 1.0) * Y - 2.0 * X) - (s - 2.0) * Z)

    return _Geometry(
        Chart.FINITE, CRIT, -1,
        level=lambda x, co, pr: ydot_without_z(x, pr) - x[2],
        solve=lambda x, co, pr: _set(x, 2, ydot_without_z(x, pr)),
        normal=lambda x, co, pr: np.array([1.0 - pr.N * x[1], -2.0 * x[1] - _ratio(pr) - pr.N * x[0],
                                           -1.0 + 0.0 * x[0]]),
        closed=closed,
        box=lambda co, pr: {'X': (0.0, co['XP']), 'Y': (-_ratio(pr), 0.0)},
        inside=lambda x, co, pr: (x[0] > 0) & (x[1] < 0) & (x[2] >= 0),
    )


_GEOMETRY: Dict[SurfaceId, Callable[[], _Geometry]] = {
    SurfaceId.CYLINDER: _cylinder,
    SurfaceId.PLANE_NYKV: _plane_nykv,
    SurfaceId.PLANE_CYZ: _plane_cyz,
    SurfaceId.PLANE_AXZ: _plane_axz,
    SurfaceId.PI1: _pi1,
    SurfaceId.PI2: _pi2,
    SurfaceId.YFLOOR: _yfloor,
    SurfaceId.NO_CYCLES: _no_cycles,
    SurfaceId.Y_NULLCLINE: _y_nullcline,
}

_COORDS = {Chart.FINITE: ('X', 'Y', 'Z'), Chart.UYV: ('U', 'Y', 'V')}


def make_surface(surface_id: SurfaceId, params: Params, B: Optional[float] = None,
                 A: Optional[float] = None) -> Surface:
    """Build a surface with its coefficients at the given parameters.

    Pi1 and Pi2 take B as the smallest admissible power of two and A as
    twice its lower bound unless given explicitly.
    """
    geometry = _GEOMETRY[surface_id]()
    if params.regime not in geometry.regimes:
        raise RegimeError(f"{surface_id.value} is not defined for m+p in this regime",
                          regime=params.regime.value)

    XP, YP, _ = dynsys.p2(params)
    co: Dict[str, float] = {'XP': XP, 'YP': YP, 'Y0': (params.m - 1.0) / 2.0}
    if surface_id in (SurfaceId.PI1, SurfaceId.PI2):
        B = choose_B(params) if B is None else B
        co.update(_pi1_coefficients(params, B))
        if surface_id is SurfaceId.PI2:
            A = 2.0 * a_lower_bound(params, B) if A is None else A
            co.update(_pi2_coefficients(params, B, A))
    elif surface_id is SurfaceId.PLANE_NYKV:
        co.update(_nykv_coefficients(params))
    elif params.critical:
        co.update(_critical_planes(params))
    region = geometry.box(co, params)
    surface = Surface(surface_id, geometry.chart, co, geometry.expected_sign, region)
    LOGGER.debug("surface %s: %s", surface_id.value, co)
    return surface


# Signs

def _geometry(surface: Surface) -> _Geometry:
    return _GEOMETRY[surface.id]()


def project(surface: Surface, state: Sequence[float], params: Params) -> np.ndarray:
    """Snap a state within SURFACE_TOL of the surface onto it.

    Raises:
        OffSurface: the state is farther than the tolerance.
    """
    geometry = _geometry(surface)
    x = np.asarray(state, dtype=float)
    residual = geometry.level(x, surface.coefficients, params)
    scale = 1.0 + np.max(np.abs(x))
    if np.any(np.abs(residual) > config.SURFACE_TOL * scale):
        raise OffSurface(f"state is off {surface.id.value}", residual=float(np.max(np.abs(residual))))
    return geometry.solve(x, surface.coefficients, params)


def _field(surface: Surface, x: np.ndarray, params: Params) -> np.ndarray:
    if surface.chart is Chart.UYV:
        return dynsys.field_uyv(x, params)
    return dynsys.field_finite(x, params)


def flow_sign(surface: Surface, state: Sequence[float], params: Params):
    """Inner product of the field with the surface normal at a surface state.

    For NoCycles the value is the divergence of the planar field on {Z=0}.
    Accepts one state (3,) or a batch (3, n).
    """
    geometry = _geometry(surface)
    x = project(surface, state, params)
    if geometry.normal is None:
        return geometry.closed(x, surface.coefficients, params)
    value = np.sum(geometry.normal(x, surface.coefficients, params) * _field(surface, x, params),
                   axis=0)
    return float(value) if np.ndim(value) == 0 else value


def closed_form(surface: Surface, state: Sequence[float], params: Params):
    """The simplified sign expression, evaluated without the field."""
    x = project(surface, state, params)
    value = _geometry(surface).closed(x, surface.coefficients, params)
    return float(value) if np.ndim(value) == 0 else value


# Certificates

def sample_surface(surface: Surface, params: Params, n: int,
                   seed: int = config.DEFAULT_SEED) -> np.ndarray:
    """Low-discrepancy points of the certified region, shape (3, n)."""
    geometry = _geometry(surface)
    names = _COORDS[surface.chart]
    free = [names.index(name) for name in surface.region]
    bounds = np.array([surface.region[names[i]] for i in free])
    sampler = qmc.Halton(d=len(free), scramble=True, seed=seed)
    kept = []
    total = 0
    for _ in range(20):
        unit = sampler.random(2 * n)
        pts = np.zeros((3, len(unit)))
        pts[free] = (bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])).T
        pts = geometry.solve(pts, surface.coefficients, params)
        mask = geometry.inside(pts, surface.coefficients, params)
        kept.append(pts[:, mask])
        total += int(mask.sum())
        if total >= n:
            break
    points = np.concatenate(kept, axis=1)[:, :n]
    if points.shape[1] < n:
        LOGGER.warning("only %d of %d samples fell inside the %s region",
                       points.shape[1], n, surface.id.value)
    return points


def certify(surface: Surface, params: Params, n: int = config.CERTIFY_SAMPLES,
            seed: int = config.DEFAULT_SEED) -> CertificateReport:
    """Sample the surface region and collect every state with the wrong sign.

    Failures are data: a failing certificate is a report, never an error.
    """
    points = sample_surface(surface, params, n, seed)
    values = np.atleast_1d(flow_sign(surface, points, params))
    wrong = values * surface.expected_sign <= 0
    violations = [tuple(float(c) for c in points[:, i]) for i in np.nonzero(wrong)[0]]
    report = CertificateReport(surface, points.shape[1], violations, checks=surface_checks(surface, params))
    report.checks['worst'] = float(np.max(values * surface.expected_sign * -1.0)) if len(values) else 0.0
    LOGGER.info("certificate %s at sigma=%g: %s (%d/%d violations)", surface.id.value,
                params.sigma, report.verdict, len(violations), report.samples)
    return report


def surface_checks(surface: Surface, params: Params) -> Dict[str, Any]:
    """Side conditions of the plane construction through P2."""
    co = surface.coefficients
    checks: Dict[str, Any] = {}
    if surface.id in (SurfaceId.PI1, SurfaceId.PI2):
        e3 = dynsys.e3_vector(params)
        checks['pi1_foot_below_floor'] = bool(co['C'] * co['X0_sigma'] - co['B'] < -co['Y0'])
        checks['e3_dot_pi1_normal'] = float(e3 @ np.array([co['C'], -1.0, 0.0]))
        checks['yp_below_inverse_n'] = bool(co['YP'] < 1.0 / params.N)
    if surface.id is SurfaceId.PI2:
        e3 = dynsys.e3_vector(params)
        checks['slope_gap'] = float(co['C'] - 1.0 / co['M'])
        checks['e3_dot_pi2_normal'] = float(e3 @ np.array([0.0, co['A'], 1.0]))
        checks['A_lower_bound'] = a_lower_bound(params, co['B'])
    if surface.id is SurfaceId.PLANE_NYKV:
        checks['uv_bound'] = co['UV_bound']
    return checks


def certify_threshold(surface_id: SurfaceId, params: Params, start: float,
                      n: int = 2000, seed: int = config.DEFAULT_SEED,
                      tol: float = 1e-2, max_doublings: int = 16) -> Optional[float]:
    """Empirical smallest sigma at which a certificate passes.

    Doubles sigma from start until a pass, then bisects between the last
    failing and first passing value. Returns None when no pass is found.
    """
    def passes(sigma: float) -> bool:
        shifted = with_sigma(params, sigma)
        return certify(make_surface(surface_id, shifted), shifted, n, seed).verdict == 'pass'

    if passes(start):
        return start
    lo, hi = start, None
    for _ in range(max_doublings):
        candidate = 2.0 * lo
        if passes(candidate):
            hi = candidate
            break
        lo = candidate
    if hi is None:
        return None
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
        LOGGER.debug("threshold bracket [%g, %g]", lo, hi)
    return hi


def pi2_corner_margin(params: Params) -> float:
    """Smallest value of the Pi2 sign expression over its certified box.

    The expression is linear and increasing in k = X - X(P2) and concave in
    h = Y - Y(P2), so the minimum sits at k = X0 - X(P2) and one end of the
    h range.
    """
    surface = make_surface(SurfaceId.PI2, params)
    co = surface.coefficients
    geometry = _geometry(surface)
    X = co['X0']
    corners = np.array([[X, X], list(surface.region['Y']), [0.0, 0.0]])
    corners = geometry.solve(corners, co, params)
    return float(np.min(geometry.closed(corners, co, params)))


def pi2_threshold(params: Params, start: float = 2.0 + 1e-6,
                  max_doublings: int = 24) -> Optional[float]:
    """Smallest sigma at which the Pi2 sign expression is positive on the
    whole certified box, from the two extreme corners."""
    def margin(sigma: float) -> float:
        return pi2_corner_margin(with_sigma(params, sigma))

    lo = start
    if margin(lo) > 0:
        return lo
    for _ in range(max_doublings):
        hi = 2.0 * lo
        if margin(hi) > 0:
            sigma = brentq(margin, lo, hi, xtol=1e-10)
            LOGGER.info("Pi2 corner threshold sigma=%.6f", sigma)
            return float(sigma)
        lo = hi
    return None


def pi1_parabola(params: Params, n: int = 200, B: Optional[float] = None) -> np.ndarray:
    """Points of the curve F(X, Z) = 0 inside Pi1 between X0(sigma) and X(P2)."""
    co = make_surface(SurfaceId.PI1, params, B=B).coefficients
    X = np.linspace(co['X0_sigma'], co['XP'], n)
    Z = -(co['A1'] * X * X + co['A2'] * X + co['A3'])
    return np.vstack([X, co['C'] * X - co['B'], np.maximum(Z, 0.0)])


def interface_threshold(params: Params) -> Dict[str, float]:
    """U0 minimizing h(U) and V0 = h(U0): orbits entering P(v0) with v0 < V0
    stay in {Y < -beta/2alpha}."""
    if params.regime is not Regime.SUPERCRITICAL:
        raise RegimeError("the interface threshold needs m+p>2", m=params.m, p=params.p)
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = _ratio(params)
    U0 = ((m + p - 2.0) * (m - p) ** 2
          / (2.0 * (s + 2.0) * (1.0 - p) * (2.0 * s + 4.0 + N * (m - p)))) ** ((m + p - 2.0) / (m - 1.0))
    V0 = (1.0 + N * r / 2.0) * U0 ** ((1.0 - p) / (m + p - 2.0)) + r * r / (4.0 * U0)
    return {'U0': float(U0), 'V0': float(V0)}


# Regions

def region_membership(state: Sequence[float], region: str, params: Params,
                      surface: Optional[Surface] = None, tol: float = 0.0) -> bool:
    """Inequality test for the invariant zones D1, D2, D3 and the exit region
    'large' outside the two planes through P2; every bound is relaxed by tol."""
    X, Y, Z = (float(c) for c in state)
    if region == 'large':
        co = (surface or make_surface(SurfaceId.PI2, params)).coefficients
        return Z > co['A'] * (co['YP'] - Y) - tol and Y < co['C'] * X - co['B'] + tol
    if region not in ('D1', 'D2', 'D3'):
        raise ConfigError("unknown region", region=region)
    if not params.critical:
        raise RegimeError("D1-D3 are defined for m+p=2", m=params.m, p=params.p)
    co = _critical_planes(params)
    r = _ratio(params)

    def within(lo: float, value: float, hi: float) -> bool:
        return lo - tol <= value <= hi + tol

    if not within(0.0, X, co['X_star']):
        return False
    cylinder = -Y * Y - r * Y
    if region == 'D1':
        return within(0.0, Y, 0.5) and within(0.0, Z, -co['c'] * Y + co['d'])
    f = -co['Y_star']
    if region == 'D2':
        return within(co['e'] * X - f, Y, 0.0) and within(cylinder, Z, -co['c'] * Y + co['d'])
    lower = (-r + r * np.sqrt(1.0 - co['e'] * (1.0 - X))) / 2.0
    return within(lower, Y, co['e'] * X - f) and within(cylinder, Z, -co['a'] * X + co['b'])


def region_samples(params: Params, region: str, n: int = 500,
                   seed: int = config.DEFAULT_SEED) -> np.ndarray:
    """Quasi-random points of one invariant zone, shape (3, k)."""
    co = _critical_planes(params)
    r = _ratio(params)
    lo = np.array([0.0, -r, 0.0])
    hi = np.array([co['X_star'], 0.5, max(co['d'], co['b'], r * r / 4.0)])
    unit = qmc.Halton(d=3, scramble=True, seed=seed).random(40 * n)
    pts = lo + unit * (hi - lo)
    inside = [x for x in pts if region_membership(x, region, params)]
    return np.array(inside[:n]).reshape(-1, 3).T


def stays_inside(states: np.ndarray, params: Params,
                 regions: Sequence[str] = ('D2', 'D3'), tol: float = 0.0) -> bool:
    """Once a sample falls in the union of the regions, all later ones do."""
    member = np.array([any(region_membership(x, name, params, tol=tol) for name in regions)
                       for x in states])
    if not member.any():
        return True
    first = int(np.argmax(member))
    return bool(member[first:].all())


def no_return(states: np.ndarray, params: Params) -> bool:
    """After the first sample with Y < -Y0 and X < X(P2), Y keeps decreasing."""
    Y0 = (params.m - 1.0) / 2.0
    XP = dynsys.p2(params)[0]
    below = (states[:, 1] < -Y0) & (states[:, 0] < XP)
    if not below.any():
        return True
    tail = states[int(np.argmax(below)):, 1]
    return bool(np.all(np.diff(tail) <= 0.0))
