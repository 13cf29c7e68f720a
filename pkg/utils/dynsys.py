"""Vector fields of the profile equation in its phase-space charts.

Finite chart (X, Y, Z), shooting chart (U, Y, V) near the interface points,
and the two charts at infinity of the Poincare compactification. Every field
accepts a single state of shape (3,) or a batch of shape (3, n).
"""
import logging
from typing import List, Sequence, Union

import numpy as np

from database.models import (
    Chart, ChartState, CriticalPoint, EigenData, Params, PhaseState, PointTag, Regime,
    UYVState,
)
from utils.errors import ChartError, NonHyperbolic, RegimeError
from utils.params import exponents, shooting_exponent

LOGGER = logging.getLogger(__name__)

StateLike = Union[PhaseState, UYVState, ChartState, Sequence[float], np.ndarray]


def _arr(state: StateLike) -> np.ndarray:
    if hasattr(state, 'as_array'):
        return state.as_array()
    return np.asarray(state, dtype=float)


def _K(params: Params) -> float:
    return params.m * params.N - params.N + 2.0


# Finite chart

def field_finite(state: StateLike, params: Params) -> np.ndarray:
    X, Y, Z = _arr(state)
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = exponents(params).ratio
    return np.array([
        X * ((m - 1.0) * Y - 2.0 * X),
        -Y * Y - r * Y + X - N * X * Y - Z,
        Z * ((m + p - 2.0) * Y + (s - 2.0) * X),
    ])


def jacobian_finite(state: StateLike, params: Params) -> np.ndarray:
    X, Y, Z = _arr(state)
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = exponents(params).ratio
    return np.array([
        [(m - 1.0) * Y - 4.0 * X, (m - 1.0) * X, 0.0],
        [1.0 - N * Y, -2.0 * Y - r - N * X, -1.0],
        [(s - 2.0) * Z, (m + p - 2.0) * Z, (m + p - 2.0) * Y + (s - 2.0) * X],
    ])


# Shooting chart (m+p>2)

def _require_supercritical(params: Params) -> None:
    if params.regime is not Regime.SUPERCRITICAL:
        raise RegimeError("the (U,Y,V) chart needs m+p>2", m=params.m, p=params.p)


def field_uyv(state: StateLike, params: Params) -> np.ndarray:
    _require_supercritical(params)
    U, Y, V = _arr(state)
    m, p, N = params.m, params.p, params.N
    ex = exponents(params)
    r = ex.ratio
    Ue = np.power(np.maximum(U, 0.0), shooting_exponent(params))
    return np.array([
        (m + p - 2.0) / (m - 1.0) * U * ((m - 1.0) * Y - 2.0 * Ue),
        -Y * Y - r * Y + Ue * (1.0 - N * Y) - U * V,
        ex.L / (m - 1.0) * Ue * V,
    ])


def jacobian_uyv(state: StateLike, params: Params) -> np.ndarray:
    _require_supercritical(params)
    U, Y, V = _arr(state)
    m, p, N = params.m, params.p, params.N
    ex = exponents(params)
    r = ex.ratio
    e = shooting_exponent(params)
    U = max(U, 0.0)
    Ue = U ** e
    dUe = e * U ** (e - 1.0)
    c = (m + p - 2.0) / (m - 1.0)
    q = ex.L / (m - 1.0)
    return np.array([
        [c * ((m - 1.0) * Y - 2.0 * (1.0 + e) * Ue), c * (m - 1.0) * U, 0.0],
        [dUe * (1.0 - N * Y) - V, -2.0 * Y - r - N * Ue, -U],
        [q * dUe * V, 0.0, q * Ue],
    ])


def finite_to_uyv(state: StateLike, params: Params) -> np.ndarray:
    X, Y, Z = _arr(state)
    U = np.power(X, 1.0 / shooting_exponent(params))
    return np.array([U, Y, Z / U])


def uyv_to_finite(state: StateLike, params: Params) -> np.ndarray:
    U, Y, V = _arr(state)
    U = np.maximum(U, 0.0)
    return np.array([np.power(U, shooting_exponent(params)), Y, U * V])


# Charts at infinity

def field_infinity(state: ChartState, params: Params) -> np.ndarray:
    a, z, w = state.as_array()
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = exponents(params).ratio
    if state.chart is Chart.INF_X:
        y = a
        return np.array([
            -(N - 2.0) * y + w - m * y * y - r * y * w - z * w,
            s * z - (1.0 - p) * y * z,
            2.0 * w - (m - 1.0) * y * w,
        ])
    if state.chart is Chart.INF_Y:
        x = a
        return np.array([
            -m * x - (N - 2.0) * x * x - r * x * w + x * x * w - x * z * w,
            -(m + p - 1.0) * z - r * z * w - (N + s - 2.0) * x * z - z * z * w + x * z * w,
            -w - r * w * w + x * w * w - N * x * w - z * w * w,
        ])
    raise ChartError("not a chart at infinity", chart=state.chart.value)


def jacobian_infinity(state: ChartState, params: Params) -> np.ndarray:
    a, z, w = state.as_array()
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = exponents(params).ratio
    if state.chart is Chart.INF_X:
        y = a
        return np.array([
            [-(N - 2.0) - 2.0 * m * y - r * w, -w, 1.0 - r * y - z],
            [-(1.0 - p) * z, s - (1.0 - p) * y, 0.0],
            [-(m - 1.0) * w, 0.0, 2.0 - (m - 1.0) * y],
        ])
    if state.chart is Chart.INF_Y:
        x = a
        return np.array([
            [-m - 2.0 * (N - 2.0) * x - r * w + 2.0 * x * w - z * w, -x * w,
             -r * x + x * x - x * z],
            [-(N + s - 2.0) * z + z * w, -(m + p - 1.0) - r * w - (N + s - 2.0) * x - 2.0 * z * w + x * w,
             -r * z - z * z + x * z],
            [w * w - N * w, -w * w, -1.0 - 2.0 * r * w + 2.0 * x * w - N * x - 2.0 * z * w],
        ])
    raise ChartError("not a chart at infinity", chart=state.chart.value)


def field_for(chart: Chart, params: Params):
    """Return f(eta, y) for solve_ivp in the given chart."""
    if chart is Chart.FINITE:
        return lambda eta, y: field_finite(y, params)
    if chart is Chart.UYV:
        _require_supercritical(params)
        return lambda eta, y: field_uyv(y, params)
    return lambda eta, y: field_infinity(ChartState(chart, tuple(y)), params)


def jacobian_for(chart: Chart, params: Params):
    if chart is Chart.FINITE:
        return lambda y: jacobian_finite(y, params)
    if chart is Chart.UYV:
        return lambda y: jacobian_uyv(y, params)
    return lambda y: jacobian_infinity(ChartState(chart, tuple(y)), params)


# Critical points

def p1(params: Params) -> np.ndarray:
    return np.array([0.0, -exponents(params).ratio, 0.0])


def p2(params: Params) -> np.ndarray:
    alpha = exponents(params).alpha
    K = _K(params)
    return np.array([(params.m - 1.0) / (2.0 * alpha * K), 1.0 / (alpha * K), 0.0])


def parabola_point(params: Params, lam: float) -> np.ndarray:
    if not params.critical:
        raise RegimeError("the critical parabola exists only for m+p=2", m=params.m, p=params.p)
    r = exponents(params).ratio
    slack = 1e-12 * (1.0 + r)
    if not -r - slack <= lam <= slack:
        raise RegimeError("lambda outside [-beta/alpha, 0]", lam=lam)
    return np.array([0.0, lam, -lam * lam - r * lam])


def parabola_points(params: Params, n: int) -> List[CriticalPoint]:
    """Sample the critical parabola at n evenly spaced lambda."""
    r = exponents(params).ratio
    return [
        CriticalPoint(PointTag.PARABOLA, Chart.FINITE, tuple(parabola_point(params, lam)),
                      parameter=float(lam))
        for lam in np.linspace(-r, 0.0, n)
    ]


def critical_points(params: Params) -> List[CriticalPoint]:
    m, N = params.m, params.N
    r = exponents(params).ratio
    points = [CriticalPoint(PointTag.P0, Chart.FINITE, (0.0, 0.0, 0.0))]
    if params.critical:
        peak = -r / 2.0
        points.append(CriticalPoint(PointTag.PARABOLA, Chart.FINITE,
                                    tuple(parabola_point(params, peak)), parameter=peak))
    else:
        points.append(CriticalPoint(PointTag.P1, Chart.FINITE, tuple(p1(params))))
    points.append(CriticalPoint(PointTag.P2, Chart.FINITE, tuple(p2(params))))

    merged = params.saddle_node
    q5_norm = np.hypot(N - 2.0, m)
    points.extend([
        CriticalPoint(PointTag.Q1, Chart.INF_X, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0),
                      saddle_node=merged),
        CriticalPoint(PointTag.Q2, Chart.INF_Y, (0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), parameter=1.0),
        CriticalPoint(PointTag.Q3, Chart.INF_Y, (0.0, 0.0, 0.0), (0.0, -1.0, 0.0, 0.0), parameter=-1.0),
        CriticalPoint(PointTag.Q4, Chart.FINITE, (0.0, 0.0, float('inf')), (0.0, 0.0, 1.0, 0.0)),
        CriticalPoint(PointTag.Q5, Chart.INF_X, (-(N - 2.0) / m, 0.0, 0.0),
                      (m / q5_norm, -(N - 2.0) / q5_norm, 0.0, 0.0), saddle_node=merged),
    ])
    return points


def pv0_point(params: Params, v0: float) -> CriticalPoint:
    _require_supercritical(params)
    return CriticalPoint(PointTag.PV0, Chart.UYV, (0.0, -exponents(params).ratio, v0), parameter=v0)


# Closed forms at P2

def d_sigma(params: Params) -> float:
    """Polynomial D(sigma), negative throughout the admissible range."""
    m, p, s, N = params.m, params.p, params.sigma, params.N
    return (-(m - 1.0) ** 2 * s * s
            - (m - 1.0) * ((m - 1.0) * N + 2.0 * (m + 2.0 * p - 1.0)) * s
            - 8.0 * (m - 1.0) ** 2 * N - 8.0 * (p * (m + p - 2.0) + m - 1.0))


def e3_vector(params: Params) -> np.ndarray:
    """Unstable eigenvector at P2, normalized to unit Z-component."""
    m, p, s, N = params.m, params.p, params.sigma, params.N
    ex = exponents(params)
    K = _K(params)
    S = (m - 1.0) * s + 2.0 * (m + p - 2.0)
    denom = (2.0 * (K * ex.alpha - N) * (m - 1.0) ** 2
             - (2.0 * ex.beta * K + N * (m - 1.0) + 4.0 + ex.L) * S)
    return np.array([2.0 * K * ex.alpha * (m - 1.0) ** 2 / denom,
                     2.0 * K * ex.alpha * S / denom,
                     1.0])


def p2_spectrum(params: Params) -> dict:
    m, N = params.m, params.N
    ex = exponents(params)
    K = _K(params)
    return {
        'sum': -((N + 2.0) * (m - 1.0) + 2.0 * K * ex.beta + 4.0) / (2.0 * K * ex.alpha),
        'product': (m - 1.0) / (2.0 * K * ex.alpha ** 2),
        'lambda3': ex.L / (2.0 * K * ex.alpha),
    }


def _closed_spectrum(point: CriticalPoint, params: Params) -> np.ndarray:
    m, p, s, N = params.m, params.p, params.sigma, params.N
    r = exponents(params).ratio
    tag = point.tag
    if tag is PointTag.P1:
        return np.array([-(m - 1.0) * r, r, -(m + p - 2.0) * r])
    if tag is PointTag.PARABOLA:
        lam = point.parameter
        return np.array([(m - 1.0) * lam, -2.0 * lam - r, 0.0])
    if tag is PointTag.PV0:
        return np.array([-(m + p - 2.0) * r, r, 0.0])
    if tag is PointTag.Q1:
        return np.array([2.0 - N, s, 2.0])
    if tag is PointTag.Q5:
        return np.array([N - 2.0, s + (1.0 - p) * (N - 2.0) / m, 2.0 + (m - 1.0) * (N - 2.0) / m])
    if tag in (PointTag.Q2, PointTag.Q3):
        return np.array([-m, -(m + p - 1.0), -1.0])
    return np.array([])


def _spectrum_residual(numeric: np.ndarray, closed: np.ndarray) -> float:
    a = np.sort_complex(numeric.astype(complex))
    b = np.sort_complex(closed.astype(complex))
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b)) / scale)


def eigen(point: CriticalPoint, params: Params) -> EigenData:
    """Linearization at a critical point, cross-checked against closed forms.

    Raises:
        NonHyperbolic: at P0 and Q4, where invariant-manifold seeding replaces
            the eigen-decomposition.
    """
    if point.tag is PointTag.P0:
        raise NonHyperbolic("P0 is not hyperbolic; seed from the local profile behavior",
                            point=point.tag.value)
    if point.tag is PointTag.Q4:
        raise NonHyperbolic("Q4 carries no linear analysis", point=point.tag.value)

    J = jacobian_for(point.chart, params)(point.as_array())
    values, vectors = np.linalg.eig(J)
    extras = {}

    if point.tag is PointTag.P2:
        closed = p2_spectrum(params)
        i3 = int(np.argmax(values.real))
        rest = np.delete(values, i3)
        e3 = e3_vector(params)
        lam3 = values[i3].real
        extras.update(closed)
        extras['D'] = d_sigma(params)
        extras['e3'] = e3
        extras['sum_residual'] = abs(rest.sum().real - closed['sum']) / abs(closed['sum'])
        extras['product_residual'] = abs(np.prod(rest).real - closed['product']) / abs(closed['product'])
        extras['lambda3_residual'] = abs(lam3 - closed['lambda3']) / abs(closed['lambda3'])
        extras['e3_residual'] = float(np.linalg.norm(J @ e3 - closed['lambda3'] * e3)
                                      / (abs(closed['lambda3']) * np.linalg.norm(e3)))
    else:
        closed = _closed_spectrum(point, params)
        extras['closed'] = closed
        extras['closed_residual'] = _spectrum_residual(values, closed)
        if point.tag is PointTag.PARABOLA:
            extras.update(l1=closed[0], l2=closed[1], l3=closed[2])
        if point.tag in (PointTag.Q1, PointTag.Q5):
            extras['saddle_node'] = params.saddle_node

    LOGGER.debug("eigen at %s: %s", point.tag.value, values)
    return EigenData(eigenvalues=values, eigenvectors=vectors, extras=extras)


def stable_direction(params: Params, lam: float) -> np.ndarray:
    """Eigenvector of l1=(m-1)lambda at a parabola point, oriented into X>0."""
    J = jacobian_finite(parabola_point(params, lam), params)
    values, vectors = np.linalg.eig(J)
    i = int(np.argmin(np.abs(values - (params.m - 1.0) * lam)))
    v = vectors[:, i].real
    if abs(v[0]) < 1e-14:
        return v / np.linalg.norm(v)
    return v / v[0]
