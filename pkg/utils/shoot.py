"""Orbit launching, fate classification and the sigma/v0 searches."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

import config
from database.models import (
    Chart, EventKind, FateTag, OrbitFate, Params, Regime, ShotSource, ShotSpec, Trajectory,
)
from utils import dynsys
from utils.errors import BracketError, ChartError, RegimeError, SeedError, StepUnderflow, Unclassifiable
from utils.integrate import EventSpec, capture, divergence, integrate, parabola_capture
from utils.params import exponents, validate

LOGGER = logging.getLogger(__name__)

GOOD_LIMITS = {FateTag.ENTERS_P0, FateTag.ENTERS_P2, FateTag.ENTERS_Q1}


# Seeds

def state_from_profile(xi: float, f: float, dfm: float, params: Params) -> np.ndarray:
    """Phase state of a profile sample, given f and (f^m)' at xi."""
    m, p, s = params.m, params.p, params.sigma
    alpha = exponents(params).alpha
    return np.array([
        m / alpha * xi ** -2.0 * f ** (m - 1.0),
        dfm / (alpha * xi * f),
        m / alpha ** 2 * xi ** (s - 2.0) * f ** (m + p - 2.0),
    ])


def _seed_p2(spec: ShotSpec, params: Params) -> np.ndarray:
    e3 = dynsys.e3_vector(params)
    return dynsys.p2(params) + spec.eps * e3 / np.linalg.norm(e3)


def _seed_p0(spec: ShotSpec, params: Params) -> np.ndarray:
    m, p, s = params.m, params.p, params.sigma
    gamma = (s + 2.0) / (m - p)
    xi = spec.xi_seed
    if params.critical:
        alpha = exponents(params).alpha
        Z = m / alpha ** 2 * xi ** (s - 2.0)
        X = spec.K * np.sqrt(Z) - (m - 1.0) * alpha * Z
        if X <= 0:
            raise SeedError("xi_seed too large for the P0 family seed", xi_seed=xi, K=spec.K)
        return np.array([X, gamma * X, Z])
    # X = (m/alpha) K^(m-1) xi^a along the family, Z/X^2 fixed by K alone
    alpha = exponents(params).alpha
    a = (m - 1.0) * gamma - 2.0
    scale = m / alpha * spec.K ** (m - 1.0)
    if scale * xi ** a < config.P0_SEED_X:
        xi = (config.P0_SEED_X / scale) ** (1.0 / a)
        LOGGER.debug("P0 seed moved out to xi=%.6g", xi)
    f = spec.K * xi ** gamma
    dfm = m * gamma * spec.K ** m * xi ** (m * gamma - 1.0)
    return state_from_profile(xi, f, dfm, params)


def _seed_q1(spec: ShotSpec, params: Params) -> np.ndarray:
    m, N = params.m, params.N
    a = exponents(params).alpha * (m - 1.0) / (2.0 * m * N)
    xi = spec.xi_seed
    base = spec.C + a * xi * xi
    f = base ** (1.0 / (m - 1.0))
    dfm = m / (m - 1.0) * f * 2.0 * a * xi
    return state_from_profile(xi, f, dfm, params)


def _seed_q5(spec: ShotSpec, params: Params) -> np.ndarray:
    m, N = params.m, params.N
    xi, D = spec.xi_seed, spec.D
    if N == 2:
        if xi >= 1.0:
            raise SeedError("logarithmic seed needs xi_seed < 1", xi_seed=xi)
        f = D * (-np.log(xi)) ** (1.0 / m)
        dfm = -D ** m / xi
    else:
        f = D * xi ** (-(N - 2.0) / m)
        dfm = -(N - 2.0) * D ** m * xi ** (1.0 - N)
    return state_from_profile(xi, f, dfm, params)


def _seed_interface(spec: ShotSpec, params: Params) -> Tuple[np.ndarray, Chart]:
    r = exponents(params).ratio
    if params.regime is Regime.SUPERCRITICAL:
        if spec.v0 is None:
            raise SeedError("backward shot needs v0")
        m, p = params.m, params.p
        slope = spec.v0 / (r * (m + p - 1.0))
        return np.array([spec.eps, -r + spec.eps * slope, spec.v0]), Chart.UYV
    if params.critical:
        lam = spec.lam
        if lam is None or not -r / 2.0 < lam < 0.0:
            raise SeedError("parabola seed needs lambda in (-beta/2alpha, 0)", lam=lam)
        v = dynsys.stable_direction(params, lam)
        if v[0] <= 0:
            raise SeedError("no stable direction into X>0", lam=lam)
        return dynsys.parabola_point(params, lam) + spec.eps * v / np.linalg.norm(v), Chart.FINITE
    raise RegimeError("backward shots need m+p>=2", m=params.m, p=params.p)


def _events(params: Params, backward: bool) -> List[EventSpec]:
    events = divergence()
    if params.critical:
        events.append(parabola_capture(exponents(params).ratio))
    else:
        events.append(capture('P0', (0.0, 0.0, 0.0)))
        if not backward:
            events.append(capture('P1', dynsys.p1(params)))
    if backward:
        events.append(capture('P2', dynsys.p2(params)))
    return events


def launch(spec: ShotSpec, params: Params, rtol: float = config.RTOL,
           atol: float = config.ATOL, max_eta: float = config.MAX_ETA) -> Trajectory:
    """Start an orbit near its source point and integrate to a terminal event."""
    source = spec.source
    chart, direction, to_finite = Chart.FINITE, 1, None
    if source is ShotSource.FROM_P2:
        y0 = _seed_p2(spec, params)
    elif source is ShotSource.FROM_P0:
        y0 = _seed_p0(spec, params)
    elif source is ShotSource.FROM_Q1:
        y0 = _seed_q1(spec, params)
    elif source is ShotSource.FROM_Q5:
        y0 = _seed_q5(spec, params)
    else:
        y0, chart = _seed_interface(spec, params)
        direction = -1
        if chart is Chart.UYV:
            to_finite = lambda y: dynsys.uyv_to_finite(y, params)

    LOGGER.debug("launch %s at %s from %s", source.value, params, y0)
    trajectory = integrate(dynsys.field_for(chart, params), y0, chart=chart, direction=direction,
                           events=_events(params, direction < 0), rtol=rtol, atol=atol,
                           max_eta=max_eta, to_finite=to_finite)
    trajectory.spec = spec
    return trajectory


# Classification

def finite_states(trajectory: Trajectory, params: Params) -> np.ndarray:
    if trajectory.chart is Chart.UYV:
        return dynsys.uyv_to_finite(trajectory.states.T, params).T
    if trajectory.chart is not Chart.FINITE:
        raise ChartError("classification works on finite or shooting charts",
                         chart=trajectory.chart.value)
    return trajectory.states


def interface_from_capture(params: Params, lam: float) -> float:
    """Interface radius of a profile whose orbit ends at the parabola point lambda."""
    ex = exponents(params)
    Z = -lam * lam - ex.ratio * lam
    return (ex.alpha ** 2 * Z / params.m) ** (1.0 / (params.sigma - 2.0))


def _slaved_y(X: float, Z: float, params: Params) -> float:
    """Right root of Y^2 + (r + N X) Y + Z - X = 0, the slow branch through the parabola."""
    b = exponents(params).ratio + params.N * X
    return 0.5 * (-b + np.sqrt(max(b * b - 4.0 * (Z - X), 0.0)))


def parabola_limit(state: Sequence[float], params: Params) -> Optional[float]:
    """Parabola point lambda reached by following the slow flow from state to X = 0.

    Along the slow branch Z obeys dZ/dX = (sigma-2) Z / ((m-1) Y - 2X), so Z
    is carried to X = 0 and lambda is the right root of lambda^2 + r lambda + Z = 0.
    Returns None when X is not decreasing at state.
    """
    X, _, Z = (float(c) for c in state)
    if Z < 0:
        return None
    m, s = params.m, params.sigma
    r = exponents(params).ratio

    def slope(x: float, z: np.ndarray) -> np.ndarray:
        return (s - 2.0) * z / ((m - 1.0) * _slaved_y(x, z[0], params) - 2.0 * x)

    if X > 0:
        if (m - 1.0) * _slaved_y(X, Z, params) - 2.0 * X >= 0:
            return None
        result = solve_ivp(slope, (X, 0.0), [Z], rtol=1e-10, atol=1e-16)
        if result.status != 0:
            return None
        Z = float(result.y[0, -1])
    disc = r * r - 4.0 * Z
    if disc <= 0:
        return -r / 2.0
    return 0.5 * (-r + np.sqrt(disc))


def _parabola_fate(state: np.ndarray, params: Params, evidence: Dict[str, Any],
                   in_ball: bool) -> Optional[OrbitFate]:
    r = exponents(params).ratio
    Y = float(state[1])
    if in_ball and -r <= Y < 0.0:
        lam: Optional[float] = Y
    else:
        lam = parabola_limit(state, params)
        evidence['extrapolated'] = True
    if lam is None:
        return None
    if lam > -config.LAMBDA_RESOLUTION:
        evidence['parabola_endpoint'] = True
        return OrbitFate(FateTag.ENTERS_P0, None, evidence)
    evidence['xi0'] = interface_from_capture(params, lam)
    return OrbitFate(FateTag.ENTERS_PARABOLA, float(lam), evidence)


def _targets(params: Params) -> Dict[FateTag, Callable[[np.ndarray], np.ndarray]]:
    if params.critical:
        r = exponents(params).ratio

        def to_parabola(x: np.ndarray) -> np.ndarray:
            lam = np.clip(x[:, 1], -r, 0.0)
            return np.sqrt(x[:, 0] ** 2 + (x[:, 1] - lam) ** 2 + (x[:, 2] + lam * lam + r * lam) ** 2)

        return {FateTag.ENTERS_PARABOLA: to_parabola}
    P1 = dynsys.p1(params)
    return {
        FateTag.ENTERS_P0: lambda x: np.linalg.norm(x, axis=1),
        FateTag.ENTERS_P1: lambda x: np.linalg.norm(x - P1, axis=1),
    }


def _slow_capture(states: np.ndarray, params: Params) -> Optional[OrbitFate]:
    """Capture along a center direction: the distance shrinks monotonically
    over the final tenth of the samples and ends inside the enlarged ball."""
    tail = max(3, len(states) // 10)
    radius = config.CAPTURE_RADIUS * config.SLOW_CAPTURE_FACTOR
    for tag, distance in _targets(params).items():
        d = distance(states[-tail:])
        if d[-1] < radius and np.all(np.diff(d) <= 0):
            evidence = {'event': EventKind.MAX_ETA.value, 'distance': float(d[-1]), 'slow': True}
            if tag is FateTag.ENTERS_PARABOLA:
                return _parabola_fate(states[-1], params, evidence, in_ball=False)
            return OrbitFate(tag, None, evidence)
    return None


def classify(trajectory: Trajectory, params: Params) -> OrbitFate:
    """Read the fate of an orbit from its terminal event.

    For backward shots the tag names the alpha-limit.
    """
    event = trajectory.terminal
    if event is None or event.kind is EventKind.STEP_UNDERFLOW:
        return _undecided("no terminal event", trajectory)

    states = finite_states(trajectory, params)
    final = states[-1]
    evidence: Dict[str, Any] = {'event': event.kind.value, 'label': event.label,
                                'eta': event.eta}

    if event.kind is EventKind.CAPTURE:
        if len(trajectory) == 1:
            return _undecided("orbit pinned at its source", trajectory)
        evidence['distance'] = float(event.value)
        if event.label == 'P0^lambda':
            fate = _parabola_fate(final, params, evidence, in_ball=True)
            if fate is None:
                return _undecided("parabola capture with X not decreasing", trajectory)
            return fate
        return OrbitFate(FateTag('Enters' + event.label), None, evidence)

    if event.kind is EventKind.DIVERGE:
        X, Y, Z = final
        if event.label == 'Z':
            raise ChartError("orbit approaches Q4", state=str(tuple(final)))
        if event.label == 'Y':
            ratio = float(Z / (Y * Y))
            evidence['Z_over_Y2'] = ratio
            if ratio > config.Z_OVER_Y2_MAX:
                return _undecided("Z/Y^2 unbounded as |Y| diverges", trajectory)
            return OrbitFate(FateTag.ENTERS_Q3 if Y < 0 else FateTag.ENTERS_Q2, None, evidence)
        evidence['Y'] = float(Y)
        return OrbitFate(FateTag.ENTERS_Q5 if Y < 0 else FateTag.ENTERS_Q1, None, evidence)

    fate = _slow_capture(states, params)
    if fate is not None:
        return fate
    return _undecided("max eta reached without capture", trajectory)


def _undecided(reason: str, trajectory: Trajectory) -> OrbitFate:
    LOGGER.warning("undecided orbit: %s", reason)
    final = trajectory.states[-1]
    return OrbitFate(FateTag.UNDECIDED, None, {'reason': reason,
                                               'final': [float(c) for c in final],
                                               'samples': len(trajectory)})


def fate_of(spec: ShotSpec, params: Params, **kwargs) -> OrbitFate:
    try:
        return classify(launch(spec, params, **kwargs), params)
    except StepUnderflow as e:
        LOGGER.warning("step underflow at %s: %s", params, e.message)
        return OrbitFate(FateTag.UNDECIDED, None, {'reason': 'step underflow', **e.to_dict()})


# Searches

def _map(fn: Callable, items: Sequence, workers: Optional[int]) -> List:
    workers = workers or config.WORKERS
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def _side(fate: OrbitFate, params: Params) -> Optional[int]:
    """-1 below the critical exponent, +1 above, 0 at it, None otherwise."""
    if fate.tag is FateTag.ENTERS_P0:
        return -1
    if fate.tag is FateTag.ENTERS_P1:
        return 0
    if fate.tag is FateTag.ENTERS_Q3:
        return 1
    if fate.tag is FateTag.ENTERS_PARABOLA:
        peak = -exponents(params).ratio / 2.0
        if abs(fate.lam - peak) <= config.LAMBDA_RESOLUTION:
            return 0
        return -1
    return None


@dataclass
class SigmaSearch:
    sigma_star: float
    bracket: Tuple[float, float]
    fate: OrbitFate
    history: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'sigma_star': self.sigma_star, 'bracket': list(self.bracket),
                'fate': self.fate.to_dict(), 'history': self.history}


def find_sigma_star(m: float, p: float, N: int, bracket: Tuple[float, float],
                    spec: Optional[ShotSpec] = None, tol: float = config.SIGMA_TOL,
                    **kwargs) -> SigmaSearch:
    """Bisect sigma on the fate boundary of the orbit from P2.

    Raises:
        BracketError: the endpoint fates do not straddle the boundary.
        Unclassifiable: an undecided orbit inside the bracket.
    """
    spec = spec or ShotSpec(ShotSource.FROM_P2, eps=config.SEED_EPS)
    lo, hi = sorted(bracket)

    def side_at(sigma: float) -> Tuple[Optional[int], OrbitFate, Params]:
        params = validate(m, p, sigma, N)
        fate = fate_of(spec, params, **kwargs)
        return _side(fate, params), fate, params

    s_lo, f_lo, _ = side_at(lo)
    s_hi, f_hi, _ = side_at(hi)
    history = [{'sigma': lo, 'fate': f_lo.label}, {'sigma': hi, 'fate': f_hi.label}]
    if s_lo == 0:
        return SigmaSearch(lo, (lo, hi), f_lo, history)
    if s_hi == 0:
        return SigmaSearch(hi, (lo, hi), f_hi, history)
    if s_lo != -1 or s_hi != 1:
        raise BracketError("endpoint fates do not straddle the critical exponent",
                           low=f_lo.label, high=f_hi.label)

    fate = f_lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        side, fate, _ = side_at(mid)
        history.append({'sigma': mid, 'fate': fate.label})
        LOGGER.debug("bisection sigma=%.8f fate=%s", mid, fate.label)
        if side is None:
            raise Unclassifiable("undecided fate inside the bracket", sigma=mid, fate=fate.label)
        if side == 0:
            lo = hi = mid
            break
        if side < 0:
            lo = mid
        else:
            hi = mid
    sigma_star = 0.5 * (lo + hi)
    LOGGER.info("sigma* = %.6f for m=%g p=%g N=%d", sigma_star, m, p, N)
    return SigmaSearch(sigma_star, (lo, hi), fate, history)


def sweep_sigma(m: float, p: float, N: int, sigmas: Iterable[float],
                spec: Optional[ShotSpec] = None, workers: Optional[int] = None,
                **kwargs) -> pd.DataFrame:
    """Fate of one shot across a sigma grid, rows in grid order."""
    spec = spec or ShotSpec(ShotSource.FROM_P2, eps=config.SEED_EPS)
    sigmas = [float(s) for s in sigmas]

    def row(sigma: float) -> Dict[str, Any]:
        params = validate(m, p, sigma, N)
        fate = fate_of(spec, params, **kwargs)
        xi0 = fate.evidence.get('xi0')
        return {'sigma': sigma, 'fate': fate.tag.value, 'lam': fate.lam, 'xi0': xi0}

    return pd.DataFrame(_map(row, sigmas, workers), columns=['sigma', 'fate', 'lam', 'xi0'])


def fate_flips(table: pd.DataFrame) -> List[Dict[str, Any]]:
    """Every adjacent pair of grid points whose fates differ."""
    flips = []
    fates = table['fate'].tolist()
    sigmas = table['sigma'].tolist()
    for i in range(len(fates) - 1):
        if fates[i] != fates[i + 1]:
            flips.append({'sigma_lo': sigmas[i], 'sigma_hi': sigmas[i + 1],
                          'fate_lo': fates[i], 'fate_hi': fates[i + 1]})
    return flips


def empirical_thresholds(table: pd.DataFrame) -> Dict[str, Optional[float]]:
    """Empirical sigma0 (last grid point before the first flip) and sigma1
    (first grid point after the last flip)."""
    flips = fate_flips(table)
    if not flips:
        return {'sigma0': None, 'sigma1': None}
    return {'sigma0': flips[0]['sigma_lo'], 'sigma1': flips[-1]['sigma_hi']}


def lambda_of_sigma(m: float, p: float, N: int, sigmas: Iterable[float],
                    eps: float = config.SEED_EPS, workers: Optional[int] = None,
                    **kwargs) -> pd.DataFrame:
    """Parabola capture point of the orbit from P2 across sigma (m+p=2 only)."""
    sigmas = sorted(float(s) for s in sigmas)
    if sigmas:
        params = validate(m, p, sigmas[0], N)
        if not params.critical:
            raise RegimeError("lambda(sigma) is defined only for m+p=2", m=m, p=p)
    table = sweep_sigma(m, p, N, sigmas, ShotSpec(ShotSource.FROM_P2, eps=eps), workers, **kwargs)
    return table


def lambda_trend(table: pd.DataFrame) -> Dict[str, Any]:
    """Monotonicity of lambda as sigma decreases toward 2."""
    captured = table[table['fate'] == FateTag.ENTERS_PARABOLA.value].sort_values('sigma')
    lams = captured['lam'].to_numpy(dtype=float)
    if len(lams) < 2:
        return {'points': int(len(lams)), 'increasing_toward_zero': None}
    # ascending sigma: lambda should decrease, i.e. grow toward 0 as sigma -> 2
    steps = np.diff(lams)
    return {
        'points': int(len(lams)),
        'increasing_toward_zero': bool(np.all(steps < 0)),
        'max_lambda': float(lams.max()),
        'min_lambda': float(lams.min()),
    }


def _alpha_side(fate: OrbitFate) -> str:
    if fate.tag in GOOD_LIMITS:
        return 'Good'
    if fate.tag is FateTag.ENTERS_Q5:
        return 'Q5-side'
    if fate.tag is FateTag.ENTERS_Q2:
        return 'Q2-side'
    return fate.tag.value


def interface_sweep(params: Params, v0_grid: Iterable[float], eps: float = config.SEED_EPS,
                    workers: Optional[int] = None, **kwargs) -> pd.DataFrame:
    """Backward orbits from the interface points P(v0), classified by alpha-limit."""
    if params.regime is not Regime.SUPERCRITICAL:
        raise RegimeError("interface sweep needs m+p>2", m=params.m, p=params.p)
    grid = [float(v) for v in v0_grid]

    def row(v0: float) -> Dict[str, Any]:
        fate = fate_of(ShotSpec(ShotSource.BACKWARD_FROM_INTERFACE, eps=eps, v0=v0), params, **kwargs)
        return {'v0': v0, 'alpha_limit': fate.tag.value, 'side': _alpha_side(fate)}

    return pd.DataFrame(_map(row, grid, workers), columns=['v0', 'alpha_limit', 'side'])


def good_boundary(table: pd.DataFrame) -> List[Tuple[float, float]]:
    """Brackets (v0_lo, v0_hi) where the Good set starts or ends."""
    ordered = table.sort_values('v0')
    good = (ordered['side'] == 'Good').to_numpy()
    v0 = ordered['v0'].to_numpy(dtype=float)
    return [(float(v0[i]), float(v0[i + 1])) for i in range(len(v0) - 1) if good[i] != good[i + 1]]
