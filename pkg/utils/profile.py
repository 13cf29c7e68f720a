"""Profiles f(xi) rebuilt from phase-space orbits, with local fits and residuals."""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from database.models import (
    BlowupPattern, Chart, FateTag, InterfaceFit, InterfaceType, OriginClass, Params, Profile,
    ShotSource, Trajectory,
)
from utils import dynsys
from utils.errors import DegenerateSample, GridOutsideSupport, NoInterface
from utils.params import exponents

LOGGER = logging.getLogger(__name__)

DEFAULT_SAMPLES = 20_000
RESIDUAL_FLOOR = 1e-6
PROPORTIONALITY = 10.0

_SOURCE_CLASS = {
    ShotSource.FROM_P0: OriginClass.P0_TYPE,
    ShotSource.FROM_P2: OriginClass.P2_TYPE,
    ShotSource.FROM_Q1: OriginClass.Q1_TYPE,
    ShotSource.FROM_Q5: OriginClass.ASYMPTOTE_TYPE,
}
_LIMIT_CLASS = {
    FateTag.ENTERS_P0: OriginClass.P0_TYPE,
    FateTag.ENTERS_P2: OriginClass.P2_TYPE,
    FateTag.ENTERS_Q1: OriginClass.Q1_TYPE,
    FateTag.ENTERS_Q5: OriginClass.ASYMPTOTE_TYPE,
}


# Reconstruction

def _finite(states: np.ndarray, chart: Chart, params: Params) -> np.ndarray:
    if chart is Chart.UYV:
        return dynsys.uyv_to_finite(states.T, params).T
    return states


def _invert(states: np.ndarray, params: Params):
    """ln xi and ln f from X and Z; the linear map has determinant -L."""
    m, p, s = params.m, params.p, params.sigma
    alpha = exponents(params).alpha
    a = np.log(states[:, 0]) - np.log(m / alpha)
    b = np.log(states[:, 2]) - np.log(m / alpha ** 2)
    det = -2.0 * (m + p - 2.0) - (m - 1.0) * (s - 2.0)
    log_xi = ((m + p - 2.0) * a - (m - 1.0) * b) / det
    log_f = (-2.0 * b - (s - 2.0) * a) / det
    return log_xi, log_f


def _positive_mask(states: np.ndarray) -> np.ndarray:
    """Samples off X=0 and Z=0; only the endpoints may sit on them."""
    good = (states[:, 0] > 0) & (states[:, 2] > 0)
    bad = np.nonzero(~good)[0]
    interior = bad[(bad > 0) & (bad < len(states) - 1)]
    if len(interior):
        raise DegenerateSample("interior sample with X <= 0 or Z <= 0", index=int(interior[0]))
    return good


def _resample(trajectory: Trajectory, params: Params, n_samples: int) -> np.ndarray:
    """Dense-output states spread evenly along the (ln xi, ln f) curve."""
    eta0, eta1 = trajectory.eta[0], trajectory.eta[-1]
    span = eta1 - eta0
    fine = np.unique(np.concatenate([
        np.linspace(eta0, eta1, 4 * n_samples),
        eta0 + span * np.geomspace(1e-9, 1.0, n_samples),
    ]))
    if span < 0:
        fine = fine[::-1]
    states = _finite(trajectory.sol(fine).T, trajectory.chart, params)
    good = _positive_mask(states)
    fine, states = fine[good], states[good]
    log_xi, log_f = _invert(states, params)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(log_xi), np.diff(log_f)))])
    arc += np.arange(len(arc)) * 1e-15 * max(arc[-1], 1.0)
    targets = np.interp(np.linspace(0.0, arc[-1], n_samples), arc, fine)
    return _finite(trajectory.sol(targets).T, trajectory.chart, params)


def _origin_class(trajectory: Trajectory, params: Params) -> OriginClass:
    spec = trajectory.spec
    if spec is None:
        return OriginClass.UNKNOWN
    if spec.source is not ShotSource.BACKWARD_FROM_INTERFACE:
        return _SOURCE_CLASS[spec.source]
    from utils.shoot import classify
    return _LIMIT_CLASS.get(classify(trajectory, params).tag, OriginClass.UNKNOWN)


def reconstruct(trajectory: Trajectory, params: Params,
                n_samples: int = DEFAULT_SAMPLES) -> Profile:
    """Invert the change of variables along an orbit.

    With dense output available the orbit is resampled so that the points
    are evenly spread in (ln xi, ln f); otherwise the raw samples are used.

    Raises:
        DegenerateSample: an interior sample has X <= 0 or Z <= 0.
    """
    if trajectory.sol is not None and len(trajectory) > 1:
        states = _resample(trajectory, params, n_samples)
    else:
        states = _finite(np.asarray(trajectory.states, dtype=float), trajectory.chart, params)
    states = states[_positive_mask(states)]

    log_xi, log_f = _invert(states, params)
    xi, f = np.exp(log_xi), np.exp(log_f)
    dfm = exponents(params).alpha * xi * f * states[:, 1]

    order = np.argsort(xi)
    xi, f, dfm = xi[order], f[order], dfm[order]
    keep = np.concatenate([[True], np.diff(xi) > 0])
    xi, f, dfm = xi[keep], f[keep], dfm[keep]

    profile = Profile(xi=xi, f=f, dfm=dfm, params=params,
                      origin_class=_origin_class(trajectory, params))
    profile.diagnostics['samples'] = len(xi)
    profile.diagnostics['y_consistency'] = _y_consistency(profile)
    if len(xi) >= 30:
        profile.diagnostics['origin'] = fit_origin(profile)
    LOGGER.info("profile with %d samples on [%.6g, %.6g], origin %s", len(xi), xi[0], xi[-1],
                profile.origin_class.value)
    return profile


def _y_consistency(profile: Profile) -> float:
    """Largest gap between the phase-variable and finite-difference (f^m)'."""
    if len(profile.xi) < 5:
        return 0.0
    fm = profile.f ** profile.params.m
    fd = np.gradient(fm, profile.xi)
    inner = slice(2, -2)
    scale = np.max(np.abs(profile.dfm[inner])) or 1.0
    return float(np.max(np.abs(fd[inner] - profile.dfm[inner])) / scale)


# Local fits

def _dfm(profile: Profile) -> np.ndarray:
    if profile.dfm is not None:
        return profile.dfm
    return np.gradient(profile.f ** profile.params.m, profile.xi)


def fit_origin(profile: Profile, decade: float = 2.0) -> Dict[str, Any]:
    """Power law f ~ K xi^gamma on [xi_0, decade * xi_0]."""
    xi, f = profile.xi, profile.f
    window = xi <= xi[0] * decade
    if window.sum() < 3:
        window = np.arange(len(xi)) < 3
    slope, intercept = np.polyfit(np.log(xi[window]), np.log(f[window]), 1)
    params = profile.params
    fit: Dict[str, Any] = {'exponent': float(slope), 'constant': float(np.exp(intercept)),
                           'window': [float(xi[window][0]), float(xi[window][-1])]}
    if profile.origin_class is OriginClass.P2_TYPE:
        m, N = params.m, params.N
        fit['expected_constant'] = ((m - 1.0) / (2.0 * m * (m * N - N + 2.0))) ** (1.0 / (m - 1.0))
    elif profile.origin_class is OriginClass.ASYMPTOTE_TYPE:
        m, N = params.m, params.N
        if N == 2:
            scaled = f[window] ** m / -np.log(xi[window])
        else:
            scaled = f[window] * xi[window] ** ((N - 2.0) / m)
        fit['asymptote_constant'] = float(np.mean(scaled))
        fit['asymptote_spread'] = float(np.ptp(scaled) / np.mean(scaled))
    return fit


def expected_origin_exponent(origin: OriginClass, params: Params) -> Optional[float]:
    if origin is OriginClass.P0_TYPE:
        return (params.sigma + 2.0) / (params.m - params.p)
    if origin is OriginClass.P2_TYPE:
        return 2.0 / (params.m - 1.0)
    if origin is OriginClass.Q1_TYPE:
        return 0.0
    return None


def fit_interface(profile: Profile) -> InterfaceFit:
    """Locate the interface and its contact exponent.

    Near xi0 with f ~ A(xi0 - xi)^theta the ratio q = f/f' is linear,
    q ~ (xi - xi0)/theta, so a straight line through q on the last decade of
    f gives both theta and xi0.

    Raises:
        NoInterface: f does not decay toward zero at the end of the samples.
    """
    params = profile.params
    xi, f = profile.xi, profile.f
    dfm = _dfm(profile)
    if len(xi) < 10 or f[-1] > 0.1 * np.max(f) or dfm[-1] >= 0:
        raise NoInterface("profile does not decay toward zero", f_end=float(f[-1]),
                          f_max=float(np.max(f)))

    q = params.m * f ** params.m / dfm
    decreasing = np.nonzero(dfm >= 0)[0]
    start = decreasing[-1] + 1 if len(decreasing) else 0
    window = np.arange(len(xi)) >= start
    window &= f <= 10.0 * f[-1]
    if window.sum() < 10:
        window = np.arange(len(xi)) >= max(start, len(xi) - 30)
    slope, intercept = np.polyfit(xi[window], q[window], 1)
    if slope <= 0:
        raise NoInterface("contact ratio is not increasing toward the interface", slope=slope)

    theta = 1.0 / slope
    xi0 = -intercept / slope
    type_i, type_ii = 1.0 / (params.m - 1.0), 1.0 / (1.0 - params.p)
    if params.critical:
        kind = InterfaceType.MERGED
    elif abs(theta - type_i) <= abs(theta - type_ii):
        kind = InterfaceType.TYPE_I
    else:
        kind = InterfaceType.TYPE_II
    flux = float(abs(dfm[-1]) / np.max(np.abs(dfm)))
    fit = InterfaceFit(xi0=float(xi0), exponent=float(theta), type=kind, flux=flux)
    profile.interface = fit
    LOGGER.info("interface at xi0=%.8g, exponent %.4f (type %s)", xi0, theta, kind.value)
    return fit


def blowup_pattern(profile: Profile) -> BlowupPattern:
    origin = profile.origin_class
    if origin is OriginClass.Q1_TYPE:
        return BlowupPattern.SIMULTANEOUS
    if origin is OriginClass.P2_TYPE:
        return BlowupPattern.SIMULTANEOUS_SLOW
    if origin is OriginClass.P0_TYPE:
        return BlowupPattern.SPACE_INFINITY
    return BlowupPattern.UNKNOWN


# Residuals

@dataclass
class ResidualReport:
    max_rel: float
    l2_rel: float
    scale: float
    xi: np.ndarray = field(repr=False, default=None)
    pointwise: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> Dict[str, float]:
        return {'max_rel': self.max_rel, 'l2_rel': self.l2_rel, 'scale': self.scale}


def _interior(profile: Profile, edge: float) -> np.ndarray:
    n = len(profile.xi)
    cut = max(2, int(edge * n))
    mask = np.zeros(n, dtype=bool)
    mask[cut:n - cut] = True
    return mask & (profile.f > 1e-3 * np.max(profile.f))


def _terms(xi, f, fm_prime, fm_second, params: Params):
    m, N, s = params.m, params.N, params.sigma
    ex = exponents(params)
    f_prime = fm_prime / (m * f ** (m - 1.0))
    return np.vstack([
        fm_second,
        (N - 1.0) / xi * fm_prime,
        -ex.alpha * f,
        ex.beta * xi * f_prime,
        xi ** s * f ** params.p,
    ])


def ssode_residual(profile: Profile, params: Optional[Params] = None,
                   edge: float = 0.05) -> ResidualReport:
    """Residual of the profile ODE, relative to its largest term.

    (f^m)' comes from the phase variables when available and (f^m)'' from
    the derivative of a cubic spline through it.
    """
    params = params or profile.params
    xi, f = profile.xi, profile.f
    fm_prime = profile.dfm if profile.dfm is not None else np.gradient(f ** params.m, xi)
    terms = _terms(xi, f, fm_prime, CubicSpline(xi, fm_prime)(xi, 1), params)
    residual = terms.sum(axis=0)
    mask = _interior(profile, edge)
    if not mask.any():
        mask = np.ones(len(xi), dtype=bool)
    scale = float(np.max(np.abs(terms[:, mask])))
    res = residual[mask]
    return ResidualReport(
        max_rel=float(np.max(np.abs(res)) / scale),
        l2_rel=float(np.sqrt(np.mean(res ** 2)) / scale),
        scale=scale,
        xi=xi[mask],
        pointwise=np.abs(res),
    )


def profile_value(profile: Profile, xi: np.ndarray) -> np.ndarray:
    """f at arbitrary radii: spline inside the samples, origin power law below,
    zero beyond a fitted interface, NaN elsewhere."""
    xi = np.asarray(xi, dtype=float)
    spline = CubicSpline(profile.xi, profile.f)
    out = np.full(xi.shape, np.nan)
    inside = (xi >= profile.xi[0]) & (xi <= profile.xi[-1])
    out[inside] = spline(xi[inside])
    origin = profile.diagnostics.get('origin')
    below = xi < profile.xi[0]
    if origin is not None and np.any(below):
        out[below] = origin['constant'] * xi[below] ** origin['exponent']
    if profile.interface is not None:
        out[xi >= profile.interface.xi0] = 0.0
    return out


def solution_values(profile: Profile, params: Params, x: np.ndarray, t: float,
                    T: float = 1.0) -> np.ndarray:
    """u(x, t) = (T-t)^-alpha f(|x| (T-t)^beta)."""
    if t >= T:
        raise GridOutsideSupport("t must be below the blow-up time", t=t, T=T)
    ex = exponents(params)
    tau = T - t
    return tau ** -ex.alpha * profile_value(profile, np.abs(np.asarray(x, dtype=float)) * tau ** ex.beta)


@dataclass
class PdeCheck:
    pde_rel: float
    ssode_rel: float
    points: int
    proportional: bool

    def to_dict(self) -> Dict[str, Any]:
        return {'pde_rel': self.pde_rel, 'ssode_rel': self.ssode_rel, 'points': self.points,
                'proportional': self.proportional}


def pde_residual(profile: Profile, params: Params, T: float = 1.0,
                 xs: Optional[Sequence[float]] = None,
                 ts: Optional[Sequence[float]] = None,
                 step: float = 1e-4) -> PdeCheck:
    """Finite-difference residual of the PDE on an (x, t) grid.

    Each PDE residual is rescaled by (T-t)^(alpha+1) and compared with the
    profile-ODE residual at the matching xi, computed from the same spline.
    The check passes when the two relative sizes agree within a factor 10,
    both measured against a floor.

    Raises:
        GridOutsideSupport: no grid point maps inside the sampled radii.
    """
    ex = exponents(params)
    m, N, s = params.m, params.N, params.sigma
    f_spline = CubicSpline(profile.xi, profile.f)
    g_spline = CubicSpline(profile.xi, profile.f ** m)
    lo, hi = profile.xi[0] * (1.0 + 2 * step), profile.xi[-1] * (1.0 - 2 * step)
    if xs is None:
        xs = np.geomspace(lo, hi, 24)
    if ts is None:
        ts = T - np.array([1.0, 0.5, 0.25]) * T

    def u(x, t):
        tau = T - t
        return tau ** -ex.alpha * f_spline(x * tau ** ex.beta)

    pde, ss, scales = [], [], []
    for t in ts:
        tau = T - t
        for x in xs:
            xi = x * tau ** ex.beta
            if not lo <= xi <= hi or f_spline(xi) <= 1e-2 * np.max(profile.f):
                continue
            h, dt = step * x, step * tau
            w = [u(x + k * h, t) ** m for k in (-1, 0, 1)]
            lap = (w[2] - 2.0 * w[1] + w[0]) / h ** 2 + (N - 1.0) / x * (w[2] - w[0]) / (2.0 * h)
            du = (u(x, t + dt) - u(x, t - dt)) / (2.0 * dt)
            r_pde = du - lap - x ** s * u(x, t) ** params.p
            terms = _terms(np.array([xi]), f_spline(np.array([xi])), g_spline(xi, 1),
                           g_spline(xi, 2), params)[:, 0]
            pde.append(abs(r_pde) * tau ** (ex.alpha + 1.0))
            ss.append(abs(terms.sum()))
            scales.append(np.max(np.abs(terms)))
    if not pde:
        raise GridOutsideSupport("no grid point maps inside the profile support",
                                 xi_min=float(profile.xi[0]), xi_max=float(profile.xi[-1]))

    scale = max(scales)
    pde_rel, ss_rel = max(pde) / scale, max(ss) / scale
    proportional = (pde_rel <= PROPORTIONALITY * max(ss_rel, RESIDUAL_FLOOR)
                    and ss_rel <= PROPORTIONALITY * max(pde_rel, RESIDUAL_FLOOR))
    if not proportional:
        LOGGER.warning("pde residual %.3g does not track profile residual %.3g", pde_rel, ss_rel)
    return PdeCheck(float(pde_rel), float(ss_rel), len(pde), bool(proportional))
