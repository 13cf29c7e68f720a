import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

import config
from database.models import Chart, Event, EventKind, Trajectory
from utils.errors import ConfigError, StepUnderflow, UndershootError

LOGGER = logging.getLogger(__name__)

FiniteMap = Callable[[np.ndarray], np.ndarray]


@dataclass
class EventSpec:
    """A scalar condition g(X, Y, Z) = 0 watched during integration.

    The function always sees finite-chart coordinates; the integrator maps
    chart states through ``to_finite`` before calling it.
    """
    kind: EventKind
    label: str
    fn: Callable[[np.ndarray], float]
    terminal: bool = True
    direction: float = 0.0
    value: float = 0.0


def plane(label: str, normal: Sequence[float], offset: float = 0.0,
          terminal: bool = False) -> EventSpec:
    """Plane n.x = offset in the finite chart."""
    n = np.asarray(normal, dtype=float)
    return EventSpec(EventKind.PLANE_CROSS, label, lambda x: float(n @ x - offset),
                     terminal=terminal)


def capture(label: str, point: Sequence[float],
            radius: float = config.CAPTURE_RADIUS) -> EventSpec:
    """Ball around a critical point, radius scaled by the point's magnitude."""
    center = np.asarray(point, dtype=float)
    scaled = radius * max(1.0, float(np.linalg.norm(center)))
    return EventSpec(EventKind.CAPTURE, label,
                     lambda x: float(np.linalg.norm(x - center) - scaled),
                     terminal=True, direction=-1.0, value=scaled)


def parabola_capture(ratio: float, radius: float = config.CAPTURE_RADIUS) -> EventSpec:
    """Tube around the curve of equilibria Z = -Y^2 - ratio*Y, -ratio <= Y <= 0."""

    def distance(x: np.ndarray) -> float:
        lam = min(max(x[1], -ratio), 0.0)
        dz = x[2] + lam * lam + ratio * lam
        return float(np.sqrt(x[0] ** 2 + (x[1] - lam) ** 2 + dz ** 2) - radius)

    return EventSpec(EventKind.CAPTURE, 'P0^lambda', distance,
                     terminal=True, direction=-1.0, value=radius)


def divergence(threshold: float = config.DIVERGE) -> List[EventSpec]:
    return [
        EventSpec(EventKind.DIVERGE, 'X', lambda x: float(x[0] - threshold),
                  direction=1.0, value=threshold),
        EventSpec(EventKind.DIVERGE, 'Y', lambda x: float(abs(x[1]) - threshold),
                  direction=1.0, value=threshold),
        EventSpec(EventKind.DIVERGE, 'Z', lambda x: float(x[2] - threshold),
                  direction=1.0, value=threshold),
    ]


def _undershoot() -> EventSpec:
    return EventSpec(EventKind.STEP_UNDERFLOW, 'undershoot',
                     lambda x: float(min(x[0], x[2]) + config.UNDERSHOOT),
                     terminal=True, direction=-1.0)


def _wrap(spec: EventSpec, to_finite: Optional[FiniteMap]):
    if to_finite is None:
        def event(eta, y):
            return spec.fn(y)
    else:
        def event(eta, y):
            return spec.fn(to_finite(y))
    event.terminal = spec.terminal
    event.direction = spec.direction
    return event


def _clamp(states: np.ndarray, chart: Chart) -> np.ndarray:
    """Clamp tiny negative undershoots of the nonnegative components."""
    if chart in (Chart.FINITE, Chart.UYV):
        idx = [0, 2]
    else:
        idx = [1, 2]
    for i in idx:
        column = states[:, i]
        small = (column < 0) & (column >= -config.UNDERSHOOT)
        if np.any(small):
            LOGGER.debug("clamping %d undershoots in component %d", int(small.sum()), i)
            column[small] = 0.0
    return states


def integrate(field: Callable[[float, np.ndarray], np.ndarray],
              y0: Sequence[float],
              chart: Chart = Chart.FINITE,
              direction: int = 1,
              events: Iterable[EventSpec] = (),
              rtol: float = config.RTOL,
              atol: float = config.ATOL,
              max_eta: float = config.MAX_ETA,
              to_finite: Optional[FiniteMap] = None,
              method: str = config.METHOD) -> Trajectory:
    """Integrate a chart field until the first terminal event.

    Args:
        field: right-hand side f(eta, y).
        y0: initial chart state.
        chart: chart the state lives in.
        direction: +1 forward in eta, -1 backward.
        events: watched conditions, expressed in finite coordinates.
        to_finite: map from chart to finite coordinates for the events.

    Returns:
        Trajectory with samples, event log and dense output.

    Raises:
        StepUnderflow: the step size collapsed without an event firing.
        UndershootError: a nonnegative component went below -1e-10.
    """
    if not config.MIN_RTOL <= rtol <= config.MAX_RTOL:
        raise ConfigError("rtol outside [1e-12, 1e-3]", rtol=rtol)
    if direction not in (1, -1):
        raise ConfigError("direction must be +1 or -1", direction=direction)

    y0 = np.asarray(y0, dtype=float)
    specs = list(events)
    finite0 = y0 if to_finite is None else to_finite(y0)

    rate = np.linalg.norm(field(0.0, y0))
    if rate <= 1e-14 * (1.0 + np.linalg.norm(y0)):
        captures = [s for s in specs if s.kind is EventKind.CAPTURE]
        label = 'equilibrium'
        if captures:
            label = min(captures, key=lambda s: s.fn(finite0)).label
        LOGGER.debug("initial state is an equilibrium (%s)", label)
        return Trajectory(
            eta=np.array([0.0]), states=y0[None, :].copy(), chart=chart, direction=direction,
            events=[Event(EventKind.CAPTURE, 0.0, tuple(y0), label, 0.0)],
        )

    if chart in (Chart.FINITE, Chart.UYV):
        specs.append(_undershoot())
    wrapped = [_wrap(s, to_finite) for s in specs]

    result = solve_ivp(field, (0.0, direction * max_eta), y0, method=method,
                       rtol=rtol, atol=atol, dense_output=True, events=wrapped or None)
    if result.status == -1:
        raise StepUnderflow(f"integration failed: {result.message}",
                            eta=float(result.t[-1]) if len(result.t) else 0.0)

    log: List[Event] = []
    for spec, t_hits, y_hits in zip(specs, result.t_events or [], result.y_events or []):
        for t, y in zip(t_hits, y_hits):
            if spec.label == 'undershoot':
                raise UndershootError("nonnegative component undershot -1e-10",
                                      eta=float(t), state=str(tuple(y)))
            log.append(Event(spec.kind, float(t), tuple(float(c) for c in y),
                             spec.label, spec.value))
    log.sort(key=lambda e: abs(e.eta))
    if result.status == 0:
        log.append(Event(EventKind.MAX_ETA, float(result.t[-1]), tuple(result.y[:, -1]),
                         'max_eta', max_eta))

    states = _clamp(result.y.T.copy(), chart)
    trajectory = Trajectory(eta=result.t, states=states, chart=chart, direction=direction,
                            events=log, sol=result.sol)
    LOGGER.debug("integrated %d samples, terminal %s", len(trajectory),
                  trajectory.terminal.kind.value if trajectory.terminal else None)
    return trajectory


def crossing_state(trajectory: Trajectory,
                   plane_id: Union[str, EventSpec],
                   to_finite: Optional[FiniteMap] = None) -> Optional[np.ndarray]:
    """State at the first crossing of a plane, or None.

    A plane registered as an event is read from the event log. An EventSpec
    not watched during integration is located on the samples and refined on
    the dense output with brentq.
    """
    label = plane_id if isinstance(plane_id, str) else plane_id.label
    for event in trajectory.events:
        if event.kind is EventKind.PLANE_CROSS and event.label == label:
            return np.asarray(event.state)
    if isinstance(plane_id, str) or trajectory.sol is None:
        return None

    def g(eta: float) -> float:
        y = trajectory.sol(eta)
        return plane_id.fn(y if to_finite is None else to_finite(y))

    values = np.array([g(t) for t in trajectory.eta])
    flips = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    if len(flips) == 0:
        exact = np.nonzero(values[1:] == 0.0)[0]
        return trajectory.states[exact[0] + 1] if len(exact) else None
    i = flips[0]
    eta = brentq(g, trajectory.eta[i], trajectory.eta[i + 1], xtol=1e-14, rtol=4e-16)
    return trajectory.sol(eta)
