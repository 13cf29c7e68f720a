from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from utils.errors import ConfigError


class Regime(Enum):
    SUPERCRITICAL = "m+p>2"
    CRITICAL = "m+p=2"
    SUBCRITICAL = "m+p<2"


@dataclass(frozen=True)
class Params:
    m: float
    p: float
    sigma: float
    N: int
    regime: Regime = Regime.SUPERCRITICAL
    tol: float = 1e-12

    @property
    def critical(self) -> bool:
        return self.regime is Regime.CRITICAL

    @property
    def saddle_node(self) -> bool:
        """Q1 and Q5 merge into a saddle-node in dimension two."""
        return self.N == 2

    def to_dict(self) -> Dict[str, Any]:
        return {'m': self.m, 'p': self.p, 'sigma': self.sigma, 'N': self.N,
                'regime': self.regime.value}


@dataclass(frozen=True)
class Exponents:
    alpha: float
    beta: float
    L: float
    xi_max: Optional[float] = None

    @property
    def ratio(self) -> float:
        """beta/alpha, the recurring constant of the phase system."""
        return self.beta / self.alpha

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PhaseState:
    X: float
    Y: float
    Z: float

    def __post_init__(self):
        if self.X < 0 or self.Z < 0:
            raise ConfigError("phase state needs X >= 0 and Z >= 0", X=self.X, Z=self.Z)

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z], dtype=float)


@dataclass(frozen=True)
class UYVState:
    U: float
    Y: float
    V: float

    def __post_init__(self):
        if self.U < 0 or self.V < 0:
            raise ConfigError("shooting state needs U >= 0 and V >= 0", U=self.U, V=self.V)

    def as_array(self) -> np.ndarray:
        return np.array([self.U, self.Y, self.V], dtype=float)


class Chart(Enum):
    FINITE = "XYZ"
    UYV = "UYV"
    INF_X = "XChart"   # (y, z, w) = (Y/X, Z/X, 1/X)
    INF_Y = "YChart"   # (x, z, w), projection on Y


@dataclass(frozen=True)
class ChartState:
    chart: Chart
    coords: Tuple[float, float, float]

    def __post_init__(self):
        if self.chart in (Chart.INF_X, Chart.INF_Y):
            if self.coords[2] < 0 or self.coords[1] < 0:
                raise ConfigError("chart state needs z >= 0 and w >= 0", coords=str(self.coords))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


class PointTag(Enum):
    P0 = "P0"
    P1 = "P1"
    P2 = "P2"
    PARABOLA = "P0^lambda"
    PV0 = "P(v0)"
    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"


@dataclass
class CriticalPoint:
    tag: PointTag
    chart: Chart
    location: Tuple[float, float, float]
    sphere: Optional[Tuple[float, float, float, float]] = None
    parameter: Optional[float] = None
    saddle_node: bool = False

    def as_array(self) -> np.ndarray:
        return np.asarray(self.location, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tag': self.tag.value,
            'chart': self.chart.value,
            'location': [float(c) for c in self.location],
            'sphere': None if self.sphere is None else [float(c) for c in self.sphere],
            'parameter': self.parameter,
            'saddle_node': self.saddle_node,
        }


@dataclass
class EigenData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            'extras': {k: _plain(v) for k, v in self.extras.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [float(v) for v in value.real]
    if isinstance(value, (np.floating, np.integer)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def enum_value(kind: type, value: Any, key: str):
    """Enum member from a config value, with ConfigError for unknown names."""
    try:
        return kind(value)
    except ValueError:
        choices = ", ".join(member.value for member in kind)
        raise ConfigError(f"unknown {key} '{value}'", key=key, choices=choices)


class EventKind(Enum):
    PLANE_CROSS = "PlaneCross"
    CAPTURE = "CriticalCapture"
    DIVERGE = "Diverge"
    MAX_ETA = "MaxEta"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass
class Event:
    kind: EventKind
    eta: float
    state: Tuple[float, float, float]
    label: str = ""
    value: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'eta': float(self.eta), 'label': self.label,
                'value': float(self.value), 'state': [float(c) for c in self.state]}


@dataclass
class Trajectory:
    eta: np.ndarray
    states: np.ndarray  # shape (n, 3)
    chart: Chart
    direction: int
    events: List[Event] = field(default_factory=list)
    sol: Any = None  # scipy OdeSolution, dense output
    spec: Optional['ShotSpec'] = None

    @property
    def terminal(self) -> Optional[Event]:
        return self.events[-1] if self.events else None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.eta)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'eta': self.eta,
            'c1': self.states[:, 0],
            'c2': self.states[:, 1],
            'c3': self.states[:, 2],
            'chart': self.chart.value,
        })


class FateTag(Enum):
    ENTERS_P0 = "EntersP0"
    ENTERS_P1 = "EntersP1"
    ENTERS_P2 = "EntersP2"
    ENTERS_PARABOLA = "EntersParabola"
    ENTERS_Q1 = "EntersQ1"
    ENTERS_Q2 = "EntersQ2"
    ENTERS_Q3 = "EntersQ3"
    ENTERS_Q5 = "EntersQ5"
    UNDECIDED = "Undecided"


@dataclass
class OrbitFate:
    tag: FateTag
    lam: Optional[float] = None
    evidence: Dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.tag is FateTag.ENTERS_PARABOLA and self.lam is not None:
            return f"{self.tag.value}({self.lam:.6f})"
        return self.tag.value

    def to_dict(self) -> Dict[str, Any]:
        return {'tag': self.tag.value, 'lambda': self.lam,
                'evidence': {k: _plain(v) for k, v in self.evidence.items()}}


class ShotSource(Enum):
    FROM_P2 = "FromP2"
    FROM_P0 = "FromP0"
    FROM_Q1 = "FromQ1"
    FROM_Q5 = "FromQ5"
    BACKWARD_FROM_INTERFACE = "BackwardFromInterface"


@dataclass(frozen=True)
class ShotSpec:
    source: ShotSource
    eps: float = 1e-6
    K: float = 1.0
    C: float = 1.0
    D: float = 1.0
    xi_seed: float = 1e-3
    v0: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eps <= 1e-3:
            raise ConfigError("eps must lie in (0, 1e-3]", eps=self.eps)
        for name in ('K', 'C', 'D', 'xi_seed'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", **{name: getattr(self, name)})
        if self.v0 is not None and self.v0 <= 0:
            raise ConfigError("v0 must be positive", v0=self.v0)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ShotSpec':
        data = dict(data)
        source = enum_value(ShotSource, data.pop('source', None), 'source')
        return cls(source=source, **data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['source'] = self.source.value
        return data


class OriginClass(Enum):
    Q1_TYPE = "Q1Type"
    P2_TYPE = "P2Type"
    P0_TYPE = "P0Type"
    ASYMPTOTE_TYPE = "AsymptoteType"
    UNKNOWN = "Unknown"


class InterfaceType(Enum):
    TYPE_I = "I"
    TYPE_II = "II"
    MERGED = "I=II"


@dataclass
class InterfaceFit:
    xi0: float
    exponent: float
    type: InterfaceType
    flux: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {'xi0': self.xi0, 'exponent': self.exponent, 'type': self.type.value,
                'flux': self.flux}


class BlowupPattern(Enum):
    SIMULTANEOUS = "Simultaneous"
    SIMULTANEOUS_SLOW = "SimultaneousSlow"
    SPACE_INFINITY = "SpaceInfinity"
    UNKNOWN = "Unknown"


@dataclass
class Profile:
    xi: np.ndarray
    f: np.ndarray
    origin_class: OriginClass = OriginClass.UNKNOWN
    interface: Optional[InterfaceFit] = None
    dfm: Optional[np.ndarray] = None  # (f^m)' from the phase variables
    params: Optional[Params] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'xi': self.xi, 'f': self.f})


class SurfaceId(Enum):
    CYLINDER = "Cylinder"
    PLANE_NYKV = "PlaneNYkV"
    PLANE_CYZ = "PlaneCYZ"
    PLANE_AXZ = "PlaneAXZ"
    PI1 = "Pi1"
    PI2 = "Pi2"
    YFLOOR = "YFloor"
    NO_CYCLES = "NoCycles"
    Y_NULLCLINE = "YNullcline"


@dataclass
class Surface:
    id: SurfaceId
    chart: Chart
    coefficients: Dict[str, float]
    expected_sign: int
    region: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id.value,
            'chart': self.chart.value,
            'coefficients': {k: float(v) for k, v in self.coefficients.items()},
            'expected_sign': self.expected_sign,
            'region': {k: [float(lo), float(hi)] for k, (lo, hi) in self.region.items()},
        }


@dataclass
class CertificateReport:
    surface: Surface
    samples: int
    violations: List[Tuple[float, float, float]] = field(default_factory=list)
    checks: Dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if not self.violations else "fail"

    def to_dict(self, max_violations: int = 20) -> Dict[str, Any]:
        return {
            'surface': self.surface.to_dict(),
            'samples': self.samples,
            'violation_count': len(self.violations),
            'violations': [[float(c) for c in v] for v in self.violations[:max_violations]],
            'checks': {k: _plain(v) for k, v in self.checks.items()},
            'verdict': self.verdict,
        }


PARAM_KEYS = {'m', 'p', 'sigma', 'N'}
TOLERANCE_KEYS = {'regime', 'rtol', 'atol'}
OPTION_KEYS = {
    'source', 'eps', 'K', 'C', 'D', 'xi_seed', 'v0', 'lam',
    'bracket', 'sigma_grid', 'v0_grid', 'surface', 'samples', 'seed',
    'T', 'output', 'parallel', 'max_eta', 'experiment',
}


@dataclass
class RunConfig:
    m: float
    p: float
    sigma: Optional[float]
    N: int
    tolerance: Dict[str, float] = field(default_factory=dict)
    options: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        unknown = set(data) - PARAM_KEYS - OPTION_KEYS - {'tolerance'}
        if unknown:
            raise ConfigError("unknown config keys", keys=", ".join(sorted(unknown)))
        missing = {'m', 'p', 'N'} - set(data)
        if missing:
            raise ConfigError("missing config keys", keys=", ".join(sorted(missing)))
        tolerance = dict(data.get('tolerance') or {})
        bad = set(tolerance) - TOLERANCE_KEYS
        if bad:
            raise ConfigError("unknown tolerance keys", keys=", ".join(sorted(bad)))
        try:
            return cls(
                m=float(data['m']),
                p=float(data['p']),
                sigma=None if data.get('sigma') is None else float(data['sigma']),
                N=int(data['N']),
                tolerance={k: float(v) for k, v in tolerance.items()},
                options={k: v for k, v in data.items() if k in OPTION_KEYS},
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"malformed config value: {e}")

    def to_dict(self) -> Dict[str, Any]:
        data = {'m': self.m, 'p': self.p, 'sigma': self.sigma, 'N': self.N}
        if self.tolerance:
            data['tolerance'] = dict(self.tolerance)
        data.update(self.options)
        return data
