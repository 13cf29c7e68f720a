from typing import Any, Dict


class BlowupError(Exception):
    """Base class for every error raised by the profile toolkit."""

    exit_code = 3

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'details': {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


# Config errors

class ConfigError(BlowupError):
    exit_code = 2


class RangeViolation(ConfigError):
    """Exponents outside m>1, 0<p<1, N>=1, sigma>2(1-p)/(m-1)."""

    def __init__(self, constraint: str, value: float, bound: float):
        super().__init__(f"{constraint} violated: got {value!r}, bound {bound!r}",
                         constraint=constraint, value=value, bound=bound)
        self.constraint = constraint


# Numerical errors

class RegimeError(BlowupError):
    pass


class NonHyperbolic(BlowupError):
    pass


class SeedError(BlowupError):
    pass


class StepUnderflow(BlowupError):
    pass


class UndershootError(BlowupError):
    pass


class ChartError(BlowupError):
    pass


class BracketError(BlowupError):
    pass


class DegenerateSample(BlowupError):
    pass


class NoInterface(BlowupError):
    pass


class OffSurface(BlowupError):
    pass


class GridOutsideSupport(BlowupError):
    pass


# Unclassified orbits

class Unclassifiable(BlowupError):
    exit_code = 4
