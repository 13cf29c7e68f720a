import numpy as np
import pytest

from database.models import Regime
from utils.errors import RangeViolation
from utils.params import exponents, regime_of, sigma_lower_bound, validate, with_sigma


def _random_params(n, seed=0):
    rng = np.random.default_rng(seed)
    m = rng.uniform(1.05, 5.0, n)
    p = rng.uniform(0.05, 0.95, n)
    sigma = sigma_lower_bound(m, p) + rng.uniform(0.01, 20.0, n)
    N = rng.integers(1, 8, n)
    return [validate(*args) for args in zip(m, p, sigma, N)]


def test_exponent_identities():
    """alpha(m-1) - 2beta = 1 and sigma*beta - (1-p)alpha = 1."""
    for params in _random_params(10_000):
        ex = exponents(params)
        assert abs(ex.alpha * (params.m - 1) - 2 * ex.beta - 1) <= 1e-12 * max(1.0, ex.alpha * params.m)
        assert abs(params.sigma * ex.beta - (1 - params.p) * ex.alpha - 1) <= 1e-12 * max(
            1.0, params.sigma * ex.beta)


def test_reference_exponents():
    """(3, 0.5, 3.5) gives L = 6 and alpha = 11/12."""
    ex = exponents(validate(3.0, 0.5, 3.5, 4))
    np.testing.assert_allclose(ex.L, 6.0)
    np.testing.assert_allclose(ex.alpha, 5.5 / 6.0)
    np.testing.assert_allclose(ex.beta, 2.5 / 6.0)
    assert ex.xi_max is None


def test_xi_max_for_critical_sum():
    """xi_max = 2/3 at (1.5, 0.5, 3)."""
    ex = exponents(validate(1.5, 0.5, 3.0, 2))
    assert abs(ex.xi_max - 2.0 / 3.0) <= 1e-12


@pytest.mark.parametrize("m, p, regime", [
    (3.0, 0.5, Regime.SUPERCRITICAL),
    (1.5, 0.5, Regime.CRITICAL),
    (1.2, 0.5, Regime.SUBCRITICAL),
])
def test_regime(m, p, regime):
    """Regime follows the sign of m+p-2."""
    assert regime_of(m, p) is regime


def test_regime_tolerance():
    """A tiny offset from m+p=2 still counts as critical within tolerance."""
    assert regime_of(1.5 + 1e-14, 0.5) is Regime.CRITICAL
    assert regime_of(1.5 + 1e-6, 0.5) is Regime.SUPERCRITICAL


@pytest.mark.parametrize("m, p, sigma, N, constraint", [
    (1.0, 0.5, 3.0, 2, "m > 1"),
    (3.0, 1.0, 3.0, 2, "0 < p < 1"),
    (3.0, 0.0, 3.0, 2, "0 < p < 1"),
    (3.0, 0.5, 3.0, 0, "N integer >= 1"),
    (3.0, 0.5, 0.5, 2, "sigma > 2(1-p)/(m-1)"),
    (3.0, 0.5, float('nan'), 2, "sigma finite"),
])
def test_range_violations(m, p, sigma, N, constraint):
    """Each broken constraint is named in the error."""
    with pytest.raises(RangeViolation) as info:
        validate(m, p, sigma, N)
    assert info.value.constraint == constraint
    assert info.value.exit_code == 2


def test_sigma_at_bound_rejected():
    """sigma equal to the lower bound is outside the open range."""
    with pytest.raises(RangeViolation):
        validate(3.0, 0.5, sigma_lower_bound(3.0, 0.5), 4)


def test_with_sigma_keeps_the_rest():
    """Only sigma changes."""
    params = with_sigma(validate(3.0, 0.5, 3.5, 4), 6.0)
    assert (params.m, params.p, params.N, params.sigma) == (3.0, 0.5, 4, 6.0)
