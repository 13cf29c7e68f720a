import numpy as np
import pytest

from database.models import (
    BlowupPattern, Chart, InterfaceType, OriginClass, Profile, ShotSource, ShotSpec, Trajectory,
)
from utils import profile as profiles
from utils import shoot
from utils.errors import DegenerateSample, GridOutsideSupport, NoInterface
from utils.params import exponents, validate

REFERENCE = validate(3.0, 0.5, 3.5, 4)
CRITICAL = validate(1.5, 0.5, 3.0, 2)


def _power_trajectory(params, gamma, xi):
    m = params.m
    f = xi ** gamma
    dfm = m * gamma * xi ** (m * gamma - 1.0)
    states = np.array([shoot.state_from_profile(x, fx, d, params) for x, fx, d in zip(xi, f, dfm)])
    return Trajectory(eta=np.arange(len(xi), dtype=float), states=states, chart=Chart.FINITE,
                      direction=1)


def _contact_profile(params, theta, n=2000):
    """f = (1 - xi)^theta with its exact (f^m)'."""
    xi = np.linspace(0.1, 0.999, n)
    f = (1.0 - xi) ** theta
    dfm = -params.m * theta * (1.0 - xi) ** (params.m * theta - 1.0)
    return Profile(xi=xi, f=f, dfm=dfm, params=params)


def test_round_trip_through_phase_variables():
    gamma = (REFERENCE.sigma + 2.0) / (REFERENCE.m - REFERENCE.p)
    xi = np.geomspace(1e-3, 1.0, 200)
    profile = profiles.reconstruct(_power_trajectory(REFERENCE, gamma, xi), REFERENCE)
    np.testing.assert_allclose(profile.xi, xi, rtol=1e-10)
    np.testing.assert_allclose(profile.f, xi ** gamma, rtol=1e-8)
    assert profile.diagnostics['origin']['exponent'] == pytest.approx(gamma, rel=1e-8)
    assert profile.origin_class is OriginClass.UNKNOWN


def test_interior_zero_is_degenerate():
    xi = np.geomspace(1e-2, 1.0, 50)
    trajectory = _power_trajectory(REFERENCE, 2.0, xi)
    trajectory.states[20, 2] = 0.0
    with pytest.raises(DegenerateSample):
        profiles.reconstruct(trajectory, REFERENCE)


def test_constant_profile_residual():
    c = 0.7
    xi = np.linspace(0.1, 1.0, 400)
    profile = Profile(xi=xi, f=np.full_like(xi, c), dfm=np.zeros_like(xi), params=REFERENCE)
    report = profiles.ssode_residual(profile)
    alpha = exponents(REFERENCE).alpha
    np.testing.assert_allclose(report.pointwise,
                               np.abs(-alpha * c + report.xi ** REFERENCE.sigma * c ** REFERENCE.p),
                               rtol=1e-12)


def test_non_solution_has_large_residual():
    xi = np.linspace(0.01, 2.0, 2000)
    profile = Profile(xi=xi, f=1.0 + xi ** 2, params=REFERENCE)
    assert profiles.ssode_residual(profile).max_rel >= 0.1


def test_type_ii_contact():
    fit = profiles.fit_interface(_contact_profile(REFERENCE, 2.0))
    assert fit.exponent == pytest.approx(2.0, rel=1e-6)
    assert fit.xi0 == pytest.approx(1.0, rel=1e-6)
    assert fit.type is InterfaceType.TYPE_II
    assert fit.flux <= 1e-4


def test_type_i_contact():
    profile = _contact_profile(REFERENCE, 0.5)
    fit = profiles.fit_interface(profile)
    assert fit.exponent == pytest.approx(0.5, rel=1e-6)
    assert fit.type is InterfaceType.TYPE_I
    assert profile.interface is fit


def test_merged_contact_types():
    fit = profiles.fit_interface(_contact_profile(CRITICAL, 2.0))
    assert fit.type is InterfaceType.MERGED


def test_growing_profile_has_no_interface():
    xi = np.linspace(0.1, 2.0, 200)
    with pytest.raises(NoInterface):
        profiles.fit_interface(Profile(xi=xi, f=1.0 + xi ** 2, params=REFERENCE))


@pytest.mark.parametrize("origin, pattern", [
    (OriginClass.Q1_TYPE, BlowupPattern.SIMULTANEOUS),
    (OriginClass.P2_TYPE, BlowupPattern.SIMULTANEOUS_SLOW),
    (OriginClass.P0_TYPE, BlowupPattern.SPACE_INFINITY),
    (OriginClass.ASYMPTOTE_TYPE, BlowupPattern.UNKNOWN),
])
def test_blowup_pattern(origin, pattern):
    profile = Profile(xi=np.array([1.0]), f=np.array([1.0]), origin_class=origin)
    assert profiles.blowup_pattern(profile) is pattern


def test_expected_origin_exponents():
    assert profiles.expected_origin_exponent(OriginClass.P0_TYPE, REFERENCE) == pytest.approx(2.2)
    assert profiles.expected_origin_exponent(OriginClass.P2_TYPE, REFERENCE) == pytest.approx(1.0)
    assert profiles.expected_origin_exponent(OriginClass.Q1_TYPE, REFERENCE) == 0.0
    assert profiles.expected_origin_exponent(OriginClass.UNKNOWN, REFERENCE) is None


def test_profile_value_outside_samples():
    profile = _contact_profile(REFERENCE, 2.0)
    profile.diagnostics['origin'] = {'constant': 2.0, 'exponent': 1.0}
    profiles.fit_interface(profile)
    values = profiles.profile_value(profile, np.array([0.05, 0.5, 1.5]))
    np.testing.assert_allclose(values, [0.1, 0.25, 0.0], rtol=1e-6)


def test_solution_after_blowup_time():
    with pytest.raises(GridOutsideSupport):
        profiles.solution_values(_contact_profile(REFERENCE, 2.0), REFERENCE, np.array([0.5]), t=1.0)


def test_pde_grid_outside_support():
    with pytest.raises(GridOutsideSupport):
        profiles.pde_residual(_contact_profile(REFERENCE, 2.0), REFERENCE, xs=[100.0], ts=[0.0])


@pytest.mark.slow
def test_profile_from_p0_has_type_ii_interface():
    trajectory = shoot.launch(ShotSpec(ShotSource.FROM_P0), REFERENCE)
    profile = profiles.reconstruct(trajectory, REFERENCE)
    assert profile.origin_class is OriginClass.P0_TYPE
    assert profile.diagnostics['origin']['exponent'] == pytest.approx(2.2, rel=0.02)
    fit = profiles.fit_interface(profile)
    assert fit.exponent == pytest.approx(2.0, rel=0.05)
    assert fit.type is InterfaceType.TYPE_II
    assert profiles.ssode_residual(profile).max_rel <= 1e-5
    check = profiles.pde_residual(profile, REFERENCE)
    assert check.points > 0
    assert check.proportional


def test_profile_from_q1_is_positive_at_the_origin():
    trajectory = shoot.launch(ShotSpec(ShotSource.FROM_Q1), REFERENCE, max_eta=1e-6)
    profile = profiles.reconstruct(trajectory, REFERENCE)
    assert profile.origin_class is OriginClass.Q1_TYPE
    assert profile.xi[0] == pytest.approx(1e-3, rel=1e-6)
    assert profile.f[0] == pytest.approx(1.0, rel=1e-4)
    assert profile.diagnostics['origin']['exponent'] == pytest.approx(0.0, abs=0.01)
    assert profiles.blowup_pattern(profile) is BlowupPattern.SIMULTANEOUS
