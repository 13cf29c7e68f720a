import numpy as np
import pytest

from database.models import Chart, ShotSource, ShotSpec, SurfaceId
from utils import barriers, dynsys, shoot
from utils.errors import ConfigError, OffSurface, RegimeError
from utils.integrate import divergence, integrate
from utils.params import exponents, validate

REFERENCE = validate(3.0, 0.5, 3.5, 4)
NEAR_TWO = validate(1.5, 0.5, 2.05, 2)

SURFACE_PARAMS = [
    (SurfaceId.CYLINDER, REFERENCE),
    (SurfaceId.PLANE_NYKV, REFERENCE),
    (SurfaceId.PLANE_CYZ, NEAR_TWO),
    (SurfaceId.PLANE_AXZ, NEAR_TWO),
    (SurfaceId.PI1, REFERENCE),
    (SurfaceId.PI2, REFERENCE),
    (SurfaceId.YFLOOR, REFERENCE),
    (SurfaceId.NO_CYCLES, NEAR_TWO),
    (SurfaceId.Y_NULLCLINE, NEAR_TWO),
]


@pytest.mark.parametrize("surface_id, params", SURFACE_PARAMS)
def test_closed_form_matches_normal_dot_field(surface_id, params):
    surface = barriers.make_surface(surface_id, params)
    points = barriers.sample_surface(surface, params, 1000, seed=7)
    assert points.shape[1] > 0
    flow = barriers.flow_sign(surface, points, params)
    closed = barriers.closed_form(surface, points, params)
    scale = np.max(np.abs(flow))
    np.testing.assert_allclose(flow, closed, rtol=1e-10, atol=1e-10 * scale)


@pytest.mark.parametrize("surface_id", [SurfaceId.PLANE_CYZ, SurfaceId.PLANE_AXZ,
                                        SurfaceId.NO_CYCLES, SurfaceId.Y_NULLCLINE])
def test_critical_surfaces_need_critical_regime(surface_id):
    with pytest.raises(RegimeError):
        barriers.make_surface(surface_id, REFERENCE)


def test_shooting_plane_needs_supercritical():
    with pytest.raises(RegimeError):
        barriers.make_surface(SurfaceId.PLANE_NYKV, NEAR_TWO)


def test_critical_plane_constants():
    co = barriers.make_surface(SurfaceId.PLANE_CYZ, NEAR_TWO).coefficients
    assert co['c'] == pytest.approx(0.25 / 4.05 ** 2)
    assert co['d'] == pytest.approx(co['c'] / 2.0)
    assert co['a'] == co['b']


def test_pi1_passes_through_p2():
    surface = barriers.make_surface(SurfaceId.PI1, REFERENCE)
    co = surface.coefficients
    XP, YP, _ = dynsys.p2(REFERENCE)
    assert co['C'] * XP - co['B'] == pytest.approx(YP)
    value = barriers.closed_form(surface, (XP, YP, 0.0), REFERENCE)
    assert abs(value) <= 1e-12 * max(abs(co['A1']), abs(co['A2']), abs(co['A3']))


@pytest.mark.parametrize("sigma", [3.5, 6.0, 50.0])
def test_pi1_second_root(sigma):
    params = validate(3.0, 0.5, sigma, 4)
    co = barriers.make_surface(SurfaceId.PI1, params).coefficients
    assert co['X0_sigma'] == pytest.approx(co['X0_closed'], rel=1e-9)
    root = co['X0_sigma']
    scale = max(abs(co['A2'] * root), abs(co['A3']))
    assert abs(co['A1'] * root ** 2 + co['A2'] * root + co['A3']) <= 1e-10 * scale


def test_choose_b_is_smallest_power_of_two():
    B = barriers.choose_B(REFERENCE)
    assert np.log2(B) == int(np.log2(B))
    co = barriers.make_surface(SurfaceId.PI1, REFERENCE).coefficients
    assert co['C'] * co['X0'] - co['B'] < -2.0 * co['Y0']
    if B > 1:
        half = barriers.make_surface(SurfaceId.PI1, REFERENCE, B=B / 2.0).coefficients
        assert not half['C'] * half['X0'] - half['B'] < -2.0 * half['Y0']


def test_pi2_default_a_is_twice_the_bound():
    co = barriers.make_surface(SurfaceId.PI2, REFERENCE).coefficients
    assert co['A'] == pytest.approx(2.0 * barriers.a_lower_bound(REFERENCE, co['B']))


def test_yfloor_vanishes_at_p2_foot():
    surface = barriers.make_surface(SurfaceId.YFLOOR, REFERENCE)
    XP = surface.coefficients['XP']
    assert abs(barriers.closed_form(surface, (XP, -1.0, 0.0), REFERENCE)) <= 1e-12


def test_cylinder_sign_at_parabola_peak():
    params = validate(1.5, 0.5, 3.0, 2)
    surface = barriers.make_surface(SurfaceId.CYLINDER, params)
    r = exponents(params).ratio
    Y = -r / 2.0
    X = 0.01
    value = barriers.flow_sign(surface, (X, Y, -Y * Y - r * Y), params)
    assert value == pytest.approx(-0.01 * X)


def test_off_surface_state():
    surface = barriers.make_surface(SurfaceId.CYLINDER, REFERENCE)
    with pytest.raises(OffSurface):
        barriers.flow_sign(surface, (0.01, -0.1, 1.0), REFERENCE)


def test_projection_within_tolerance():
    surface = barriers.make_surface(SurfaceId.YFLOOR, REFERENCE)
    snapped = barriers.project(surface, (0.05, -1.0 + 1e-10, 0.3), REFERENCE)
    assert snapped[1] == -1.0


def test_critical_point_on_surface_gives_zero():
    surface = barriers.make_surface(SurfaceId.PI2, REFERENCE)
    assert barriers.flow_sign(surface, dynsys.p2(REFERENCE), REFERENCE) == pytest.approx(0.0, abs=1e-14)


def test_plane_cyz_certifies_near_two():
    surface = barriers.make_surface(SurfaceId.PLANE_CYZ, NEAR_TWO)
    report = barriers.certify(surface, NEAR_TWO, 10_000)
    assert report.verdict == 'pass'
    assert report.samples == 10_000


@pytest.mark.parametrize("surface_id", [SurfaceId.PLANE_AXZ, SurfaceId.NO_CYCLES])
def test_planar_conditions_certify_near_two(surface_id):
    report = barriers.certify(barriers.make_surface(surface_id, NEAR_TWO), NEAR_TWO, 2000)
    assert report.verdict == 'pass'


def test_flat_second_plane_fails():
    surface = barriers.make_surface(SurfaceId.PI2, REFERENCE, A=0.0)
    report = barriers.certify(surface, REFERENCE, 1000)
    assert report.verdict == 'fail'
    assert len(report.violations) == report.samples
    assert report.to_dict()['violation_count'] == report.samples


def test_second_plane_certifies_for_large_sigma():
    params = validate(3.0, 0.5, 1000.0, 4)
    report = barriers.certify(barriers.make_surface(SurfaceId.PI2, params), params, 10_000)
    assert report.verdict == 'pass'
    assert report.checks['yp_below_inverse_n']


def test_certificates_are_reproducible():
    surface = barriers.make_surface(SurfaceId.PI2, REFERENCE)
    first = barriers.certify(surface, REFERENCE, 500, seed=3).to_dict()
    second = barriers.certify(surface, REFERENCE, 500, seed=3).to_dict()
    assert first == second


def test_d1_example():
    params = validate(1.5, 0.5, 2.5, 2)
    assert barriers.region_membership((0.0, 0.25, 0.0), 'D1', params)


def test_origin_on_shared_boundary():
    assert barriers.region_membership((0.0, 0.0, 0.0), 'D1', NEAR_TWO)
    assert barriers.region_membership((0.0, 0.0, 0.0), 'D2', NEAR_TWO)


def test_beyond_x_star():
    X_star = barriers.make_surface(SurfaceId.PLANE_CYZ, NEAR_TWO).coefficients['X_star']
    for region in ('D1', 'D2', 'D3'):
        assert not barriers.region_membership((2.0 * X_star, 0.0, 0.0), region, NEAR_TWO)


def test_region_errors():
    with pytest.raises(ConfigError):
        barriers.region_membership((0.0, 0.0, 0.0), 'D4', NEAR_TWO)
    with pytest.raises(RegimeError):
        barriers.region_membership((0.0, 0.0, 0.0), 'D1', REFERENCE)


def test_region_samples_are_members():
    for region in ('D1', 'D2', 'D3'):
        points = barriers.region_samples(NEAR_TWO, region, n=50)
        assert all(barriers.region_membership(x, region, NEAR_TWO) for x in points.T)


def test_large_region():
    co = barriers.make_surface(SurfaceId.PI2, REFERENCE).coefficients
    Y = co['C'] * 0.01 - co['B'] - 1.0
    assert barriers.region_membership((0.01, Y, co['A'] * (co['YP'] - Y) + 1.0), 'large', REFERENCE)
    assert not barriers.region_membership((0.01, co['YP'], 0.0), 'large', REFERENCE)


def test_orbit_level_helpers():
    d1_point = (0.0, 0.25, 0.0)
    outside = (1.0, 0.25, 0.0)
    states = np.array([outside, d1_point, outside])
    assert barriers.stays_inside(states, NEAR_TWO, regions=('D1',)) is False
    assert barriers.stays_inside(states[:2], NEAR_TWO, regions=('D1',)) is True
    falling = np.array([[0.01, 0.0, 0.1], [0.01, -1.5, 0.1], [0.01, -3.0, 0.1]])
    assert barriers.no_return(falling, REFERENCE) is True
    assert barriers.no_return(falling[[0, 2, 1]], REFERENCE) is False


def test_interface_threshold():
    threshold = barriers.interface_threshold(REFERENCE)
    assert threshold['U0'] > 0 and threshold['V0'] > 0
    with pytest.raises(RegimeError):
        barriers.interface_threshold(NEAR_TWO)


def test_pi1_parabola_curve():
    curve = barriers.pi1_parabola(REFERENCE, n=50)
    co = barriers.make_surface(SurfaceId.PI1, REFERENCE).coefficients
    assert curve.shape == (3, 50)
    assert curve[0, 0] == pytest.approx(co['X0_sigma'])
    assert curve[0, -1] == pytest.approx(co['XP'])
    assert np.all(curve[2] >= 0.0)


def test_pi2_corner_threshold():
    threshold = barriers.pi2_threshold(REFERENCE, start=50.0)
    assert threshold == pytest.approx(707.32, abs=0.5)
    below = barriers.pi2_corner_margin(validate(3.0, 0.5, threshold - 5.0, 4))
    above = barriers.pi2_corner_margin(validate(3.0, 0.5, threshold + 5.0, 4))
    assert below < 0 < above


@pytest.mark.parametrize("sigma, verdict", [(50.0, 'fail'), (200.0, 'fail'), (1000.0, 'pass')])
def test_second_plane_verdicts(sigma, verdict):
    params = validate(3.0, 0.5, sigma, 4)
    report = barriers.certify(barriers.make_surface(SurfaceId.PI2, params), params)
    assert report.verdict == verdict


@pytest.mark.slow
def test_second_plane_threshold_is_found():
    corner = barriers.pi2_threshold(REFERENCE, start=50.0)
    threshold = barriers.certify_threshold(SurfaceId.PI2, REFERENCE, start=50.0, n=10_000, tol=1e-3)
    assert threshold == pytest.approx(corner, rel=0.03)
    assert threshold <= corner * (1.0 + 2e-3)


@pytest.mark.slow
@pytest.mark.parametrize("K", np.linspace(0.5, 0.7, 20))
def test_p0_family_orbits_enter_and_keep_to_the_lower_zones(K):
    seed = shoot._seed_p0(ShotSpec(ShotSource.FROM_P0, K=K, xi_seed=1e-6), NEAR_TWO)
    assert barriers.region_membership(seed, 'D1', NEAR_TWO)
    trajectory = integrate(dynsys.field_for(Chart.FINITE, NEAR_TWO), seed,
                           events=divergence(), max_eta=2e5)
    states = trajectory.states
    lower = [any(barriers.region_membership(x, name, NEAR_TWO, tol=1e-9) for name in ('D2', 'D3'))
             for x in states]
    assert any(lower)
    assert barriers.stays_inside(states, NEAR_TWO, tol=1e-9)
    assert barriers.stays_inside(states, NEAR_TWO, regions=('D1', 'D2', 'D3'), tol=1e-9)


def test_region_tolerance():
    X = barriers._critical_planes(NEAR_TWO)['X_star']
    edge = (X + 1e-10, 0.25, 0.0)
    assert not barriers.region_membership(edge, 'D1', NEAR_TWO)
    assert barriers.region_membership(edge, 'D1', NEAR_TWO, tol=1e-9)
