import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvpnav.errors import InvalidGeoPoint, SingularCovariance
from nvpnav.geometry import (EARTH_RADIUS, GeoPoint, Plane3, Pose2, PoseEstimate, geo_to_local,
                             local_to_geo, mahalanobis_distance, point_in_polygon,
                             polyline_distance, polyline_station, wrap_angle)

finite = st.floats(-1e3, 1e3, allow_nan=False)
angles = st.floats(-20.0, 20.0, allow_nan=False)


def est(cov_xy, mean=(0.0, 0.0)):
    cov = np.eye(3)
    cov[:2, :2] = cov_xy
    return PoseEstimate(Pose2(*mean), cov)


@given(angles)
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(math.pi) == pytest.approx(math.pi)


@given(finite, finite, angles, finite, finite, angles)
def test_pose_compose_normalizes_and_inverts(x, y, h, x2, y2, h2):
    a, b = Pose2(x, y, h), Pose2(x2, y2, h2)
    c = a.compose(b)
    assert -math.pi < c.heading <= math.pi
    back = a.inverse().compose(c)
    assert back.x == pytest.approx(b.x, abs=1e-6)
    assert back.y == pytest.approx(b.y, abs=1e-6)
    assert abs(wrap_angle(back.heading - b.heading)) < 1e-9


@given(finite, finite, angles, st.lists(st.tuples(finite, finite), min_size=1, max_size=5))
def test_to_local_inverts_to_world(x, y, h, pts):
    p = Pose2(x, y, h)
    pts = np.array(pts)
    assert np.allclose(p.to_world(p.to_local(pts)), pts, atol=1e-7)


def test_pose_estimate_rejects_bad_covariance():
    with pytest.raises(ValueError):
        PoseEstimate(Pose2(), np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        PoseEstimate(Pose2(), np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1.0]]))


def test_geopoint_ranges():
    with pytest.raises(InvalidGeoPoint):
        GeoPoint(91.0, 0.0)
    with pytest.raises(InvalidGeoPoint):
        GeoPoint(0.0, 181.0)
    with pytest.raises(InvalidGeoPoint):
        geo_to_local(GeoPoint(0, 0), GeoPoint(89.5, 0))


def test_geo_to_local_identity():
    o = GeoPoint(45.0, 7.0)
    assert geo_to_local(o, o) == (0.0, 0.0)


def test_geo_to_local_hand_values():
    # R * 0.001 deg in radians
    expect = EARTH_RADIUS * math.radians(0.001)
    assert expect == pytest.approx(111.319, abs=1e-3)
    x, y = geo_to_local(GeoPoint(0, 0), GeoPoint(0, 0.001))
    assert x == pytest.approx(111.319, abs=1e-3) and y == 0.0
    x, y = geo_to_local(GeoPoint(0, 0), GeoPoint(0.001, 0))
    assert x == 0.0 and y == pytest.approx(111.319, abs=1e-3)


@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(-900, 900), st.floats(-900, 900))
def test_geo_roundtrip_sub_km(lat, lon, dx, dy):
    o = GeoPoint(lat, lon)
    q = geo_to_local(o, local_to_geo(o, (dx, dy)))
    assert abs(q[0] - dx) < 1e-6 and abs(q[1] - dy) < 1e-6


@given(st.floats(0, 0.01), st.floats(0, 0.01))
def test_geo_monotone_in_latitude(a, b):
    o = GeoPoint(10.0, 10.0)
    ya = abs(geo_to_local(o, GeoPoint(10.0 + a, 10.0)).y)
    yb = abs(geo_to_local(o, GeoPoint(10.0 + b, 10.0)).y)
    if a < b:
        assert ya <= yb


def test_md_examples():
    assert mahalanobis_distance((3, 4), est(np.eye(2))) == pytest.approx(5.0)
    assert mahalanobis_distance((2, 0), est(np.diag([4.0, 1.0]))) == pytest.approx(1.0)


def test_md_singular():
    with pytest.raises(SingularCovariance):
        mahalanobis_distance((1, 0), est(np.diag([1.0, 0.0])))


def test_md_uses_positional_block_only():
    cov = np.diag([1.0, 1.0, 1e6])
    e = PoseEstimate(Pose2(0, 0, 1.0), cov)
    assert mahalanobis_distance((3, 4), e) == pytest.approx(5.0)


@given(st.tuples(finite, finite), st.floats(0.01, 100))
def test_md_scaling(d, s):
    base = mahalanobis_distance(d, est(np.eye(2)))
    assert mahalanobis_distance(d, est(s * np.eye(2))) == pytest.approx(base / math.sqrt(s), rel=1e-9, abs=1e-12)


@given(st.tuples(finite, finite), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-0.9, 0.9), angles)
def test_md_rotation_invariant(d, sx, sy, rho, th):
    c = rho * math.sqrt(sx * sy)
    cov = np.array([[sx, c], [c, sy]])
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    d = np.array(d)
    a = mahalanobis_distance(d, est(cov))
    b = mahalanobis_distance(R @ d, est(R @ cov @ R.T))
    assert b == pytest.approx(a, rel=1e-6, abs=1e-9)


@given(st.tuples(finite, finite), st.tuples(finite, finite))
def test_md_zero_iff_at_mean(mean, goal):
    md = mahalanobis_distance(goal, est(np.eye(2), mean))
    assert (md == 0.0) == (tuple(map(float, goal)) == tuple(map(float, mean)))


def test_plane_normalizes():
    pl = Plane3((0, 0, 2), -4)
    assert pl.normal == (0.0, 0.0, 1.0) and pl.d == -2.0
    assert pl.signed_distance([[0, 0, 3]])[0] == pytest.approx(1.0)


def test_point_in_polygon_square():
    sq = np.array([[0, 0], [2, 0], [2, 2], [0, 2]])
    assert point_in_polygon([[1, 1], [3, 1], [-0.1, 1]], sq).tolist() == [True, False, False]


def test_polyline_distance_and_station():
    line = np.array([[0, 0], [10, 0], [10, 10]])
    pts = np.array([[5, 2], [12, 5]])
    assert polyline_distance(pts, line).tolist() == pytest.approx([2.0, 2.0])
    assert polyline_station(pts, line).tolist() == pytest.approx([5.0, 15.0])
