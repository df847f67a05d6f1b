import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvpnav.control import ControlAction, VehicleParams
from nvpnav.geometry import Pose2
from nvpnav.osm import plan_global
from nvpnav.sim.library import ORIGIN, straight_graph
from nvpnav.sim.world import (AgentState, ConvexPolygon, Disc, DynamicAgent, LocalizationModel,
                              Localizer, SensorModel, World, footprint_shape, inject_osm_bias,
                              localize, raycast_scan, step_vehicle)

VP = VehicleParams()
ROOM = World([(-5, 0), (5, 0)], polygons=[
    ConvexPolygon.box(5, -6, 6, 6), ConvexPolygon.box(-6, -6, -5, 6),
    ConvexPolygon.box(-6, 5, 6, 6), ConvexPolygon.box(-6, -6, 6, -5)])
FLAT_RING = SensorModel(rings=1, elev_min_deg=0.0, elev_max_deg=0.0, az_cols=901, range_noise=0.0)


def ahead(cloud):
    """Return the point on the +x bearing (y = 0, z = 0)."""
    k = np.argmin(np.abs(np.arctan2(cloud[:, 1], cloud[:, 0])))
    return cloud[k]


# --- raycasting --------------------------------------------------------------

def test_horizontal_ring_hits_wall():
    cloud = raycast_scan(ROOM, [], Pose2(0, 0, 0), FLAT_RING)
    p = ahead(cloud)
    assert p[1] == 0.0 and p[0] == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("theta_deg", [-3.0, -7.5, -15.0])
def test_downward_ring_hits_ground(theta_deg):
    sensor = SensorModel(rings=1, elev_min_deg=theta_deg, elev_max_deg=theta_deg, az_cols=16,
                         range_noise=0.0, mount_height=0.6)
    cloud = raycast_scan(World([(0, 0), (1, 0)]), [], Pose2(), sensor)
    rho = np.linalg.norm(cloud, axis=1)
    assert np.allclose(rho, 0.6 / math.sin(math.radians(-theta_deg)), rtol=1e-12)
    assert np.allclose(cloud[:, 2], -0.6)


def test_agent_replaces_wall_return():
    ped = AgentState(DynamicAgent(0.5, [(0.0, 3.0, 0.0)]))
    cloud = raycast_scan(ROOM, [ped], Pose2(), FLAT_RING)
    assert ahead(cloud)[0] == pytest.approx(2.5, abs=1e-9)


def test_ceiling_height_respected():
    low = World([(0, 0), (1, 0)], discs=[Disc((3.0, 0.0), 0.5, height=0.3)])
    cloud = raycast_scan(low, [], Pose2(), FLAT_RING)  # ring at 0.6 m passes over
    assert len(cloud) == 0 or np.min(np.abs(np.arctan2(cloud[:, 1], cloud[:, 0]))) > 0.1


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-math.pi, math.pi), st.integers(0, 100))
def test_ranges_within_limits(x, y, h, seed):
    sensor = SensorModel(az_cols=90, range_noise=0.5, max_range=8.0)
    cloud = raycast_scan(ROOM, [], Pose2(x, y, h), sensor, np.random.default_rng(seed))
    rho = np.linalg.norm(cloud, axis=1)
    assert np.all(rho >= 0) and np.all(rho <= 8.0 + 1e-9)


# --- kinematics --------------------------------------------------------------

def test_step_straight_and_stop():
    p = step_vehicle(Pose2(1, 2, 0.3), ControlAction(1.0, 0.0), VP, 1.0)
    assert (p.x, p.y, p.heading) == pytest.approx((1 + math.cos(0.3), 2 + math.sin(0.3), 0.3))
    q = Pose2(1, 2, 0.3)
    assert step_vehicle(q, ControlAction(0.0, 0.0), VP, 1.0) == q


@pytest.mark.parametrize("alpha,v", [(0.3, 1.0), (-0.45, 0.7), (0.1, -1.2)])
def test_constant_steering_traces_circle(alpha, v):
    R = VP.wheelbase / math.tan(alpha)
    pose, pts = Pose2(2.0, -1.0, 0.4), []
    cx, cy = 2.0 - R * math.sin(0.4), -1.0 + R * math.cos(0.4)
    for _ in range(400):
        pose = step_vehicle(pose, ControlAction(v, alpha), VP, 0.1)
        assert -math.pi < pose.heading <= math.pi
        pts.append((pose.x, pose.y))
    r = np.hypot(np.array(pts)[:, 0] - cx, np.array(pts)[:, 1] - cy)
    assert np.allclose(r, abs(R), atol=1e-6, rtol=0)


@given(st.floats(-0.45, 0.45), st.floats(-1.3, 1.3), st.floats(-math.pi, math.pi))
def test_heading_update_law(alpha, v, h):
    if v == 0:
        return
    p = step_vehicle(Pose2(0, 0, h), ControlAction(v, alpha), VP, 0.1)
    expect = h + v * 0.1 / VP.wheelbase * math.tan(alpha)
    assert abs(math.remainder(p.heading - expect, 2 * math.pi)) < 1e-9


# --- localization ------------------------------------------------------------

def test_localize_noiseless():
    m = LocalizationModel(0.0, 0.0)
    est = localize(Pose2(3, 4, 0.5), m, np.random.default_rng(0))
    assert est.mean == Pose2(3, 4, 0.5)


def test_localize_noise_std():
    m = LocalizationModel(sigma_xy=0.1, sigma_theta=0.0)
    rng = np.random.default_rng(7)
    xs = np.array([localize(Pose2(), m, rng).mean.x for _ in range(10000)])
    assert abs(xs.std() - 0.1) < 0.01


def test_bias_constant_without_walk():
    m = LocalizationModel(0.0, 0.0, bias_step=0.0, bias_decay=1.0, initial_bias=(0.3, -0.2))
    loc, rng = Localizer(m), np.random.default_rng(0)
    for _ in range(50):
        est = loc(Pose2(), rng)
        assert (est.mean.x, est.mean.y) == pytest.approx((0.3, -0.2))


def test_reported_covariance_dominates_noise():
    m = LocalizationModel(sigma_xy=3.0, sigma_theta=0.5)
    cov = m.covariance()
    assert cov[0, 0] >= 9.0 and cov[2, 2] >= 0.25


# --- OSM bias ----------------------------------------------------------------

def test_bias_zero_identity():
    g = straight_graph(0, 20, 5)
    assert inject_osm_bias(g, 0.0, 1.0) is g


def test_bias_shifts_nodes():
    g = straight_graph(0, 20, 5)
    b = inject_osm_bias(g, 1.0, math.pi / 2)
    for i in g.nodes:
        assert b.positions[i][1] - g.positions[i][1] == pytest.approx(1.0, abs=1e-12)
        assert b.positions[i][0] == pytest.approx(g.positions[i][0], abs=1e-12)
    assert b.links == g.links


def test_bias_preserves_plan():
    g = straight_graph(0, 40, 4)
    b = inject_osm_bias(g, 2.5, 0.7)
    off = 2.5 * np.array([math.cos(0.7), math.sin(0.7)])
    assert plan_global(g, (1, 0), (33, 0)).node_ids == plan_global(b, (1, 0) + off, (33, 0) + off).node_ids


# --- agents ------------------------------------------------------------------

def test_agent_interpolates_and_validates():
    a = DynamicAgent(0.3, [(0, 0, 0), (10, 10, -5)])
    assert a.position_at(5).tolist() == [5.0, -2.5]
    assert a.position_at(20).tolist() == [10.0, -5.0]
    with pytest.raises(ValueError):
        DynamicAgent(0.3, [(0, 0, 0), (0, 1, 1)])


def test_stop_in_front_holds():
    a = DynamicAgent(0.3, [(0, 3.0, -3.0), (10, 3.0, 3.0)], behavior="stop_in_front",
                     stop_distance=2.0, lateral_window=1.0, hold=2.0, max_stops=1)
    st_ = AgentState(a)
    ys = []
    for _ in range(100):
        st_.advance(0.1, Pose2(), VP)
        ys.append(st_.position[1])
    assert st_.stops == 1
    dy = np.diff(ys)
    assert np.sum(dy == 0) >= 19  # frozen for the hold period


def test_footprint_shape_area():
    assert footprint_shape(Pose2(3, 1, 0.7), VP).area == pytest.approx(VP.width * VP.length)
