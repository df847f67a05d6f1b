"""Synthetic 2.5D world, VLP-16-like raycasting, vehicle kinematics and localization noise."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import shapely
from shapely.geometry import Point, Polygon

from ..control import ControlAction, VehicleParams
from ..geometry import Pose2, PoseEstimate, wrap_angle
from ..osm import RoadGraph
from ..perception import column_azimuths


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float
    height: float = 2.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def shape(self):
        return Point(*self.center).buffer(self.radius, quad_segs=32)


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple  # counterclockwise (x, y) pairs
    height: float = 2.0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ValueError("polygon needs >= 3 (x, y) vertices")
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - v[:, 1] * np.roll(v[:, 0], -1))
        if abs(area) < 1e-9:
            raise ValueError("degenerate polygon")
        if area < 0:
            v = v[::-1]
        object.__setattr__(self, "vertices", tuple((float(a), float(b)) for a, b in v))

    @classmethod
    def box(cls, xmin, ymin, xmax, ymax, height: float = 2.0) -> "ConvexPolygon":
        return cls(((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)), height)

    def shape(self):
        return Polygon(self.vertices)


@dataclass
class World:
    centerline: np.ndarray
    discs: list = field(default_factory=list)
    polygons: list = field(default_factory=list)
    bounds: Optional[tuple] = None  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float).reshape(-1, 2)
        if len(self.centerline) < 2:
            raise ValueError("centerline needs at least 2 vertices")
        self._shapes = [s.shape() for s in self.obstacles]
        self._union = shapely.union_all(self._shapes) if self._shapes else None

    @property
    def obstacles(self) -> list:
        return list(self.polygons) + list(self.discs)

    @property
    def union(self):
        """Union of all static shapes (None for an empty world)."""
        return self._union

    def inside_bounds(self, p) -> bool:
        if self.bounds is None:
            return True
        x0, y0, x1, y1 = self.bounds
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


@dataclass
class DynamicAgent:
    """Disc obstacle following linearly interpolated (t, x, y) keyframes.

    With ``behavior="stop_in_front"`` the script clock freezes for ``hold``
    seconds whenever the agent enters the zone ``stop_distance`` ahead of the
    vehicle's front bumper (at most ``max_stops`` times).
    """

    radius: float
    keyframes: np.ndarray
    behavior: str = "scripted"
    height: float = 1.8
    stop_distance: float = 2.0
    lateral_window: float = 1.0
    hold: float = 3.0
    max_stops: int = 2

    def __post_init__(self):
        self.keyframes = np.asarray(self.keyframes, dtype=float).reshape(-1, 3)
        if len(self.keyframes) < 1:
            raise ValueError("agent needs at least one keyframe")
        if np.any(np.diff(self.keyframes[:, 0]) <= 0):
            raise ValueError("keyframe times must be strictly increasing")
        if self.behavior not in ("scripted", "stop_in_front"):
            raise ValueError(f"unknown agent behavior {self.behavior!r}")
        if not self.radius > 0:
            raise ValueError("agent radius must be > 0")

    def position_at(self, tau: float) -> np.ndarray:
        k = self.keyframes
        return np.array([np.interp(tau, k[:, 0], k[:, 1]), np.interp(tau, k[:, 0], k[:, 2])])


class AgentState:
    """Mutable per-episode state of a DynamicAgent."""

    def __init__(self, agent: DynamicAgent):
        self.agent = agent
        self.tau = 0.0
        self.hold_left = 0.0
        self.stops = 0
        self.in_zone = False
        self.position = agent.position_at(0.0)

    def advance(self, dt: float, vehicle: Pose2, vp: VehicleParams):
        a = self.agent
        if a.behavior == "stop_in_front":
            local = vehicle.to_local(self.position)
            front = vp.length - vp.rear_overhang
            zone = (front < local[0] - a.radius < front + a.stop_distance
                    and abs(local[1]) < vp.width / 2 + a.lateral_window)
            if zone and not self.in_zone and self.stops < a.max_stops and self.hold_left <= 0:
                self.hold_left = a.hold
                self.stops += 1
            self.in_zone = zone
        if self.hold_left > 0:
            self.hold_left -= dt
        else:
            self.tau += dt
        self.position = a.position_at(self.tau)

    def shape(self):
        return Point(*self.position).buffer(self.agent.radius, quad_segs=16)


@dataclass(frozen=True)
class SensorModel:
    rings: int = 16
    elev_min_deg: float = -15.0
    elev_max_deg: float = 15.0
    az_cols: int = 900
    max_range: float = 30.0
    range_noise: float = 0.01  # [m] std
    mount_height: float = 0.6  # [m]

    def __post_init__(self):
        if not self.max_range > 0 or self.range_noise < 0:
            raise ValueError("sensor needs max_range > 0 and range_noise >= 0")

    @property
    def elevations(self) -> np.ndarray:
        if self.rings == 1:
            return np.array([math.radians(self.elev_min_deg)])
        return np.radians(np.linspace(self.elev_min_deg, self.elev_max_deg, self.rings))

    @property
    def azimuths(self) -> np.ndarray:
        return column_azimuths(self.az_cols)

    def directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame, shape (rings * az_cols, 3)."""
        el, az = np.meshgrid(self.elevations, self.azimuths, indexing="ij")
        d = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)
        return d.reshape(-1, 3)

    def image_bounds(self):
        """Elevation span (deg) whose uniform bins are centred on the rings."""
        half = 0.5 * (self.elev_max_deg - self.elev_min_deg) / max(self.rings - 1, 1)
        return self.elev_min_deg - half, self.elev_max_deg + half


def _ray_disc(ox, oy, dx, dy, cx, cy, r):
    """Smallest positive t with |o + t d - c| = r, per ray (d horizontal, not unit)."""
    fx, fy = ox - cx, oy - cy
    a = dx * dx + dy * dy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - r * r
    disc = b * b - 4.0 * a * c
    t = np.full(dx.shape, np.inf)
    ok = (disc >= 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-b - sq) / (2.0 * a)
    t[ok & (t1 > 1e-9)] = t1[ok & (t1 > 1e-9)]
    return t


def _ray_polygon(ox, oy, dx, dy, verts):
    t = np.full(dx.shape, np.inf)
    v = np.asarray(verts, dtype=float)
    for k in range(len(v)):
        ax, ay = v[k]
        bx, by = v[(k + 1) % len(v)]
        ex, ey = bx - ax, by - ay
        den = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = ((ax - ox) * ey - (ay - oy) * ex) / den
            uu = ((ax - ox) * dy - (ay - oy) * dx) / den
        hit = (den != 0) & (tt > 1e-9) & (uu >= 0) & (uu <= 1)
        t = np.where(hit & (tt < t), tt, t)
    return t


def raycast_scan(world: World, agents: Sequence, pose: Pose2, sensor: SensorModel,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Simulated scan in the sensor frame (x forward, y left, z up), one point per hit."""
    d = sensor.directions()
    h = sensor.mount_height
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    dx = c * d[:, 0] - s * d[:, 1]
    dy = s * d[:, 0] + c * d[:, 1]
    dz = d[:, 2]
    t = np.full(len(d), np.inf)
    down = dz < 0
    t[down] = h / -dz[down]
    shapes = [(o, o.height) for o in world.obstacles]
    shapes += [(Disc(tuple(a.position), a.agent.radius, a.agent.height), a.agent.height)
               for a in agents]
    for obj, height in shapes:
        if isinstance(obj, Disc):
            tt = _ray_disc(pose.x, pose.y, dx, dy, obj.center[0], obj.center[1], obj.radius)
        else:
            tt = _ray_polygon(pose.x, pose.y, dx, dy, obj.vertices)
        hit = np.isfinite(tt)
        z = np.where(hit, h + np.where(hit, tt, 0.0) * dz, np.nan)
        valid = hit & (z >= 0.0) & (z <= height)
        t = np.where(valid & (tt < t), tt, t)
    if rng is not None and sensor.range_noise > 0:
        t = t + rng.normal(0.0, sensor.range_noise, size=t.shape)
    hit = np.isfinite(t) & (t <= sensor.max_range)
    t = np.clip(t[hit], 0.0, sensor.max_range)
    return d[hit] * t[:, None]


def step_vehicle(pose: Pose2, action: ControlAction, vp: VehicleParams, dt: float) -> Pose2:
    """Exact kinematic bicycle update about the rear axle."""
    ds = action.v * dt
    if ds == 0.0:
        return pose
    if action.alpha == 0.0:
        return Pose2(pose.x + ds * math.cos(pose.heading), pose.y + ds * math.sin(pose.heading),
                     pose.heading)
    R = vp.wheelbase / math.tan(action.alpha)
    th0 = pose.heading
    th1 = th0 + ds / R
    return Pose2(pose.x + R * (math.sin(th1) - math.sin(th0)),
                 pose.y - R * (math.cos(th1) - math.cos(th0)), th1)


@dataclass
class LocalizationModel:
    sigma_xy: float = 0.15  # [m]
    sigma_theta: float = 0.02  # [rad]
    bias_step: float = 0.0  # [m] random-walk increment std
    bias_decay: float = 1.0
    initial_bias: tuple = (0.0, 0.0)
    reported_sigma_xy: float = 2.0  # [m]; floor on the reported positional std
    reported_sigma_theta: float = 0.1

    def __post_init__(self):
        for name in ("sigma_xy", "sigma_theta", "bias_step", "reported_sigma_xy",
                     "reported_sigma_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def covariance(self) -> np.ndarray:
        sxy = max(self.reported_sigma_xy, self.sigma_xy)
        sth = max(self.reported_sigma_theta, self.sigma_theta)
        return np.diag([sxy ** 2, sxy ** 2, sth ** 2])


class Localizer:
    """Stateful noisy localization: white noise plus a first-order bias walk."""

    def __init__(self, model: LocalizationModel):
        self.model = model
        self.bias = np.array(model.initial_bias, dtype=float)

    def __call__(self, true_pose: Pose2, rng: np.random.Generator) -> PoseEstimate:
        return localize(true_pose, self.model, rng, self)


def localize(true_pose: Pose2, model: LocalizationModel, rng: np.random.Generator,
             state: Optional[Localizer] = None) -> PoseEstimate:
    if state is None:
        state = Localizer(model)
    m = model
    bias = state.bias
    noise = rng.normal(0.0, 1.0, size=3) * np.array([m.sigma_xy, m.sigma_xy, m.sigma_theta])
    mean = Pose2(true_pose.x + bias[0] + noise[0], true_pose.y + bias[1] + noise[1],
                 true_pose.heading + noise[2])
    state.bias = m.bias_decay * bias + rng.normal(0.0, 1.0, size=2) * m.bias_step
    return PoseEstimate(mean, m.covariance())


def inject_osm_bias(graph: RoadGraph, lateral_offset: float, bearing: float) -> RoadGraph:
    """Translate every node by ``lateral_offset`` metres towards ``bearing``."""
    if lateral_offset == 0:
        return graph
    off = lateral_offset * np.array([math.cos(bearing), math.sin(bearing)])
    pos = {i: graph.positions[i] + off for i in graph.nodes}
    return RoadGraph.from_local(pos, graph.links, graph.origin)


def footprint_shape(pose: Pose2, vp: VehicleParams, margin: float = 0.0):
    return Polygon(pose.to_world(vp.footprint(margin)))
