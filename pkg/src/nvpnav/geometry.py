"""Planar poses, geodetic projection and small geometric helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGeoPoint, SingularCovariance

EARTH_RADIUS = 6378137.0  # [m], WGS84 equatorial


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    w = np.where(w <= -math.pi, w + 2.0 * math.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


class Point2(NamedTuple):
    x: float
    y: float


class Point3(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0  # [m] world frame
    y: float = 0.0
    heading: float = 0.0  # [rad], normalized into (-pi, pi]

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, other: "Pose2") -> "Pose2":
        """``self * other``: ``other`` expressed in this pose's frame, mapped out."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Pose2(self.x + c * other.x - s * other.y,
                     self.y + s * other.x + c * other.y,
                     self.heading + other.heading)

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.heading), math.sin(self.heading)
        return Pose2(-c * self.x - s * self.y, s * self.x - c * self.y, -self.heading)

    def to_world(self, pts) -> np.ndarray:
        """Map points from this pose's local frame into the parent frame."""
        pts = np.asarray(pts, dtype=float)
        c, s = math.cos(self.heading), math.sin(self.heading)
        out = np.empty_like(pts)
        out[..., 0] = self.x + c * pts[..., 0] - s * pts[..., 1]
        out[..., 1] = self.y + s * pts[..., 0] + c * pts[..., 1]
        return out

    def to_local(self, pts) -> np.ndarray:
        """Map parent-frame points into this pose's local frame."""
        pts = np.asarray(pts, dtype=float)
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx = pts[..., 0] - self.x
        dy = pts[..., 1] - self.y
        out = np.empty_like(pts)
        out[..., 0] = c * dx + s * dy
        out[..., 1] = -s * dx + c * dy
        return out


@dataclass(frozen=True)
class PoseEstimate:
    mean: Pose2
    covariance: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-9:
            raise ValueError("covariance must be positive semi-definite")
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True)
class GeoPoint:
    lat: float  # [deg]
    lon: float  # [deg]

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidGeoPoint(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidGeoPoint(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InvalidGeoPoint(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Plane3:
    """Plane ``n . p + d = 0`` with unit normal ``n``."""

    normal: tuple
    d: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not norm > 0:
            raise ValueError("plane normal must be nonzero")
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "d", float(self.d) / norm)

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ np.asarray(self.normal) + self.d


def _check_polar(p: GeoPoint):
    if abs(p.lat) >= 89.0:
        raise InvalidGeoPoint(f"latitude {p.lat} too close to a pole for the planar projection")


def geo_to_local(origin: GeoPoint, p: GeoPoint) -> Point2:
    """Equirectangular projection of ``p`` into a metric frame centred at ``origin``."""
    _check_polar(origin)
    _check_polar(p)
    dlon = math.radians(p.lon - origin.lon)
    dlat = math.radians(p.lat - origin.lat)
    return Point2(EARTH_RADIUS * dlon * math.cos(math.radians(origin.lat)),
                  EARTH_RADIUS * dlat)


def local_to_geo(origin: GeoPoint, q) -> GeoPoint:
    _check_polar(origin)
    lat = origin.lat + math.degrees(q[1] / EARTH_RADIUS)
    lon = origin.lon + math.degrees(q[0] / (EARTH_RADIUS * math.cos(math.radians(origin.lat))))
    return GeoPoint(lat, lon)


def mahalanobis_distance(goal, est: PoseEstimate) -> float:
    """Distance from ``goal`` to the estimate using only the positional covariance."""
    cov = est.covariance[:2, :2]
    if np.linalg.det(cov) <= 1e-12:
        raise SingularCovariance(f"positional covariance is singular (det={np.linalg.det(cov):.3g})")
    delta = np.array([goal[0] - est.mean.x, goal[1] - est.mean.y], dtype=float)
    scale = float(np.abs(delta).max())
    if scale == 0.0:
        return 0.0
    u = delta / scale  # keeps tiny offsets from underflowing to zero
    return scale * float(math.sqrt(max(u @ np.linalg.solve(cov, u), 0.0)))


def point_in_polygon(pts, poly) -> np.ndarray:
    """Even-odd rule containment for a simple polygon given as an (M, 2) array."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    poly = np.asarray(poly, dtype=float)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = np.sum(straddle & (x < xc), axis=1)
    return crossings % 2 == 1


def point_segment_distance(pts, a, b) -> np.ndarray:
    """Distance from each point to the segment ``a``-``b``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)


def polyline_distance(pts, polyline) -> np.ndarray:
    """Unsigned distance from each point to the nearest segment of a polyline."""
    polyline = np.asarray(polyline, dtype=float)
    d = np.full(len(np.atleast_2d(pts)), np.inf)
    for a, b in zip(polyline[:-1], polyline[1:]):
        d = np.minimum(d, point_segment_distance(pts, a, b))
    return d


def polyline_station(pts, polyline) -> np.ndarray:
    """Arc-length coordinate of each point's projection onto a polyline."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    polyline = np.asarray(polyline, dtype=float)
    best = np.full(len(pts), np.inf)
    station = np.zeros(len(pts))
    s0 = 0.0
    for a, b in zip(polyline[:-1], polyline[1:]):
        ab = b - a
        seg_len = float(np.hypot(*ab))
        t = np.clip((pts - a) @ ab / (seg_len ** 2), 0.0, 1.0)
        d = np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)
        better = d < best
        best[better] = d[better]
        station[better] = s0 + t[better] * seg_len
        s0 += seg_len
    return station
