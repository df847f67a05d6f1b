"""Ground removal, obstacle extraction and the free-space polygon."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGround
from .geometry import Plane3

MIN_GROUND_POINTS = 50


def as_cloud(points) -> np.ndarray:
    cloud = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(cloud)):
        raise ValueError("point cloud contains non-finite coordinates")
    return cloud


def read_point_cloud(path) -> np.ndarray:
    """Read ``x y z`` triples, one per line; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 values, got {len(parts)}")
            rows.append([float(v) for v in parts])
    return as_cloud(rows)


def write_point_cloud(path, cloud) -> None:
    np.savetxt(path, as_cloud(cloud), fmt="%.6f", header="x y z [m], sensor frame")


def cauchy_loss(residuals, scale: float) -> float:
    r = np.asarray(residuals) / scale
    return float(np.sum(scale ** 2 * np.log1p(r ** 2)))


def _weighted_plane(pts: np.ndarray, w: np.ndarray):
    wsum = w.sum()
    centroid = (w[:, None] * pts).sum(axis=0) / wsum
    q = pts - centroid
    scatter = (w[:, None] * q).T @ q
    evals, evecs = np.linalg.eigh(scatter)
    # rank-deficient scatter: collinear or coincident points pin no plane
    if evals[1] <= 1e-12 * max(evals[2], 1e-300) or evals[2] <= 0:
        raise DegenerateGround("ground candidates are collinear; plane is undetermined")
    n = evecs[:, 0]
    if n[2] < 0:
        n = -n
    return n, -float(n @ centroid)


def fit_ground_plane(cloud, iterations: int = 10, cauchy_scale: float = 0.05,
                     z_max: float = math.inf, history: Optional[list] = None) -> Plane3:
    """Robust ground plane by Cauchy-weighted iteratively reweighted least squares.

    Only points with ``z < z_max`` are candidates. The first solve is unweighted
    orthogonal least squares; each following one reweights by
    ``1 / (1 + (r / cauchy_scale)**2)`` on the point-to-plane residual ``r``.
    If ``history`` is given, the robust loss after each solve is appended to it.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cloud = as_cloud(cloud)
    pts = cloud[cloud[:, 2] < z_max]
    if len(pts) < MIN_GROUND_POINTS:
        raise DegenerateGround(f"only {len(pts)} ground candidates (< {MIN_GROUND_POINTS})")
    n, d = _weighted_plane(pts, np.ones(len(pts)))
    if history is not None:
        history.append(cauchy_loss(pts @ n + d, cauchy_scale))
    for _ in range(iterations):
        r = pts @ n + d
        w = 1.0 / (1.0 + (r / cauchy_scale) ** 2)
        n, d = _weighted_plane(pts, w)
        if history is not None:
            history.append(cauchy_loss(pts @ n + d, cauchy_scale))
    return Plane3(tuple(n), d)


@dataclass(frozen=True)
class GroundModel:
    plane: Plane3
    t0: float = 0.05  # [m] ground band at the sensor
    k: float = 0.01  # band growth per metre of horizontal range
    vehicle_height: float = 1.8  # [m] collision-risk ceiling above ground

    def __post_init__(self):
        if not self.t0 > 0 or self.k < 0 or not self.vehicle_height > 0:
            raise ValueError("GroundModel needs t0 > 0, k >= 0, vehicle_height > 0")

    def threshold(self, r):
        return self.t0 + self.k * np.asarray(r)


def extract_obstacles(cloud, gm: GroundModel) -> np.ndarray:
    cloud = as_cloud(cloud)
    s = gm.plane.signed_distance(cloud)
    t = gm.threshold(np.hypot(cloud[:, 0], cloud[:, 1]))
    keep = ((s > t) | (s < -t)) & (s <= gm.vehicle_height)
    return cloud[keep]


@dataclass(frozen=True)
class FrontViewImage:
    """Range image indexed by (elevation bin, azimuth bin); NaN marks an empty cell.

    ``horizontal`` holds the ground-plane range of the point stored in each cell.
    """

    rho: np.ndarray
    horizontal: np.ndarray
    elev_min: float
    elev_max: float

    @property
    def shape(self):
        return self.rho.shape

    @property
    def azimuths(self) -> np.ndarray:
        return column_azimuths(self.rho.shape[1])


def column_azimuths(n: int) -> np.ndarray:
    """Centres of ``n`` uniform bins over [-pi, pi); mirror-exact about zero."""
    return (np.arange(n) + 0.5 - n / 2.0) * (2.0 * math.pi / n)


def build_front_view(obstacles, rings: int = 16, az_cols: int = 900,
                     elev_min: float = math.radians(-16.0),
                     elev_max: float = math.radians(16.0)) -> FrontViewImage:
    if rings < 1 or az_cols < 4:
        raise ValueError("need rings >= 1 and az_cols >= 4")
    pts = as_cloud(obstacles)
    rho = np.linalg.norm(pts, axis=1)
    pts, rho = pts[rho > 0], rho[rho > 0]
    horiz = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    theta = np.arctan2(pts[:, 2], horiz)
    col = np.floor((phi + math.pi) / (2.0 * math.pi) * az_cols).astype(int) % az_cols
    row = np.floor((theta - elev_min) / (elev_max - elev_min) * rings).astype(int)
    row = np.clip(row, 0, rings - 1)
    img = np.full((rings, az_cols), np.nan)
    hor = np.full((rings, az_cols), np.nan)
    if len(pts):
        # write in descending range so the nearest point per cell lands last
        order = np.argsort(-rho, kind="stable")
        img[row[order], col[order]] = rho[order]
        hor[row[order], col[order]] = horiz[order]
    return FrontViewImage(img, hor, elev_min, elev_max)


@dataclass(frozen=True, eq=False)
class FreeSpacePolygon:
    """Star-shaped free region: one vertex per azimuth column, counterclockwise.

    ``is_obstacle`` flags vertices produced by an actual return (as opposed to
    columns that saw nothing and were pushed out to ``max_range``).
    """

    ranges: np.ndarray
    is_obstacle: np.ndarray
    max_range: float

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=float)
        if r.ndim != 1 or len(r) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if np.any(r <= 0) or np.any(r > self.max_range):
            raise ValueError("vertex ranges must lie in (0, max_range]")
        r.setflags(write=False)
        obs = np.asarray(self.is_obstacle, dtype=bool)
        obs.setflags(write=False)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "is_obstacle", obs)

    @classmethod
    def disc(cls, radius: float, n: int = 900) -> "FreeSpacePolygon":
        return cls(np.full(n, float(radius)), np.zeros(n, bool), float(radius))

    @classmethod
    def from_ranges(cls, ranges, max_range: float) -> "FreeSpacePolygon":
        """Ranges >= max_range (or inf / NaN) become empty columns."""
        r = np.asarray(ranges, dtype=float)
        obs = np.isfinite(r) & (r < max_range)
        return cls(np.where(obs, r, max_range), obs, float(max_range))

    @property
    def n(self) -> int:
        return len(self.ranges)

    @cached_property
    def azimuths(self) -> np.ndarray:
        return column_azimuths(self.n)

    @cached_property
    def vertices(self) -> np.ndarray:
        a = self.azimuths
        return np.column_stack([self.ranges * np.cos(a), self.ranges * np.sin(a)])

    @cached_property
    def obstacle_points(self) -> np.ndarray:
        return self.vertices[self.is_obstacle]

    @cached_property
    def obstacle_tree(self) -> Optional[cKDTree]:
        pts = self.obstacle_points
        return cKDTree(pts) if len(pts) else None

    def obstacle_distance(self, pts) -> np.ndarray:
        """Distance from each point to the nearest obstacle vertex (inf if none)."""
        pts = np.asarray(pts, dtype=float)
        tree = self.obstacle_tree
        if tree is None:
            return np.full(pts.shape[:-1], np.inf)
        d, _ = tree.query(pts.reshape(-1, 2))
        return d.reshape(pts.shape[:-1])

    def boundary_range(self, phi) -> np.ndarray:
        """Exact distance from the origin to the boundary along azimuth ``phi``."""
        phi = np.asarray(phi, dtype=float)
        n = self.n
        step = 2.0 * math.pi / n
        u = (wrap_pi(phi) + math.pi) / step - 0.5
        k0 = np.floor(u).astype(int) % n
        k1 = (k0 + 1) % n
        v0, v1 = self.vertices[k0], self.vertices[k1]
        e = v1 - v0
        c, s = np.cos(phi), np.sin(phi)
        num = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
        den = c * e[..., 1] - s * e[..., 0]
        return num / den

    def contains(self, pts) -> np.ndarray:
        """Strict interior test; boundary points count as outside."""
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        phi = np.arctan2(pts[..., 1], pts[..., 0])
        return r < self.boundary_range(phi)

    def area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]))


def wrap_pi(a):
    """Wrap into [-pi, pi) (used for azimuth binning)."""
    return np.mod(np.asarray(a) + math.pi, 2.0 * math.pi) - math.pi


def extract_free_space(img: FrontViewImage, max_range: float) -> FreeSpacePolygon:
    if not max_range > 0:
        raise ValueError("max_range must be > 0")
    rho = img.rho
    filled = np.isfinite(rho)
    col_has = filled.any(axis=0)
    masked = np.where(filled, rho, np.inf)
    row = np.argmin(masked, axis=0)
    horiz = img.horizontal[row, np.arange(rho.shape[1])]
    ranges = np.where(col_has, horiz, np.inf)
    ranges = np.where(ranges > 0, ranges, np.inf)
    return FreeSpacePolygon.from_ranges(ranges, max_range)


@dataclass
class PerceptionConfig:
    rings: int = 16
    az_cols: int = 900
    elev_min_deg: float = -16.0
    elev_max_deg: float = 16.0
    max_range: float = 30.0
    iterations: int = 10
    cauchy_scale: float = 0.05
    t0: float = 0.05
    k: float = 0.01
    vehicle_height: float = 1.8
    candidate_z_max: float = 0.0  # sensor frame: only points below the sensor seed the fit


def perceive(cloud, cfg: PerceptionConfig = PerceptionConfig(), ground: Optional[Plane3] = None):
    """Scan -> (ground plane, obstacle cloud, free-space polygon)."""
    cloud = as_cloud(cloud)
    if ground is None:
        ground = fit_ground_plane(cloud, cfg.iterations, cfg.cauchy_scale, cfg.candidate_z_max)
    gm = GroundModel(ground, cfg.t0, cfg.k, cfg.vehicle_height)
    obstacles = extract_obstacles(cloud, gm)
    img = build_front_view(obstacles, cfg.rings, cfg.az_cols,
                           math.radians(cfg.elev_min_deg), math.radians(cfg.elev_max_deg))
    return ground, obstacles, extract_free_space(img, cfg.max_range)
