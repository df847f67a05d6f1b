"""Naive-Valley-Path local planner: 1D potentials on concentric rings, chained outside-in."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyPath
from .perception import FreeSpacePolygon
from .valley import PotentialParams, potential

DEFAULT_XI = 0.02


@dataclass(frozen=True)
class RingSpec:
    radii: tuple  # strictly descending, outer ring first
    angular_samples: int = 360

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ValueError("need at least one ring")
        if any(r <= 0 for r in radii) or any(a <= b for a, b in zip(radii, radii[1:])):
            raise ValueError(f"radii must be positive and strictly descending: {radii}")
        if self.angular_samples < 16:
            raise ValueError("angular_samples must be >= 16")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def uniform(cls, ring_count: int, r_outer: float, r_inner: float,
                angular_samples: int = 360) -> "RingSpec":
        if ring_count == 1:
            return cls((r_outer,), angular_samples)
        return cls(tuple(np.linspace(r_outer, r_inner, ring_count)), angular_samples)

    @classmethod
    def default(cls, ring_count: int, max_range: float, vehicle_length: float,
                angular_samples: int = 360) -> "RingSpec":
        return cls.uniform(ring_count, min(12.0, 0.9 * max_range), 1.5 * vehicle_length,
                           angular_samples)

    @property
    def ring_count(self) -> int:
        return len(self.radii)


def ring_angles(n: int) -> np.ndarray:
    """Uniform samples over [-pi, pi), starting at -pi; mirror-exact about zero."""
    return (np.arange(n) - n / 2.0) * (2.0 * math.pi / n)


@dataclass(frozen=True, eq=False)
class RingCost:
    radius: float
    angles: np.ndarray
    points: np.ndarray
    values: np.ndarray  # +inf outside the free-space polygon
    inside: np.ndarray

    @property
    def step(self) -> float:
        return 2.0 * math.pi / len(self.angles)


def ring_cost(poly: FreeSpacePolygon, goal, radius: float,
              params: PotentialParams = PotentialParams(), angular_samples: int = 360) -> RingCost:
    if not radius > 0:
        raise ValueError("radius must be > 0")
    phi = ring_angles(angular_samples)
    pts = np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])
    inside = poly.contains(pts)
    p = params if poly.obstacle_tree is not None else \
        PotentialParams(0.0, params.w_a, params.gamma_r, params.gamma_a, params.eps_dist)
    d_r = poly.obstacle_distance(pts)
    d_a = np.hypot(pts[:, 0] - goal[0], pts[:, 1] - goal[1])
    values = np.where(inside, potential(d_r, d_a, p), np.inf)
    return RingCost(float(radius), phi, pts, values, inside)


def ring_gradient(rc: RingCost) -> np.ndarray:
    """Circular central difference per unit arc length (NaN next to infinite cost)."""
    f = rc.values
    with np.errstate(invalid="ignore"):
        g = (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * rc.step * rc.radius)
    return np.where(np.isfinite(g), g, np.nan)


def ring_extrema(f: np.ndarray):
    """(ridge, trough) flags over the circular 3-sample window (+inf is outside)."""
    prev, nxt = np.roll(f, 1), np.roll(f, -1)
    with np.errstate(invalid="ignore"):
        ridge = (f >= prev) & (f >= nxt) & ((f > prev) | (f > nxt))
        trough = (f <= prev) & (f <= nxt) & ((f < prev) | (f < nxt))
    return ridge, trough


def ring_valleys(rc: RingCost, xi: float = DEFAULT_XI) -> np.ndarray:
    """Indices of valley samples: small gradient or a trough, never a ridge or outside."""
    if not xi > 0:
        raise ValueError("xi must be > 0")
    g = ring_gradient(rc)
    ridge, trough = ring_extrema(rc.values)
    finite = np.isfinite(rc.values)
    # a trough may sit against the polygon boundary but not on an isolated sample
    trough &= finite & (np.isfinite(np.roll(rc.values, 1)) | np.isfinite(np.roll(rc.values, -1)))
    small = np.abs(np.where(np.isnan(g), np.inf, g)) < xi
    flags = finite & (small | trough) & ~ridge
    return np.flatnonzero(flags)


@dataclass(frozen=True, eq=False)
class LocalPath:
    points: np.ndarray  # (K, 2), outer ring first
    headings: np.ndarray  # (K,)
    rings: np.ndarray  # (K,) source ring index

    def __len__(self):
        return len(self.points)

    @classmethod
    def empty(cls) -> "LocalPath":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0, dtype=int))

    @classmethod
    def from_points(cls, points, rings=None) -> "LocalPath":
        """Headings point from each waypoint towards the previous (outer) one."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        k = len(pts)
        headings = np.zeros(k)
        if k == 1:
            headings[0] = math.atan2(pts[0, 1], pts[0, 0])
        elif k > 1:
            d = pts[:-1] - pts[1:]
            h = np.arctan2(d[:, 1], d[:, 0])
            headings[1:] = h
            headings[0] = h[0]
        if rings is None:
            rings = np.arange(k)
        return cls(pts, headings, np.asarray(rings, dtype=int))


def chain_nvp(rings: Sequence, goal) -> LocalPath:
    """Chain valley samples: outer one nearest the goal, then nearest neighbour inwards.

    ``rings`` holds ``(RingCost, valley_indices)`` pairs ordered outer to inner.
    Ties go to the smaller sample index.
    """
    goal = np.asarray(goal, dtype=float)
    pts, src = [], []
    for k, (rc, idx) in enumerate(rings):
        idx = np.sort(np.asarray(idx, dtype=int))
        if len(idx) == 0:
            continue
        cand = rc.points[idx]
        ref = goal if not pts else pts[-1]
        d = np.hypot(cand[:, 0] - ref[0], cand[:, 1] - ref[1])
        pts.append(cand[int(np.argmin(d))])
        src.append(k)
    if not pts:
        raise EmptyPath("no ring has a valley sample")
    return LocalPath.from_points(np.array(pts), src)


def plan(poly: FreeSpacePolygon, goal, spec: RingSpec, params: PotentialParams = PotentialParams(),
         xi: float = DEFAULT_XI) -> LocalPath:
    rings = []
    for r in spec.radii:
        rc = ring_cost(poly, goal, r, params, spec.angular_samples)
        rings.append((rc, ring_valleys(rc, xi)))
    return chain_nvp(rings, goal)


def write_path(path, lp: LocalPath) -> None:
    with open(path, "w") as fh:
        fh.write("# k x y heading\n")
        for k, (p, h) in enumerate(zip(lp.points, lp.headings)):
            fh.write(f"{k} {p[0]:.6f} {p[1]:.6f} {h:.6f}\n")


def read_path(path) -> LocalPath:
    rows = np.loadtxt(path, comments="#", ndmin=2)
    if rows.size == 0:
        return LocalPath.empty()
    return LocalPath(rows[:, 1:3].copy(), rows[:, 3].copy(), np.arange(len(rows)))
