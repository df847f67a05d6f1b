"""Per-scan local planning pipeline: scan -> free space -> local path -> action."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import STOP, Controller, ControllerConfig, ControlAction, VehicleParams
from .errors import DegenerateGround, EmptyPath, NoPath
from .geometry import Plane3
from .nvp import DEFAULT_XI, LocalPath, RingSpec, plan
from .perception import FreeSpacePolygon, PerceptionConfig, perceive
from .valley import PotentialParams, build_cost_grid, plan_dense_baseline


@dataclass
class PipelineConfig:
    planner: str = "nvp"  # "nvp" or "dense"
    ring_count: int = 4
    xi: float = DEFAULT_XI
    angular_samples: int = 360
    r_outer: Optional[float] = None  # default min(12, 0.9 * max_range)
    r_inner: Optional[float] = None  # default 1.5 * vehicle length
    potential: PotentialParams = field(default_factory=PotentialParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    dense_resolution: float = 0.2
    dense_spacing: float = 1.5  # [m] waypoint spacing when resampling the dense path

    def __post_init__(self):
        if self.planner not in ("nvp", "dense"):
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.ring_count < 2:
            raise ValueError("ring_count must be >= 2")
        if not self.xi > 0:
            raise ValueError("xi must be > 0")

    def ring_spec(self, vp: VehicleParams) -> RingSpec:
        r_out = self.r_outer if self.r_outer is not None else min(12.0, 0.9 * self.perception.max_range)
        r_in = self.r_inner if self.r_inner is not None else 1.5 * vp.length
        return RingSpec.uniform(self.ring_count, r_out, r_in, self.angular_samples)


def resample_dense_path(points: np.ndarray, spacing: float, max_len: float) -> LocalPath:
    """Turn a start->goal cell path into outer-first waypoints every ``spacing`` metres."""
    if len(points) < 2:
        return LocalPath.from_points(points[-1:]) if len(points) and np.hypot(*points[-1]) > 0 \
            else LocalPath.empty()
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    stations = np.arange(spacing, min(s[-1], max_len) + 1e-9, spacing)
    if len(stations) == 0:
        stations = np.array([s[-1]])
    xs = np.interp(stations, s, points[:, 0])
    ys = np.interp(stations, s, points[:, 1])
    return LocalPath.from_points(np.column_stack([xs, ys])[::-1])


class LocalPlanner:
    """Stateless per-scan planner wrapper that also times each stage."""

    def __init__(self, cfg: PipelineConfig, vp: VehicleParams):
        self.cfg, self.vp = cfg, vp
        self.spec = cfg.ring_spec(vp)
        self.controller = Controller(vp, cfg.controller)

    def perceive(self, cloud) -> FreeSpacePolygon:
        try:
            _, _, poly = perceive(cloud, self.cfg.perception)
        except DegenerateGround:
            # nothing to fit against: treat every return as an obstacle
            _, _, poly = perceive(cloud, self.cfg.perception, ground=Plane3((0, 0, 1), 1e6))
        return poly

    def local_path(self, poly: FreeSpacePolygon, goal) -> LocalPath:
        cfg = self.cfg
        if cfg.planner == "nvp":
            return plan(poly, goal, self.spec, cfg.potential, cfg.xi)
        grid = build_cost_grid(poly, goal, cfg.potential, cfg.dense_resolution,
                               extent=self.spec.radii[0])
        cells = plan_dense_baseline(grid, (0.0, 0.0), goal, snap=True)
        return resample_dense_path(cells, cfg.dense_spacing, self.spec.radii[0])

    def step(self, cloud, goal):
        """Returns (polygon, path or None, action, timings in ms)."""
        t0 = time.perf_counter()
        poly = self.perceive(cloud)
        t1 = time.perf_counter()
        try:
            path = self.local_path(poly, goal)
        except (EmptyPath, NoPath):
            path = None
        t2 = time.perf_counter()
        action = self.controller.act(poly, path) if path is not None else STOP
        t3 = time.perf_counter()
        timings = {"perception": 1e3 * (t1 - t0), "planner": 1e3 * (t2 - t1),
                   "control": 1e3 * (t3 - t2)}
        return poly, path, action, timings
