"""Closed-loop episodes: scan, perceive, plan, act, step, once per sample period."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..control import VehicleParams
from ..geometry import Pose2, polyline_distance
from ..osm import GlobalPath, GoalSequencer, RoadGraph, plan_global
from ..perception import FreeSpacePolygon
from ..pipeline import LocalPlanner, PipelineConfig
from .scenario import Scenario, pipeline_config
from .world import AgentState, Localizer, footprint_shape, raycast_scan, step_vehicle

STATUSES = ("finished", "collision", "stall", "timeout")
STALL_SPEED = 1e-3  # [m/s]


def route(graph: RoadGraph, start: Pose2, goals) -> GlobalPath:
    """Global path through every goal in order, starting at the node nearest the vehicle.

    A leading node that lies behind the vehicle along the first link is dropped,
    so the vehicle does not turn around to touch it.
    """
    ids, pts = [], []
    here = start.position
    for g in goals:
        gp = plan_global(graph, here, g)
        for i, p in zip(gp.node_ids, gp.points):
            if ids and ids[-1] == i:
                continue
            ids.append(i)
            pts.append(p)
        here = gp.points[-1]
    if len(pts) > 1:
        d = pts[1] - pts[0]
        if np.dot(d, start.position - pts[0]) > 0:
            ids, pts = ids[1:], pts[1:]
    return GlobalPath(tuple(ids), np.array(pts))


@dataclass
class StepRecord:
    t: float
    true_pose: tuple  # x, y, heading
    est_pose: tuple
    deviation: float
    v: float
    alpha: float
    goal: Optional[tuple]  # world frame
    waypoints: list  # local frame, outer ring first
    waypoints_inside: bool
    timings: dict  # [ms]
    clearance: float


@dataclass
class EpisodeLog:
    scenario: str
    seed: int
    planner: str
    ring_count: int
    dt: float
    status: str = "timeout"
    steps: list = field(default_factory=list)
    collisions: int = 0
    goals_popped: int = 0
    wall_time: float = 0.0  # [s]
    # optional per-step inputs for offline benchmarking
    polygons: Optional[list] = None  # ranges arrays
    local_goals: Optional[list] = None
    max_range: float = 30.0

    def __len__(self):
        return len(self.steps)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.true_pose[:2] for s in self.steps]).reshape(-1, 2)

    @property
    def deviations(self) -> np.ndarray:
        return np.array([s.deviation for s in self.steps])

    @property
    def actions(self) -> np.ndarray:
        return np.array([(s.v, s.alpha) for s in self.steps]).reshape(-1, 2)

    def polygon(self, k: int) -> FreeSpacePolygon:
        return FreeSpacePolygon.from_ranges(self.polygons[k], self.max_range)

    def to_dict(self, include_inputs: bool = False) -> dict:
        d = {k: getattr(self, k) for k in ("scenario", "seed", "planner", "ring_count", "dt",
                                           "status", "collisions", "goals_popped", "wall_time",
                                           "max_range")}
        d["steps"] = [dict(s.__dict__) for s in self.steps]
        if include_inputs and self.polygons is not None:
            d["polygons"] = [np.asarray(p).tolist() for p in self.polygons]
            d["local_goals"] = [list(g) for g in self.local_goals]
        return d

    def save(self, path, include_inputs: bool = False) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(include_inputs), fh)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeLog":
        steps = [StepRecord(**{**s, "true_pose": tuple(s["true_pose"]),
                               "est_pose": tuple(s["est_pose"]),
                               "goal": tuple(s["goal"]) if s["goal"] is not None else None})
                 for s in d["steps"]]
        kw = {k: d[k] for k in ("scenario", "seed", "planner", "ring_count", "dt", "status",
                                "collisions", "goals_popped", "wall_time")}
        log = cls(**kw, steps=steps, max_range=d.get("max_range", 30.0))
        if "polygons" in d:
            log.polygons = [np.array(p) for p in d["polygons"]]
            log.local_goals = [np.array(g) for g in d["local_goals"]]
        return log

    @classmethod
    def load(cls, path) -> "EpisodeLog":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _pose_tuple(p: Pose2) -> tuple:
    return (float(p.x), float(p.y), float(p.heading))


def _clearance(body, world_union, agent_shapes) -> float:
    d = [float(body.distance(s)) for s in agent_shapes]
    if world_union is not None:
        d.append(float(body.distance(world_union)))
    return min(d) if d else float("inf")


def run_episode(scn: Scenario, cfg: Optional[PipelineConfig] = None, seed: Optional[int] = None,
                record_inputs: bool = False, on_step=None) -> EpisodeLog:
    """Run one closed-loop episode.

    ``record_inputs`` keeps each step's free-space ranges and local goal so the
    planners can later be timed on identical inputs. ``on_step`` is called with
    ``(k, polygon, path)`` after every planning cycle.
    """
    cfg = cfg or pipeline_config(scn)
    seed = scn.sim.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    vp: VehicleParams = scn.vehicle
    planner = LocalPlanner(cfg, vp)
    dt = scn.sim.dt
    pose = scn.start_pose
    localizer = Localizer(scn.localization)
    agents = [AgentState(a) for a in scn.agents]
    seq = GoalSequencer(route(scn.graph, pose, scn.goals), scn.md_threshold)
    union = scn.world.union
    log = EpisodeLog(scn.name, int(seed), cfg.planner, cfg.ring_count, dt,
                     max_range=cfg.perception.max_range)
    if record_inputs:
        log.polygons, log.local_goals = [], []
    still_since = 0.0
    n_steps = int(round(scn.sim.timeout / dt))
    t_start = time.perf_counter()
    for k in range(n_steps):
        t = k * dt
        est = localizer(pose, rng)
        goal = seq.current_goal(est)
        log.goals_popped = seq.popped
        if goal is None:
            log.status = "finished"
            break
        cloud = raycast_scan(scn.world, agents, pose, scn.sensor, rng)
        goal_local = est.mean.to_local(goal)
        poly, path, action, timings = planner.step(cloud, goal_local)
        if log.polygons is not None:
            log.polygons.append(poly.ranges.copy())
            log.local_goals.append(np.asarray(goal_local, dtype=float))
        if on_step is not None:
            on_step(k, poly, path)
        wps = [] if path is None else [[float(a), float(b)] for a, b in path.points]
        inside = True if path is None else bool(poly.contains(path.points).all())
        body = footprint_shape(pose, vp)
        agent_shapes = [a.shape() for a in agents]
        log.steps.append(StepRecord(
            t=round(t, 9), true_pose=_pose_tuple(pose), est_pose=_pose_tuple(est.mean),
            deviation=float(polyline_distance(pose.position[None], scn.world.centerline)[0]),
            v=float(action.v), alpha=float(action.alpha), goal=(float(goal[0]), float(goal[1])),
            waypoints=wps, waypoints_inside=inside, timings=timings,
            clearance=_clearance(body, union, agent_shapes)))

        pose = step_vehicle(pose, action, vp, dt)
        for a in agents:
            a.advance(dt, pose, vp)
        body = footprint_shape(pose, vp)
        hit = (union is not None and body.intersects(union)) or \
            any(body.intersects(a.shape()) for a in agents)
        if hit:
            log.collisions += 1
            log.status = "collision"
            break
        if abs(action.v) < STALL_SPEED:
            still_since += dt
            if still_since > scn.sim.stall_window + 1e-9:
                log.status = "stall"
                break
        else:
            still_since = 0.0
    else:
        # the loop ran out of time; a final check catches arrival on the last step
        if seq.current_goal(localizer(pose, rng)) is None:
            log.status = "finished"
    log.goals_popped = seq.popped
    log.wall_time = time.perf_counter() - t_start
    return log
