"""Scenario files: YAML sections describing world, graph, vehicle, sensor, agents, goals.

Grammar (every key optional unless marked required; unknown keys are rejected)::

    world:                      # required
      centerline: [[x, y], ...] # required, >= 2 vertices, metres
      bounds: [xmin, ymin, xmax, ymax]
      discs:    [{center: [x, y], radius: r, height: h}]
      polygons: [{vertices: [[x, y], ...], height: h}]
    graph:                      # required
      origin: [lat, lon]        # local frame origin (default: first node)
      text: "N 1 lat lon\\nL 1 2"  # plain-text graph, or
      osm_file: roads.osm       # OSM XML, path relative to the scenario file
      subsample: 0.0            # min spacing for chain subsampling [m]
      bias: {offset: 1.0, bearing: 1.5708}
    vehicle:  {wheelbase, width, length, rear_overhang, alpha_max, v_max, v_min, safety_margin}
    sensor:   {rings, elev_min_deg, elev_max_deg, az_cols, max_range, range_noise, mount_height}
    localization: {sigma_xy, sigma_theta, bias_step, bias_decay, initial_bias,
                   reported_sigma_xy, reported_sigma_theta}
    agents:   [{radius, keyframes: [[t, x, y], ...], behavior, height, stop_distance,
                lateral_window, hold, max_stops}]
    goals:                      # required
      local: [[x, y], ...]      # or geo: [[lat, lon], ...]
      md_threshold: 1.5
    sim:      {dt, seed, timeout, stall_window, start: [x, y, heading]}
    planner:  {ring_count, xi, w_r, w_a, gamma_r, gamma_a, eps_dist, angular_samples,
               r_outer, r_inner, c_p, c_o, steering_samples, arc_length}
"""
from __future__ import annotations

import copy
import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from ..control import ControllerConfig, VehicleParams
from ..errors import NavError, ScenarioError
from ..geometry import GeoPoint, Pose2, geo_to_local
from ..osm import RoadGraph, format_graph_text, parse_graph_text, parse_osm, subsample_graph
from ..pipeline import PipelineConfig
from ..valley import PotentialParams
from .world import ConvexPolygon, Disc, DynamicAgent, LocalizationModel, SensorModel, World, \
    inject_osm_bias


@dataclass
class SimConfig:
    dt: float = 0.1  # [s]
    seed: int = 0
    timeout: float = 120.0  # [s] simulated
    stall_window: float = 5.0  # [s]
    start: tuple = (0.0, 0.0, 0.0)


PLANNER_KEYS = {
    "ring_count", "xi", "w_r", "w_a", "gamma_r", "gamma_a", "eps_dist", "angular_samples",
    "r_outer", "r_inner", "c_p", "c_o", "steering_samples", "arc_length", "planner",
}


@dataclass
class Scenario:
    world: World
    graph: RoadGraph  # as planned on, i.e. after subsampling and bias
    goals: list  # local-frame points
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    sensor: SensorModel = field(default_factory=SensorModel)
    localization: LocalizationModel = field(default_factory=LocalizationModel)
    agents: list = field(default_factory=list)
    sim: SimConfig = field(default_factory=SimConfig)
    md_threshold: float = 1.5
    planner: dict = field(default_factory=dict)
    name: str = "scenario"
    bias: tuple = (0.0, 0.0)  # (offset, bearing) already applied to ``graph``
    true_graph: Optional[RoadGraph] = None

    @property
    def start_pose(self) -> Pose2:
        return Pose2(*self.sim.start)


def pipeline_config(scn: Scenario, **overrides) -> PipelineConfig:
    """PipelineConfig from the scenario's planner section plus explicit overrides."""
    p = {**scn.planner, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = set(p) - PLANNER_KEYS - {"planner", "perception"}
    if unknown:
        raise ScenarioError([f"planner.{k}: unknown key" for k in sorted(unknown)])
    pot = PotentialParams(p.get("w_r", 1.0), p.get("w_a", 1.0), p.get("gamma_r", 2.0),
                          p.get("gamma_a", 1.0), p.get("eps_dist", 0.01))
    ctl = ControllerConfig(c_p=p.get("c_p", 1.0), c_o=p.get("c_o", 0.5),
                           steering_samples=p.get("steering_samples", 21),
                           arc_length=p.get("arc_length", 4.0))
    per = p.get("perception") or perception_for(scn.sensor)
    kw = {k: p[k] for k in ("ring_count", "xi", "angular_samples", "r_outer", "r_inner", "planner")
          if k in p}
    return PipelineConfig(potential=pot, controller=ctl, perception=per, **kw)


def perception_for(sensor: SensorModel):
    from ..perception import PerceptionConfig
    lo, hi = sensor.image_bounds()
    return PerceptionConfig(rings=sensor.rings, az_cols=sensor.az_cols, elev_min_deg=lo,
                            elev_max_deg=hi, max_range=sensor.max_range)


# --- parsing ---------------------------------------------------------------

def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


_SECTIONS = {"world", "graph", "vehicle", "sensor", "localization", "agents", "goals", "sim",
             "planner", "name"}


def _build(cls, data, section, problems, extra=()):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        problems.append(f"{section}: expected a mapping")
        return None
    allowed = _fields(cls) | set(extra)
    for k in sorted(set(data) - allowed):
        problems.append(f"{section}.{k}: unknown key")
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items()
          if k in _fields(cls)}
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        problems.append(f"{section}: {e}")
        return None


def parse_scenario(data: dict, base_dir: str = ".") -> Scenario:
    problems = []
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping of sections")
    for k in sorted(set(data) - _SECTIONS):
        problems.append(f"{k}: unknown section")
    for k in ("world", "graph", "goals"):
        if k not in data:
            problems.append(f"{k}: required section missing")

    world = None
    w = data.get("world") or {}
    for k in sorted(set(w) - {"centerline", "bounds", "discs", "polygons"}):
        problems.append(f"world.{k}: unknown key")
    discs, polys = [], []
    for i, d in enumerate(w.get("discs") or []):
        for k in sorted(set(d) - {"center", "radius", "height"}):
            problems.append(f"world.discs[{i}].{k}: unknown key")
        try:
            discs.append(Disc(tuple(d["center"]), float(d["radius"]), float(d.get("height", 2.0))))
        except (KeyError, TypeError, ValueError) as e:
            problems.append(f"world.discs[{i}]: {e!r}")
    for i, d in enumerate(w.get("polygons") or []):
        for k in sorted(set(d) - {"vertices", "height"}):
            problems.append(f"world.polygons[{i}].{k}: unknown key")
        try:
            polys.append(ConvexPolygon(tuple(map(tuple, d["vertices"])), float(d.get("height", 2.0))))
        except (KeyError, TypeError, ValueError) as e:
            problems.append(f"world.polygons[{i}]: {e!r}")
    if "world" in data:
        try:
            world = World(w.get("centerline", []), discs, polys,
                          tuple(w["bounds"]) if w.get("bounds") else None)
        except (TypeError, ValueError) as e:
            problems.append(f"world.centerline: {e}")

    vehicle = _build(VehicleParams, data.get("vehicle"), "vehicle", problems)
    sensor = _build(SensorModel, data.get("sensor"), "sensor", problems)
    loc = _build(LocalizationModel, data.get("localization"), "localization", problems)
    sim = _build(SimConfig, data.get("sim"), "sim", problems)
    if sim is not None and not sim.dt > 0:
        problems.append("sim.dt: must be > 0")

    agents = []
    for i, a in enumerate(data.get("agents") or []):
        ag = _build(DynamicAgent, a, f"agents[{i}]", problems)
        if ag is not None:
            agents.append(ag)

    graph, true_graph, origin, bias = None, None, None, (0.0, 0.0)
    g = data.get("graph") or {}
    for k in sorted(set(g) - {"origin", "text", "osm_file", "subsample", "bias"}):
        problems.append(f"graph.{k}: unknown key")
    try:
        if g.get("origin") is not None:
            origin = GeoPoint(*map(float, g["origin"]))
        if "text" in g and "osm_file" in g:
            problems.append("graph: give either text or osm_file, not both")
        elif "text" in g:
            true_graph = parse_graph_text(g["text"], origin)
        elif "osm_file" in g:
            with open(os.path.join(base_dir, g["osm_file"])) as fh:
                true_graph = parse_osm(fh.read(), origin)
        elif "graph" in data:
            problems.append("graph: one of text or osm_file is required")
        if true_graph is not None:
            if not true_graph.nodes:
                problems.append("graph: no nodes")
            else:
                graph = true_graph
                if g.get("subsample"):
                    graph = subsample_graph(graph, float(g["subsample"]))
                b = g.get("bias") or {}
                for k in sorted(set(b) - {"offset", "bearing"}):
                    problems.append(f"graph.bias.{k}: unknown key")
                bias = (float(b.get("offset", 0.0)), float(b.get("bearing", 0.0)))
                graph = inject_osm_bias(graph, *bias)
    except (NavError, ValueError, OSError, TypeError) as e:
        problems.append(f"graph: {e}")

    goals = []
    gl = data.get("goals") or {}
    for k in sorted(set(gl) - {"local", "geo", "md_threshold"}):
        problems.append(f"goals.{k}: unknown key")
    try:
        goals = [np.array(p, dtype=float).reshape(2) for p in gl.get("local") or []]
        if gl.get("geo"):
            if true_graph is None:
                problems.append("goals.geo: needs a graph origin")
            else:
                o = true_graph.origin
                goals += [np.array(geo_to_local(o, GeoPoint(*p))) for p in gl["geo"]]
    except (NavError, ValueError, TypeError) as e:
        problems.append(f"goals: {e}")
    if "goals" in data and not goals:
        problems.append("goals: at least one goal is required")
    md = gl.get("md_threshold", 1.5)
    if not (isinstance(md, (int, float)) and md > 0):
        problems.append("goals.md_threshold: must be > 0")

    planner = data.get("planner") or {}
    for k in sorted(set(planner) - PLANNER_KEYS):
        problems.append(f"planner.{k}: unknown key")

    if problems:
        raise ScenarioError(problems)
    scn = Scenario(world=world, graph=graph, goals=goals, vehicle=vehicle, sensor=sensor,
                   localization=loc, agents=agents, sim=sim, md_threshold=float(md),
                   planner=dict(planner), name=str(data.get("name", "scenario")), bias=bias,
                   true_graph=true_graph)
    if world is not None and not world.inside_bounds(scn.start_pose.position):
        raise ScenarioError(["sim.start: outside world bounds"])
    return scn


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ScenarioError(f"{path}: invalid YAML: {e}") from e
    except OSError as e:
        raise ScenarioError(f"{path}: {e}") from e
    return parse_scenario(data, os.path.dirname(os.path.abspath(path)))


def loads_scenario(text: str) -> Scenario:
    return parse_scenario(yaml.safe_load(text))


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _asdict(obj):
    return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def scenario_to_dict(scn: Scenario) -> dict:
    graph = scn.true_graph if scn.true_graph is not None else scn.graph
    g = {"origin": [graph.origin.lat, graph.origin.lon], "text": format_graph_text(graph)}
    if scn.bias[0]:
        g["bias"] = {"offset": scn.bias[0], "bearing": scn.bias[1]}
    world = {"centerline": scn.world.centerline.tolist()}
    if scn.world.bounds:
        world["bounds"] = list(scn.world.bounds)
    if scn.world.discs:
        world["discs"] = [{"center": list(d.center), "radius": d.radius, "height": d.height}
                          for d in scn.world.discs]
    if scn.world.polygons:
        world["polygons"] = [{"vertices": [list(v) for v in p.vertices], "height": p.height}
                             for p in scn.world.polygons]
    out = {
        "name": scn.name,
        "world": world,
        "graph": g,
        "vehicle": _asdict(scn.vehicle),
        "sensor": _asdict(scn.sensor),
        "localization": _asdict(scn.localization),
        "goals": {"local": [list(map(float, p)) for p in scn.goals],
                  "md_threshold": scn.md_threshold},
        "sim": _asdict(scn.sim),
    }
    if scn.agents:
        out["agents"] = [_asdict(a) for a in scn.agents]
    if scn.planner:
        out["planner"] = dict(scn.planner)
    return _plain(out)


def dump_scenario(scn: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(scn), fh, sort_keys=False, default_flow_style=None)


def with_overrides(scn: Scenario, **changes) -> Scenario:
    out = copy.copy(scn)
    for k, v in changes.items():
        setattr(out, k, v)
    return out
