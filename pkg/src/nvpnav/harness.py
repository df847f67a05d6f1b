"""Episode metrics, planner benchmarking and artifact rendering."""
from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyPath, NoPath, NoRecovery
from .geometry import polyline_distance, polyline_station
from .nvp import LocalPath, RingSpec, plan, write_path
from .perception import FreeSpacePolygon
from .pipeline import PipelineConfig
from .valley import (PotentialParams, build_cost_grid, gradient, plan_dense_baseline, valley_mask,
                     write_grid_header, write_pgm)

CSV_VERSION = "nvpnav-steps-v1"
CSV_COLUMNS = ["t", "x", "y", "heading", "est_x", "est_y", "est_heading", "deviation", "v",
               "alpha", "clearance", "waypoints", "waypoints_inside", "perception_ms",
               "planner_ms", "control_ms"]
STAGES = ("perception", "planner", "control")


def compute_deviation(positions, centerline):
    """Per-step unsigned distance to the centerline polyline, plus (mean, max)."""
    c = np.asarray(centerline, dtype=float)
    if len(c) < 2:
        raise ValueError("centerline needs at least 2 vertices")
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    d = polyline_distance(p, c) if len(p) else np.zeros(0)
    if len(d) == 0:
        return d, 0.0, 0.0
    return d, float(d.mean()), float(d.max())


def compute_recovery(stations, deviation, obstacle_station: float, band: float,
                     hold: float = 2.0) -> float:
    """Distance past ``obstacle_station`` where the deviation re-enters ``band`` for good.

    "For good" means it stays within the band over the next ``hold`` metres of
    travel (or until the series ends, if that comes first). Raises NoRecovery
    if no such station exists.
    """
    if not band > 0:
        raise ValueError("band must be > 0")
    s = np.asarray(stations, dtype=float)
    d = np.asarray(deviation, dtype=float)
    inside = d <= band
    n = len(s)
    # run length of consecutive in-band samples starting at each index
    run_end = np.empty(n, dtype=int)
    nxt = n
    for i in range(n - 1, -1, -1):
        if not inside[i]:
            nxt = i
        run_end[i] = nxt
    for i in range(n):
        if s[i] < obstacle_station or not inside[i]:
            continue
        j = run_end[i]
        if j == n or s[j - 1] - s[i] >= hold:
            return float(max(s[i] - obstacle_station, 0.0))
    raise NoRecovery(f"deviation never settles within {band} m after station {obstacle_station}")


def estimate_upper_speed(mean_sample_time: float, margin: float) -> float:
    """Speed at which the vehicle covers ``margin`` metres in one planning cycle."""
    if not (mean_sample_time > 0 and margin > 0):
        raise ValueError("mean_sample_time and margin must be > 0")
    return margin / mean_sample_time


@dataclass
class MetricsSummary:
    status: str
    steps: int
    mean_deviation: float
    max_deviation: float
    recovery_distance: Optional[float]
    min_clearance: float
    stage_mean_ms: dict
    stage_max_ms: dict
    episode_time: float  # [s] simulated
    collisions: int
    goals_popped: int = 0
    reverse_actions: int = 0

    def __post_init__(self):
        if not self.max_deviation >= self.mean_deviation >= 0:
            raise ValueError("need max >= mean >= 0 deviation")

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                for s, x in v.items():
                    lines.append(f"{k}.{s} = {x:.4f}")
            elif isinstance(v, float):
                lines.append(f"{k} = {v:.6f}")
            else:
                lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def summarize(log, centerline=None, obstacle_station: Optional[float] = None,
              band: float = 0.15) -> MetricsSummary:
    """Without a centerline the per-step deviations stored in the log are used."""
    pos = log.positions
    if centerline is None:
        dev = np.asarray(log.deviations, dtype=float)
        mean_d, max_d = (float(dev.mean()), float(dev.max())) if len(dev) else (0.0, 0.0)
    else:
        _, mean_d, max_d = compute_deviation(pos, centerline)
    rec = None
    if obstacle_station is not None and centerline is not None and len(pos):
        st = polyline_station(pos, centerline)
        try:
            rec = compute_recovery(st, log.deviations, obstacle_station, band)
        except NoRecovery:
            rec = None
    tm = {k: np.array([s.timings[k] for s in log.steps]) for k in STAGES}
    clr = [s.clearance for s in log.steps]
    return MetricsSummary(
        status=log.status, steps=len(log), mean_deviation=mean_d, max_deviation=max_d,
        recovery_distance=rec, min_clearance=float(min(clr)) if clr else math.inf,
        stage_mean_ms={k: float(v.mean()) if len(v) else 0.0 for k, v in tm.items()},
        stage_max_ms={k: float(v.max()) if len(v) else 0.0 for k, v in tm.items()},
        episode_time=len(log) * log.dt, collisions=log.collisions,
        goals_popped=log.goals_popped,
        reverse_actions=int(sum(1 for s in log.steps if s.v < 0)))


# --- valley oracle -----------------------------------------------------------

def scene_free_space(world, sensor=None, pose=None) -> FreeSpacePolygon:
    """Noise-free scan of ``world`` from ``pose`` pushed through perception."""
    from .geometry import Pose2
    from .perception import perceive
    from .sim.scenario import perception_for
    from .sim.world import SensorModel, raycast_scan

    sensor = sensor or SensorModel()
    cloud = raycast_scan(world, [], pose or Pose2(0.0, 0.0, 0.0), sensor, None)
    return perceive(cloud, perception_for(sensor))[2]


def oracle_distances(poly: FreeSpacePolygon, goal, specs: dict, xi: float,
                     params: PotentialParams = PotentialParams(), resolution: float = 0.2) -> dict:
    """Per ring spec, distance of each NVP waypoint to the dense valley mask.

    The mask is built once on a grid that covers the largest outer ring, with
    the same potential and threshold the planner uses.
    """
    extent = max(s.radii[0] for s in specs.values()) + 1.0
    mask = valley_mask(gradient(build_cost_grid(poly, goal, params, resolution, extent)), xi)
    out = {}
    for key, spec in specs.items():
        try:
            out[key] = mask.distance(plan(poly, goal, spec, params, xi).points)
        except EmptyPath:
            out[key] = np.zeros(0)
    return out


# --- benchmarking ----------------------------------------------------------

@dataclass
class TimingRow:
    name: str
    mean_ms: float
    max_ms: float
    samples: int
    episode_time: Optional[float] = None  # [s] wall clock of a closed-loop run
    status: Optional[str] = None


def parse_config_name(name: str, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """``nvp<N>`` or ``dense`` on top of ``base``."""
    base = base or PipelineConfig()
    kw = {f: getattr(base, f) for f in base.__dataclass_fields__}
    if name == "dense":
        kw["planner"] = "dense"
    elif name.startswith("nvp") and name[3:].isdigit():
        kw["planner"] = "nvp"
        kw["ring_count"] = int(name[3:])
    else:
        raise ValueError(f"unknown planner config {name!r} (use nvp<N> or dense)")
    return PipelineConfig(**kw)


def time_planner(cfg: PipelineConfig, spec: RingSpec, polygons: Sequence[FreeSpacePolygon],
                 goals: Sequence, repeats: int = 1) -> np.ndarray:
    """Per-call wall-clock planner time in ms over ``polygons`` cycled ``repeats`` times.

    Only the planning call is inside the timed region: ring costs, valleys and
    chaining for NVP; cost grid plus A* for the dense baseline.
    """
    out = []
    for _ in range(repeats):
        for poly, goal in zip(polygons, goals):
            if cfg.planner == "nvp":
                t0 = time.perf_counter()
                try:
                    plan(poly, goal, spec, cfg.potential, cfg.xi)
                except EmptyPath:  # still counts as a planning cycle
                    pass
                t1 = time.perf_counter()
            else:
                t0 = time.perf_counter()
                grid = build_cost_grid(poly, goal, cfg.potential, cfg.dense_resolution,
                                       extent=spec.radii[0])
                try:
                    plan_dense_baseline(grid, (0.0, 0.0), goal, snap=True)
                except NoPath:
                    pass
                t1 = time.perf_counter()
            out.append(1e3 * (t1 - t0))
    return np.array(out)


def benchmark(scn, names: Sequence[str], base: Optional[PipelineConfig] = None,
              scans: Optional[int] = None, closed_loop: bool = True, seed: Optional[int] = None):
    """Time each planner config on the identical per-step inputs of one reference run.

    The reference episode (first config) records every step's free-space
    polygon and local goal; every config is then timed on that same sequence,
    cycled until ``scans`` calls have been made. With ``closed_loop`` each config
    also drives its own episode so total episode time can be reported.
    """
    from .sim.episode import run_episode
    from .sim.scenario import pipeline_config

    if not names:
        raise ValueError("benchmark needs at least one config")
    base = base or pipeline_config(scn)
    cfgs = [parse_config_name(n, base) for n in names]
    ref = run_episode(scn, cfgs[0], seed=seed, record_inputs=True)
    polys = [ref.polygon(k) for k in range(len(ref.polygons))]
    goals = ref.local_goals
    if not polys:
        return [TimingRow(n, 0.0, 0.0, 0) for n in names], ref
    reps = 1 if scans is None else max(1, math.ceil(scans / len(polys)))
    rows = []
    for n, cfg in zip(names, cfgs):
        spec = cfg.ring_spec(scn.vehicle)
        t = time_planner(cfg, spec, polys, goals, reps)
        if scans is not None:
            t = t[:scans]
        row = TimingRow(n, float(t.mean()), float(t.max()), len(t))
        if closed_loop:
            log = ref if cfg is cfgs[0] else run_episode(scn, cfg, seed=seed)
            row.episode_time = log.wall_time
            row.status = log.status
        rows.append(row)
    return rows, ref


def format_timing_table(rows) -> str:
    lines = ["config  mean_ms  max_ms  samples  episode_s  status"]
    for r in rows:
        ep = f"{r.episode_time:9.2f}" if r.episode_time is not None else "        -"
        lines.append(f"{r.name:<7} {r.mean_ms:8.2f} {r.max_ms:7.2f} {r.samples:8d} {ep}  {r.status or '-'}")
    return "\n".join(lines) + "\n"


# --- artifacts ---------------------------------------------------------------

def write_step_csv(path, log) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for s in log.steps:
            wp = ";".join(f"{x:.3f}:{y:.3f}" for x, y in s.waypoints)
            w.writerow([f"{s.t:.3f}", *(f"{v:.6f}" for v in s.true_pose),
                        *(f"{v:.6f}" for v in s.est_pose), f"{s.deviation:.6f}", f"{s.v:.4f}",
                        f"{s.alpha:.4f}", f"{s.clearance:.4f}", wp, int(s.waypoints_inside),
                        *(f"{s.timings[k]:.3f}" for k in STAGES)])


def read_step_csv(path) -> list:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {CSV_VERSION}":
            raise ValueError(f"{path}: unexpected CSV version line {header!r}")
        return list(csv.DictReader(fh))


def _svg_polyline(pts, style) -> str:
    if len(pts) == 0:
        return ""
    coords = " ".join(f"{x:.3f},{-y:.3f}" for x, y in pts)
    return f'<polyline points="{coords}" {style}/>\n'


def render_svg(path, log, world=None, outer_radius: Optional[float] = None) -> None:
    """Top view: centerline, obstacles, trajectory, last waypoints and outer ring."""
    pos = log.positions
    pts = [pos] if len(pos) else []
    if world is not None:
        pts.append(world.centerline)
    allp = np.concatenate(pts) if pts else np.zeros((1, 2))
    lo, hi = allp.min(0) - 5.0, allp.max(0) + 5.0
    vb = f"{lo[0]:.3f} {-hi[1]:.3f} {hi[0] - lo[0]:.3f} {hi[1] - lo[1]:.3f}"
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}" width="1200" '
             f'height="{max(200, int(1200 * (hi[1] - lo[1]) / max(hi[0] - lo[0], 1e-9)))}">\n',
             f"<title>{escape(log.scenario)} ({escape(log.status)})</title>\n"]
    if world is not None:
        for d in world.discs:
            parts.append(f'<circle cx="{d.center[0]:.3f}" cy="{-d.center[1]:.3f}" r="{d.radius:.3f}" '
                         'fill="#888"/>\n')
        for p in world.polygons:
            v = " ".join(f"{x:.3f},{-y:.3f}" for x, y in p.vertices)
            parts.append(f'<polygon points="{v}" fill="#888"/>\n')
        parts.append(_svg_polyline(world.centerline,
                                   'fill="none" stroke="#2a2" stroke-width="0.08" stroke-dasharray="0.5,0.3"'))
    parts.append(_svg_polyline(pos, 'fill="none" stroke="#c22" stroke-width="0.1"'))
    if len(log.steps):
        last = log.steps[-1]
        x, y, th = last.true_pose
        c, s = math.cos(th), math.sin(th)
        for wx, wy in last.waypoints:
            parts.append(f'<circle cx="{x + c * wx - s * wy:.3f}" cy="{-(y + s * wx + c * wy):.3f}" '
                         'r="0.15" fill="#22c"/>\n')
        if outer_radius:
            parts.append(f'<circle cx="{x:.3f}" cy="{-y:.3f}" r="{outer_radius:.3f}" fill="none" '
                         'stroke="#dd0" stroke-width="0.08"/>\n')
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))


def render_artifacts(log, outdir, world=None, centerline=None, polygon=None, goal=None,
                     cfg: Optional[PipelineConfig] = None, spec: Optional[RingSpec] = None,
                     obstacle_station: Optional[float] = None) -> dict:
    """Write the step CSV, metrics text, SVG and (given a polygon) F / |grad F| graymaps."""
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {outdir}: {e}") from e
    files = {}

    def out(name):
        files[name] = os.path.join(outdir, name)
        return files[name]

    try:
        write_step_csv(out("steps.csv"), log)
        cl = centerline if centerline is not None else (world.centerline if world is not None else None)
        with open(out("metrics.txt"), "w") as fh:
            fh.write(summarize(log, cl, obstacle_station).to_text())
        render_svg(out("topview.svg"), log, world, spec.radii[0] if spec is not None else None)
        if polygon is not None and goal is not None:
            cfg = cfg or PipelineConfig()
            extent = spec.radii[0] if spec is not None else None
            grid = build_cost_grid(polygon, goal, cfg.potential, cfg.dense_resolution, extent)
            gg = gradient(grid)
            write_pgm(out("cost.pgm"), grid.values)
            write_pgm(out("gradient.pgm"), np.where(grid.traversable, gg.magnitude, np.nan))
            write_grid_header(out("grid.txt"), grid, cfg.xi)
            if spec is not None:
                try:
                    write_path(out("path.txt"), plan(polygon, goal, spec, cfg.potential, cfg.xi))
                except EmptyPath:
                    write_path(out("path.txt"), LocalPath.empty())
    except OSError as e:
        raise OSError(f"writing artifacts to {outdir}: {e}") from e
    return files
