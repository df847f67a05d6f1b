"""Builders for the stock experiment scenarios."""
from __future__ import annotations

import math

import numpy as np

from ..control import VehicleParams
from ..geometry import GeoPoint
from ..osm import RoadGraph
from .scenario import Scenario, SimConfig
from .world import ConvexPolygon, Disc, DynamicAgent, LocalizationModel, SensorModel, World, \
    inject_osm_bias

ORIGIN = GeoPoint(45.07, 7.69)
WALL = 0.3  # [m] wall thickness


def quiet_localization(**kw) -> LocalizationModel:
    return LocalizationModel(sigma_xy=0.0, sigma_theta=0.0, **kw)


def straight_graph(x0: float, x1: float, spacing: float, y: float = 0.0) -> RoadGraph:
    n = max(1, int(round((x1 - x0) / spacing)))
    xs = np.linspace(x0, x1, n + 1)
    pos = {i + 1: (float(x), y) for i, x in enumerate(xs)}
    return RoadGraph.from_local(pos, [(i, i + 1) for i in range(1, n + 1)], ORIGIN)


def corridor_walls(x0: float, x1: float, width: float) -> list:
    h = width / 2.0
    return [ConvexPolygon.box(x0, h, x1, h + WALL), ConvexPolygon.box(x0, -h - WALL, x1, -h)]


def _scenario(name, world, graph, goals, *, bias=(0.0, 0.0), loc=None, agents=(), timeout=120.0,
              seed=0, start=(0.0, 0.0, 0.0), planner=None, subsampled=None) -> Scenario:
    planned = inject_osm_bias(subsampled or graph, *bias)
    return Scenario(world=world, graph=planned, goals=[np.asarray(g, float) for g in goals],
                    vehicle=VehicleParams(), sensor=SensorModel(),
                    localization=loc or quiet_localization(), agents=list(agents),
                    sim=SimConfig(dt=0.1, seed=seed, timeout=timeout, start=start),
                    planner=dict(planner or {}), name=name, bias=bias, true_graph=graph)


def corridor(length: float = 60.0, width: float = 6.0, bias: float = 1.0,
             node_spacing: float = 60.0, loc=None, seed: int = 0) -> Scenario:
    """Straight walled corridor; graph nodes shifted sideways by ``bias`` metres."""
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)],
                  polygons=corridor_walls(-10.0, length + 20.0, width))
    g = straight_graph(0.0, length, node_spacing)
    return _scenario("corridor", world, g, [(length, 0.0)], bias=(bias, math.pi / 2), loc=loc,
                     seed=seed)


def static_obstacle(width: float = 10.0, obstacle_x: float = 20.0, radius: float = 1.0,
                    obstacle_y: float = 0.3, length: float = 48.0, node_spacing: float = 8.0,
                    gamma_r: float = 2.0, c_o: float = 0.1, r_outer: float = 8.0,
                    loc=None, seed: int = 0) -> Scenario:
    """Walled road with a disc straddling the centerline.

    The disc sits slightly off-center so the planner has a preferred side; a
    perfectly centred disc makes the two detours tie and the chosen gap collapses
    to the safety margin for every repulsion exponent.
    """
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)], discs=[Disc((obstacle_x, obstacle_y), radius)],
                  polygons=corridor_walls(-10.0, length + 20.0, width))
    g = straight_graph(0.0, length, node_spacing)
    return _scenario("static_obstacle", world, g, [(length, 0.0)], loc=loc, seed=seed,
                     planner={"gamma_r": gamma_r, "c_o": c_o, "r_outer": r_outer})


def pedestrian_stop(width: float = 5.0, length: float = 40.0, seed: int = 0) -> Scenario:
    """Pedestrian who hesitates mid-crossing and halts in front of the vehicle.

    The crossing slows near the centerline, so the approaching vehicle meets it
    there; backing off and re-approaching triggers the second stop.
    """
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)],
                  polygons=corridor_walls(-10.0, length + 20.0, width))
    h = width / 2.0 - 0.4
    ped = DynamicAgent(0.3, [(0.0, 12.0, -h), (4.5, 12.0, -h), (6.0, 12.0, -0.2),
                             (9.0, 12.0, 0.2), (10.5, 12.0, h)],
                       behavior="stop_in_front", stop_distance=3.0, lateral_window=0.0,
                       hold=3.0, max_stops=2)
    g = straight_graph(0.0, length, 5.0)
    return _scenario("pedestrian_stop", world, g, [(length, 0.0)], agents=[ped], seed=seed)


def crossing_car(length: float = 40.0, seed: int = 0) -> Scenario:
    """Open lot; a car-sized disc crosses the route ahead of the vehicle."""
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)])
    car = DynamicAgent(1.0, [(0.0, 14.0, 15.0), (4.0, 14.0, 15.0), (12.0, 14.0, -15.0)],
                       height=1.5)
    g = straight_graph(0.0, length, 5.0)
    return _scenario("crossing_car", world, g, [(length, 0.0)], agents=[car], seed=seed)


def three_pedestrians(width: float = 10.0, length: float = 40.0, seed: int = 0) -> Scenario:
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)],
                  polygons=corridor_walls(-10.0, length + 20.0, width))
    h = width / 2.0 - 0.5
    peds = [
        DynamicAgent(0.3, [(0.0, 10.0, -h), (3.0, 10.0, -h), (10.0, 10.0, h)]),
        DynamicAgent(0.3, [(0.0, 18.0, h), (6.0, 18.0, h), (13.0, 18.0, -h)]),
        DynamicAgent(0.3, [(0.0, 26.0, -h), (10.0, 26.0, -h), (17.0, 26.0, h)]),
    ]
    g = straight_graph(0.0, length, 5.0)
    return _scenario("three_pedestrians", world, g, [(length, 0.0)], agents=peds, seed=seed)


def empty_world(length: float = 20.0) -> Scenario:
    world = World([(-10.0, 0.0), (length + 20.0, 0.0)])
    g = straight_graph(0.0, length, length)
    return _scenario("empty", world, g, [(length, 0.0)], timeout=60.0)


def blocked_road(width: float = 6.0, wall_x: float = 5.0, back_x: float = -2.0) -> Scenario:
    """Road closed by a gapless wall ahead and another behind the start.

    The pocket is shorter than one arc in either direction, so every arc is risky.
    """
    walls = corridor_walls(back_x - 1.0, 40.0, width)
    walls.append(ConvexPolygon.box(wall_x, -width / 2 - WALL, wall_x + 0.5, width / 2 + WALL))
    walls.append(ConvexPolygon.box(back_x - 0.5, -width / 2 - WALL, back_x, width / 2 + WALL))
    world = World([(-10.0, 0.0), (40.0, 0.0)], polygons=walls)
    g = straight_graph(0.0, 30.0, 5.0)
    return _scenario("blocked", world, g, [(30.0, 0.0)], timeout=60.0)


def random_static_scene(seed: int, n_obstacles: int = 6, extent: float = 12.0):
    """Random discs and boxes around the origin, keeping a clear zone near the vehicle.

    Returns ``(world, goal)`` with the goal in the vehicle frame.
    """
    rng = np.random.default_rng(seed)
    discs, polys = [], []
    while len(discs) + len(polys) < n_obstacles:
        c = rng.uniform(-extent, extent, size=2)
        if np.hypot(*c) < 4.0:
            continue
        if rng.random() < 0.5:
            discs.append(Disc((float(c[0]), float(c[1])), float(rng.uniform(0.4, 1.5))))
        else:
            w, h = rng.uniform(0.5, 2.5, size=2)
            polys.append(ConvexPolygon.box(c[0] - w / 2, c[1] - h / 2, c[0] + w / 2, c[1] + h / 2))
    ang = rng.uniform(-math.pi, math.pi)
    goal = 20.0 * np.array([math.cos(ang), math.sin(ang)])
    world = World([(-20.0, 0.0), (20.0, 0.0)], discs=discs, polygons=polys)
    return world, goal


BUILDERS = {
    "corridor": corridor,
    "static_obstacle": static_obstacle,
    "pedestrian_stop": pedestrian_stop,
    "crossing_car": crossing_car,
    "three_pedestrians": three_pedestrians,
    "empty": empty_world,
    "blocked": blocked_road,
}
