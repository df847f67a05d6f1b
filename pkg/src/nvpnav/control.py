"""Ackermann arc sampling, free-space collision gating and action selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import wrap_angle
from .nvp import LocalPath
from .perception import FreeSpacePolygon


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 1.05  # [m]
    width: float = 0.8
    length: float = 1.5
    rear_overhang: float = 0.25  # rear axle to rear bumper
    alpha_max: float = 0.45  # [rad]
    v_max: float = 1.3  # [m/s]
    v_min: float = 0.3
    safety_margin: float = 0.2  # [m]

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if not 0 < self.alpha_max < math.pi / 2:
            raise ValueError("alpha_max must lie in (0, pi/2)")
        for name in ("wheelbase", "width", "length", "rear_overhang"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be >= 0")

    def footprint(self, margin: float = 0.0) -> np.ndarray:
        """Rectangle corners in the rear-axle frame, counterclockwise."""
        x0, x1 = -self.rear_overhang - margin, self.length - self.rear_overhang + margin
        hw = self.width / 2.0 + margin
        return np.array([[x0, -hw], [x1, -hw], [x1, hw], [x0, hw]])


@dataclass(frozen=True)
class ControlAction:
    v: float = 0.0  # [m/s], negative is reverse
    alpha: float = 0.0  # [rad] steering

    def __post_init__(self):
        if self.v == 0.0 and self.alpha != 0.0:
            raise ValueError("a stop action must have zero steering")

    @property
    def reverse(self) -> bool:
        return self.v < 0


STOP = ControlAction(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class ArcTrajectory:
    alpha: float
    direction: int  # +1 forward, -1 reverse
    poses: np.ndarray  # (J, 3): x, y, heading


def arc_poses(alpha: float, wheelbase: float, s: np.ndarray) -> np.ndarray:
    """Exact rear-axle poses after travelling signed distances ``s`` at steering ``alpha``."""
    s = np.asarray(s, dtype=float)
    if alpha == 0.0:
        return np.column_stack([s, np.zeros_like(s), np.zeros_like(s)])
    R = wheelbase / math.tan(alpha)  # signed: positive turns left
    th = s / R
    return np.column_stack([R * np.sin(th), R * (1.0 - np.cos(th)), wrap_angle(th)])


def sample_arcs(vp: VehicleParams, steering_samples: int = 21, arc_length: float = 4.0,
                step: float = 0.1) -> list:
    if steering_samples < 3 or steering_samples % 2 == 0:
        raise ValueError("steering_samples must be odd and >= 3")
    if not (arc_length > 0 and step > 0):
        raise ValueError("arc_length and step must be > 0")
    half = steering_samples // 2
    alphas = [vp.alpha_max * k / half for k in range(-half, half + 1)]
    s = step * np.arange(1, int(round(arc_length / step)) + 1)
    arcs = []
    for direction in (1, -1):
        for a in alphas:
            arcs.append(ArcTrajectory(a, direction, arc_poses(a, vp.wheelbase, direction * s)))
    return arcs


def footprint_samples(vp: VehicleParams, per_edge: int = 8) -> np.ndarray:
    """Boundary samples of the margin-inflated footprint (corners included)."""
    c = vp.footprint(vp.safety_margin)
    t = np.arange(per_edge) / per_edge
    out = [c[k] + t[:, None] * (c[(k + 1) % 4] - c[k]) for k in range(4)]
    return np.concatenate(out)


def _footprints_world(poses: np.ndarray, samples: np.ndarray) -> np.ndarray:
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    x = poses[:, None, 0] + c[:, None] * samples[None, :, 0] - s[:, None] * samples[None, :, 1]
    y = poses[:, None, 1] + s[:, None] * samples[None, :, 0] + c[:, None] * samples[None, :, 1]
    return np.stack([x, y], axis=-1)


def collision_gate(arcs: Sequence[ArcTrajectory], poly: FreeSpacePolygon, vp: VehicleParams,
                   per_edge: int = 8):
    """Split arcs into (safe, risky) by footprint containment at every pose."""
    samples = footprint_samples(vp, per_edge)
    if not arcs:
        return [], []
    all_poses = np.concatenate([a.poses for a in arcs])
    pts = _footprints_world(all_poses, samples)
    ok_pose = poly.contains(pts).all(axis=1)
    safe, risky = [], []
    i = 0
    for a in arcs:
        n = len(a.poses)
        (safe if ok_pose[i:i + n].all() else risky).append(a)
        i += n
    return safe, risky


def tracking_error(arc: ArcTrajectory, path: LocalPath, c_p: float, c_o: float) -> float:
    """Summed pose-to-waypoint error over every trajectory pose and every waypoint."""
    x = arc.poses
    dp = np.hypot(x[:, None, 0] - path.points[None, :, 0], x[:, None, 1] - path.points[None, :, 1])
    do = np.abs(wrap_angle(x[:, None, 2] - path.headings[None, :]))
    return float(np.sum(c_p * dp + c_o * do))


def speed_for(alpha: float, vp: VehicleParams) -> float:
    return vp.v_max - abs(alpha) * (vp.v_max - vp.v_min) / vp.alpha_max


def select_action(safe_arcs: Sequence[ArcTrajectory], path: LocalPath, c_p: float = 1.0,
                  c_o: float = 0.5, vp: VehicleParams = VehicleParams()) -> ControlAction:
    """Lowest-error safe arc; ties prefer smaller |alpha|, then forward. Stops if none."""
    if c_p < 0 or c_o < 0 or (c_p == 0 and c_o == 0):
        raise ValueError("c_p, c_o must be >= 0 and not both zero")
    if not safe_arcs or path is None or len(path) == 0:
        return STOP
    best_key, best = None, None
    for arc in safe_arcs:
        key = (tracking_error(arc, path, c_p, c_o), abs(arc.alpha), arc.direction < 0)
        if best_key is None or key < best_key:
            best_key, best = key, arc
    v = best.direction * speed_for(best.alpha, vp)
    return ControlAction(v, best.alpha)


@dataclass
class ControllerConfig:
    c_p: float = 1.0
    c_o: float = 0.5
    steering_samples: int = 21
    arc_length: float = 4.0
    step: float = 0.1
    per_edge: int = 8


class Controller:
    """Caches the arc set; one ``act`` call per planning cycle."""

    def __init__(self, vp: VehicleParams = VehicleParams(), cfg: ControllerConfig = ControllerConfig()):
        self.vp, self.cfg = vp, cfg
        self.arcs = sample_arcs(vp, cfg.steering_samples, cfg.arc_length, cfg.step)

    def act(self, poly: FreeSpacePolygon, path: LocalPath) -> ControlAction:
        if path is None or len(path) == 0:
            return STOP
        safe, _ = collision_gate(self.arcs, poly, self.vp, self.cfg.per_edge)
        return select_action(safe, path, self.cfg.c_p, self.cfg.c_o, self.vp)
