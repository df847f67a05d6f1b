"""Dense potential cost map, its gradient, the valley mask and the dense A* baseline.

The dense field is the reference the ring-based planner is checked against, and
the grid A* is the slow comparator used in the timing experiments.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoPath
from .perception import FreeSpacePolygon


@dataclass(frozen=True)
class PotentialParams:
    w_r: float = 1.0
    w_a: float = 1.0
    gamma_r: float = 2.0
    gamma_a: float = 1.0
    eps_dist: float = 0.01  # [m] guards the power-law singularity

    def __post_init__(self):
        if self.w_r < 0 or self.w_a < 0:
            raise ValueError("potential weights must be nonnegative")
        if not (self.gamma_r > 0 and self.gamma_a > 0 and self.eps_dist > 0):
            raise ValueError("gamma_r, gamma_a and eps_dist must be > 0")


def potential(d_r, d_a, params: PotentialParams):
    """Repulsive minus attractive power-law potential for obstacle/goal distances."""
    d_r = np.maximum(d_r, params.eps_dist)
    d_a = np.maximum(d_a, params.eps_dist)
    rep = params.w_r / d_r ** params.gamma_r if params.w_r else 0.0
    att = params.w_a / d_a ** params.gamma_a if params.w_a else 0.0
    return rep - att


@dataclass(frozen=True, eq=False)
class CostGrid:
    """Cell (i, j) has centre ``(xs[j], ys[i])``; NaN values mark non-traversable cells."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    resolution: float
    open_field: bool = False

    @property
    def origin(self):
        return (float(self.xs[0]), float(self.ys[0]))

    @property
    def traversable(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def shape(self):
        return self.values.shape

    def centers(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X, Y], axis=-1)

    def cell_of(self, p):
        j = int(round((p[0] - self.xs[0]) / self.resolution))
        i = int(round((p[1] - self.ys[0]) / self.resolution))
        return i, j

    def center(self, cell) -> np.ndarray:
        return np.array([self.xs[cell[1]], self.ys[cell[0]]])


def symmetric_axis(half_extent: float, resolution: float) -> np.ndarray:
    """Cell centres symmetric about zero, so mirrored scenes map cell-for-cell."""
    n = 2 * int(math.floor(half_extent / resolution)) + 1
    return (np.arange(n) - (n - 1) / 2.0) * resolution


def build_cost_grid(poly: FreeSpacePolygon, goal, params: PotentialParams = PotentialParams(),
                    resolution: float = 0.2, extent: Optional[float] = None) -> CostGrid:
    """Sample the potential on a square grid of half-width ``extent`` around the sensor."""
    if not 0 < resolution <= 1.0:
        raise ValueError("resolution must lie in (0, 1] m")
    goal = np.asarray(goal, dtype=float)
    if not np.all(np.isfinite(goal)):
        raise ValueError("goal must be finite")
    if extent is None:
        extent = float(np.abs(poly.vertices).max())
    axis = symmetric_axis(extent, resolution)
    grid = np.stack(np.meshgrid(axis, axis), axis=-1)
    inside = poly.contains(grid)
    pts = grid[inside]
    open_field = poly.obstacle_tree is None
    p = params
    if open_field:
        p = PotentialParams(0.0, params.w_a, params.gamma_r, params.gamma_a, params.eps_dist)
    d_r = poly.obstacle_distance(pts) if not open_field else np.full(len(pts), np.inf)
    d_a = np.hypot(pts[:, 0] - goal[0], pts[:, 1] - goal[1])
    values = np.full(inside.shape, np.nan)
    values[inside] = potential(d_r, d_a, p)
    return CostGrid(axis.copy(), axis.copy(), values, resolution, open_field)


@dataclass(frozen=True, eq=False)
class GradientGrid:
    grid: CostGrid
    dx: np.ndarray
    dy: np.ndarray
    magnitude: np.ndarray


def _axis_derivative(f: np.ndarray, ok: np.ndarray, h: float, axis: int) -> np.ndarray:
    pad_f = np.pad(f, 1, constant_values=np.nan)
    pad_ok = np.pad(ok, 1, constant_values=False)
    sl = [slice(1, -1), slice(1, -1)]
    lo, hi = list(sl), list(sl)
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    f_lo, f_hi = pad_f[tuple(lo)], pad_f[tuple(hi)]
    ok_lo, ok_hi = pad_ok[tuple(lo)], pad_ok[tuple(hi)]
    d = np.zeros_like(f)
    both = ok & ok_lo & ok_hi
    only_hi = ok & ok_hi & ~ok_lo
    only_lo = ok & ok_lo & ~ok_hi
    d[both] = (f_hi[both] - f_lo[both]) / (2.0 * h)
    d[only_hi] = (f_hi[only_hi] - f[only_hi]) / h
    d[only_lo] = (f[only_lo] - f_lo[only_lo]) / h
    d[~ok] = np.nan
    return d


def gradient(grid: CostGrid) -> GradientGrid:
    """Central differences inside, one-sided next to non-traversable cells."""
    f, ok, h = grid.values, grid.traversable, grid.resolution
    dx = _axis_derivative(f, ok, h, axis=1)
    dy = _axis_derivative(f, ok, h, axis=0)
    return GradientGrid(grid, dx, dy, np.sqrt(dx ** 2 + dy ** 2))


@dataclass(frozen=True, eq=False)
class ValleyMask:
    grid: CostGrid
    mask: np.ndarray
    xi: float

    def marked_points(self) -> np.ndarray:
        return self.grid.centers()[self.mask]

    def distance(self, pts) -> np.ndarray:
        """Distance from each point to the nearest marked cell (its square footprint).

        Points inside a marked cell are at distance 0; ``inf`` if nothing is marked.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = self.marked_points()
        if len(c) == 0:
            return np.full(len(pts), np.inf)
        half = self.grid.resolution / 2.0
        out = np.empty(len(pts))
        for k, p in enumerate(pts):
            gap = np.maximum(np.abs(c - p) - half, 0.0)
            out[k] = float(np.min(np.hypot(gap[:, 0], gap[:, 1])))
        return out


def _shifted(a: np.ndarray, di: int, dj: int, fill):
    out = np.full_like(a, fill)
    H, W = a.shape
    src = a[max(di, 0):H + min(di, 0), max(dj, 0):W + min(dj, 0)]
    out[max(-di, 0):H + min(-di, 0), max(-dj, 0):W + min(-dj, 0)] = src
    return out


_NEIGHBOURS = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
_LINES = [((0, 1), (0, -1)), ((1, 0), (-1, 0)), ((1, 1), (-1, -1)), ((1, -1), (-1, 1))]


def local_extrema(f: np.ndarray):
    """(ridge, trough) masks for a 2D field; NaN cells count as infinitely costly.

    ridge: not below any 3x3 neighbour and above at least one.
    trough: along some line through the cell, not above either neighbour and
    below at least one, with at least one neighbour traversable. Cells past the
    array edge are unknown and never decide either test.
    """
    ok = np.isfinite(f)
    f = np.where(ok, f, np.inf)
    ge_all = ok.copy()
    gt_any = np.zeros_like(ok)
    for di, dj in _NEIGHBOURS:
        g = _shifted(f, di, dj, np.nan)
        has = ~np.isnan(g)
        ge_all &= ~has | (f >= g)
        gt_any |= has & (f > g)
    ridge = ge_all & gt_any
    trough = np.zeros_like(ok)
    for a, b in _LINES:
        ga, gb = _shifted(f, *a, np.nan), _shifted(f, *b, np.nan)
        both = ok & ~np.isnan(ga) & ~np.isnan(gb) & (np.isfinite(ga) | np.isfinite(gb))
        trough |= both & (f <= ga) & (f <= gb) & ((f < ga) | (f < gb))
    return ridge, trough


def valley_mask(gg: GradientGrid, xi: float) -> ValleyMask:
    """Traversable cells with |grad F| < xi or on a trough line, minus 3x3 ridges."""
    if not xi > 0:
        raise ValueError("xi must be > 0")
    f = gg.grid.values
    ridge, trough = local_extrema(f)
    mag = np.where(np.isfinite(gg.magnitude), gg.magnitude, np.inf)
    mask = gg.grid.traversable & ((mag < xi) | trough) & ~ridge
    return ValleyMask(gg.grid, mask, xi)


def default_xi(gg: GradientGrid, fraction: float = 0.05) -> float:
    m = gg.magnitude[np.isfinite(gg.magnitude)]
    top = float(m.max()) if len(m) else 0.0
    return fraction * top if top > 0 else 1.0


_MOVES = [(di, dj, math.hypot(di, dj)) for di, dj in _NEIGHBOURS]


def nearest_traversable(grid: CostGrid, p) -> tuple:
    ok = grid.traversable
    if not ok.any():
        raise NoPath("grid has no traversable cell")
    c = grid.centers()
    d = np.hypot(c[..., 0] - p[0], c[..., 1] - p[1])
    d[~ok] = np.inf
    i, j = np.unravel_index(int(np.argmin(d)), d.shape)
    return int(i), int(j)


def plan_dense_baseline(grid: CostGrid, start, goal, snap: bool = False) -> np.ndarray:
    """8-connected A* over the cost map; returns cell centres from start to goal.

    Moving into a cell costs ``(f - f_min) + resolution * step_length``. With
    ``snap`` the endpoints are moved to the nearest traversable cells.
    """
    ok = grid.traversable
    if snap:
        s, g = nearest_traversable(grid, start), nearest_traversable(grid, goal)
    else:
        s, g = grid.cell_of(start), grid.cell_of(goal)
    H, W = grid.shape
    for name, c in (("start", s), ("goal", g)):
        if not (0 <= c[0] < H and 0 <= c[1] < W and ok[c]):
            raise NoPath(f"{name} cell {c} is not traversable")
    f_min = float(np.nanmin(grid.values))
    cell_cost = np.where(ok, grid.values - f_min, np.inf).tolist()
    res = grid.resolution
    gi, gj = g
    INF = math.inf
    best = [[INF] * W for _ in range(H)]
    parent = {}
    best[s[0]][s[1]] = 0.0
    heap = [(0.0, 0.0, s)]
    closed = [[False] * W for _ in range(H)]
    while heap:
        _, cost, cell = heapq.heappop(heap)
        i, j = cell
        if closed[i][j]:
            continue
        if cell == g:
            break
        closed[i][j] = True
        for di, dj, step in _MOVES:
            ni, nj = i + di, j + dj
            if not (0 <= ni < H and 0 <= nj < W) or closed[ni][nj]:
                continue
            cc = cell_cost[ni][nj]
            if cc == INF:
                continue
            nc = cost + cc + res * step
            if nc < best[ni][nj]:
                best[ni][nj] = nc
                parent[(ni, nj)] = cell
                ddi, ddj = abs(ni - gi), abs(nj - gj)
                h = res * (max(ddi, ddj) + (math.sqrt(2) - 1) * min(ddi, ddj))
                heapq.heappush(heap, (nc + h, nc, (ni, nj)))
    if best[gi][gj] == INF:
        raise NoPath("goal cell unreachable from start cell")
    cells = [g]
    while cells[-1] != s:
        cells.append(parent[cells[-1]])
    cells.reverse()
    return np.array([grid.center(c) for c in cells])


def dense_path_cost(grid: CostGrid, path_points: np.ndarray) -> float:
    """Accumulated A* objective along a cell-centre path (start cell excluded)."""
    f_min = float(np.nanmin(grid.values))
    total = 0.0
    cells = [grid.cell_of(p) for p in path_points]
    for a, b in zip(cells[:-1], cells[1:]):
        total += grid.values[b] - f_min + grid.resolution * math.hypot(b[0] - a[0], b[1] - a[1])
    return float(total)


def write_pgm(path, field: np.ndarray, invert: bool = False) -> None:
    """Plain (P2) graymap of a field normalised to 0..255; NaN cells are black.

    Row 0 of the file is the top (max y) of the grid.
    """
    f = np.asarray(field, dtype=float)
    ok = np.isfinite(f)
    img = np.zeros(f.shape, dtype=int)
    if ok.any():
        lo, hi = np.percentile(f[ok], [1, 99])
        span = hi - lo if hi > lo else 1.0
        v = np.clip((f - lo) / span, 0.0, 1.0)
        if invert:
            v = 1.0 - v
        img[ok] = np.round(1 + 254 * v[ok]).astype(int)
    img = img[::-1]
    with open(path, "w") as fh:
        fh.write(f"P2\n{f.shape[1]} {f.shape[0]}\n255\n")
        for row in img:
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_grid_header(path, grid: CostGrid, xi: Optional[float] = None) -> None:
    with open(path, "w") as fh:
        fh.write(f"origin_x {grid.origin[0]:.6f}\norigin_y {grid.origin[1]:.6f}\n")
        fh.write(f"resolution {grid.resolution:.6f}\nrows {grid.shape[0]}\ncols {grid.shape[1]}\n")
        fh.write(f"open_field {int(grid.open_field)}\n")
        if xi is not None:
            fh.write(f"xi {xi:.6g}\n")
