"""Scene builders shared by the unit tests."""
import math

import numpy as np

from nvpnav.perception import FreeSpacePolygon, column_azimuths


def ray_ranges(hit, n=900, max_range=30.0):
    """Ranges of a star polygon; ``hit(c, s)`` returns the distance along each unit ray."""
    phi = column_azimuths(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = hit(np.cos(phi), np.sin(phi))
    return np.where(np.isfinite(r) & (r > 0), np.minimum(r, max_range), max_range)


def corridor_poly(half_width=3.0, n=900, max_range=30.0):
    return FreeSpacePolygon.from_ranges(
        ray_ranges(lambda c, s: half_width / np.abs(s), n, max_range), max_range)


def disc_hit(cx, cy, radius):
    def hit(c, s):
        b = c * cx + s * cy
        disc = b * b - (cx * cx + cy * cy - radius * radius)
        with np.errstate(invalid="ignore"):
            t = b - np.sqrt(disc)
        return np.where((disc >= 0) & (t > 0), t, np.inf)
    return hit


def scene_poly(half_width=None, discs=(), n=900, max_range=30.0, walls_x=()):
    """Free-space polygon for walls at ``y = +-half_width``, discs and vertical walls."""
    def hit(c, s):
        r = np.full(c.shape, np.inf)
        if half_width is not None:
            r = np.minimum(r, half_width / np.abs(s))
        for d in discs:
            r = np.minimum(r, disc_hit(*d)(c, s))
        for x in walls_x:
            t = x / c
            r = np.minimum(r, np.where(t > 0, t, np.inf))
        return r
    return FreeSpacePolygon.from_ranges(ray_ranges(hit, n, max_range), max_range)


def l_corridor_poly(n=900, max_range=30.0):
    """Vehicle at the bottom of an L: road along +x (|y| < 2.5) turning up at x in [8, 13]."""
    def hit(c, s):
        r = np.full(c.shape, np.inf)
        # floor wall y = -2.5 everywhere, ceiling y = 2.5 for x < 8, far wall x = 13
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -2.5 / s
            r = np.where((t > 0), np.minimum(r, t), r)
            t = 2.5 / s
            x = t * c
            r = np.where((t > 0) & (x < 8.0), np.minimum(r, t), r)
            t = 13.0 / c
            r = np.where(t > 0, np.minimum(r, t), r)
            t = 8.0 / c  # inner corner wall x = 8 above y = 2.5
            y = t * s
            r = np.where((t > 0) & (y >= 2.5), np.minimum(r, t), r)
        return r
    return FreeSpacePolygon.from_ranges(ray_ranges(hit, n, max_range), max_range)


def rotate(pts, th):
    c, s = math.cos(th), math.sin(th)
    pts = np.asarray(pts, dtype=float)
    return np.stack([c * pts[..., 0] - s * pts[..., 1], s * pts[..., 0] + c * pts[..., 1]], axis=-1)
