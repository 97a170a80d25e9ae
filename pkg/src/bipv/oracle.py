"""Brute-force reference: ray-cast point sampling against the prism scene.

Shares nothing with the polygon pipeline beyond plain arithmetic: each sample
point marches a ray toward the sun and is tested against every prism with a
height slab plus a 2-D segment/footprint test. Intended for tests only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .ephemeris import SunSample
from .scene import Scene

SELF_EXCLUSION = 1e-3


@dataclass(frozen=True)
class SampleGrid:
    """Cell-centred samples on one surface.

    ``points`` are world ``(x, y, z)``; ``params`` the surface coordinates
    (world ``(x, y)`` for roofs, ``(s, z)`` for facades).
    """

    surface_ref: str
    building_index: int
    spacing: float
    points: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")


class _Packed:
    """Scene flattened into arrays for the jitted kernel."""

    def __init__(self, scene: Scene):
        boxes, heights, starts, ends, edges = [], [], [], [], []
        for b in scene.buildings:
            boxes.append(b.footprint.bounds)
            heights.append(b.height)
            starts.append(len(edges))
            for ring in [b.footprint.exterior, *b.footprint.interiors]:
                c = list(ring.coords)
                for (ax, ay), (bx, by) in zip(c[:-1], c[1:]):
                    edges.append((ax, ay, bx, by))
            ends.append(len(edges))
        self.boxes = np.array(boxes, dtype=np.float64)
        self.heights = np.array(heights, dtype=np.float64)
        self.starts = np.array(starts, dtype=np.int64)
        self.ends = np.array(ends, dtype=np.int64)
        self.edges = np.array(edges, dtype=np.float64).reshape(-1, 4)
        self.index = {b.id: i for i, b in enumerate(scene.buildings)}


@numba.njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@numba.njit(cache=True)
def _segments_cross(p0x, p0y, p1x, p1y, ax, ay, bx, by):
    d1 = _orient(ax, ay, bx, by, p0x, p0y)
    d2 = _orient(ax, ay, bx, by, p1x, p1y)
    d3 = _orient(p0x, p0y, p1x, p1y, ax, ay)
    d4 = _orient(p0x, p0y, p1x, p1y, bx, by)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) \
        and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


@numba.njit(cache=True)
def _inside(px, py, edges, e0, e1):
    c = False
    for k in range(e0, e1):
        ax, ay, bx, by = edges[k, 0], edges[k, 1], edges[k, 2], edges[k, 3]
        if (ay > py) != (by > py):
            xi = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < xi:
                c = not c
    return c


@numba.njit(cache=True)
def _shaded_kernel(points, own, dx, dy, dz, boxes, heights, starts, ends, edges):
    n = points.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    nb = heights.shape[0]
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        for b in range(nb):
            h = heights[b]
            if pz >= h:
                continue
            s1 = (h - pz) / dz
            s0 = SELF_EXCLUSION if b == own[i] else 0.0
            if s0 >= s1:
                continue
            q0x, q0y = px + s0 * dx, py + s0 * dy
            q1x, q1y = px + s1 * dx, py + s1 * dy
            if max(q0x, q1x) < boxes[b, 0] or min(q0x, q1x) > boxes[b, 2] \
                    or max(q0y, q1y) < boxes[b, 1] or min(q0y, q1y) > boxes[b, 3]:
                continue
            hit = _inside(q0x, q0y, edges, starts[b], ends[b]) \
                or _inside(q1x, q1y, edges, starts[b], ends[b])
            if not hit:
                for k in range(starts[b], ends[b]):
                    if _segments_cross(q0x, q0y, q1x, q1y,
                                       edges[k, 0], edges[k, 1], edges[k, 2], edges[k, 3]):
                        hit = True
                        break
            if hit:
                out[i] = True
                break
    return out


def _toward_sun(sun: SunSample):
    lx, ly, lz = sun.light_vector
    return -lx, -ly, -lz


def raycast_many(points: np.ndarray, sun: SunSample, scene: Scene,
                 own: np.ndarray | None = None, packed: _Packed | None = None) -> np.ndarray:
    """Shade flags for many points. ``own[i]`` is the index of the building
    the point lies on (-1 for none)."""
    if sun.altitude_deg <= 0:
        raise ValueError("oracle needs the sun above the horizon")
    packed = packed or _Packed(scene)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    if own is None:
        own = np.full(len(pts), -1, dtype=np.int64)
    dx, dy, dz = _toward_sun(sun)
    return _shaded_kernel(pts, np.asarray(own, dtype=np.int64), dx, dy, dz, packed.boxes,
                          packed.heights, packed.starts, packed.ends, packed.edges)


def raycast_shaded(point, sun: SunSample, scene: Scene, own_building: str | None = None) -> bool:
    """True iff the ray from ``point`` toward the sun hits a prism.

    Hits on ``own_building`` within 1 mm of the point are ignored.
    """
    packed = _Packed(scene)
    own = packed.index.get(own_building, -1) if own_building is not None else -1
    return bool(raycast_many(np.array([point]), sun, scene, np.array([own]), packed)[0])


def _centres(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = max(1, int(math.floor((hi - lo) / spacing)))
    return lo + spacing * (np.arange(n) + 0.5)


def sample_surface(scene: Scene, ref: str, spacing: float = 0.25) -> SampleGrid:
    """Regular cell-centred grid on a roof or facade."""
    kind, _, key = ref.partition(":")
    if kind == "roof":
        b = scene.building(key)
        x0, y0, x1, y1 = b.footprint.bounds
        xs, ys = np.meshgrid(_centres(x0, x1, spacing), _centres(y0, y1, spacing))
        xs, ys = xs.ravel(), ys.ravel()
        packed_b = _Packed(scene)
        inside = np.array([_inside(x, y, packed_b.edges, packed_b.starts[packed_b.index[key]],
                                   packed_b.ends[packed_b.index[key]])
                           for x, y in zip(xs, ys)], dtype=bool)
        xs, ys = xs[inside], ys[inside]
        pts = np.column_stack([xs, ys, np.full(len(xs), b.height)])
        return SampleGrid(ref, packed_b.index[key], spacing, pts, np.column_stack([xs, ys]))
    bid = key.rsplit("/", 1)[0]
    f = next(f for f in scene.facades_of(bid) if f.id == key)
    ss, zs = np.meshgrid(_centres(0.0, f.length, spacing), _centres(0.0, f.height, spacing))
    ss, zs = ss.ravel(), zs.ravel()
    x, y, z = f.to_world(ss, zs)
    idx = [b.id for b in scene.buildings].index(bid)
    return SampleGrid(ref, idx, spacing, np.column_stack([x, y, z]), np.column_stack([ss, zs]))


def grid_shaded(grid: SampleGrid, sun: SunSample, scene: Scene,
                packed: _Packed | None = None) -> np.ndarray:
    own = np.full(len(grid.points), grid.building_index, dtype=np.int64)
    return raycast_many(grid.points, sun, scene, own, packed)


def raster_insolation(grid: SampleGrid, suns: Sequence[SunSample], scene: Scene,
                      interval_minutes: int) -> np.ndarray:
    """Sunlit minutes per sample point: unshaded instants x interval."""
    packed = _Packed(scene)
    lit = np.zeros(len(grid.points), dtype=np.int64)
    for sun in suns:
        lit += ~grid_shaded(grid, sun, scene, packed)
    return lit * int(interval_minutes)
