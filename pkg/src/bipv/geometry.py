"""Polygon kernel shared by the shadow and insolation code.

Every boolean operation goes through the helpers here so that snap-rounding
(``GRID``) and sliver culling (``SLIVER_AREA``) are applied uniformly.
Backed by GEOS via shapely 2.
"""

from __future__ import annotations

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon, box
from shapely.geometry.base import BaseGeometry

GRID = 1e-7          # snap-rounding grid, metres
SLIVER_AREA = 1e-4   # polygons smaller than this are dropped, m^2

EMPTY = Polygon()


def polygonal(geom: BaseGeometry | None, cull: bool = True) -> BaseGeometry:
    """Keep only the areal part of ``geom``; with ``cull`` also drop components
    below ``SLIVER_AREA``."""
    floor = SLIVER_AREA if cull else 0.0
    if geom is None or geom.is_empty:
        return EMPTY
    if isinstance(geom, Polygon):
        return geom if geom.area >= floor and geom.area > 0 else EMPTY
    parts = [g for g in shapely.get_parts(geom)
             if isinstance(g, (Polygon, MultiPolygon)) and g.area >= floor and g.area > 0]
    if not parts:
        return EMPTY
    if len(parts) == 1:
        return parts[0]
    return MultiPolygon([p for g in parts for p in shapely.get_parts(g)])


def union_all(geoms) -> BaseGeometry:
    geoms = [g for g in geoms if g is not None and not g.is_empty]
    if not geoms:
        return EMPTY
    if len(geoms) == 1:
        return polygonal(geoms[0])
    return polygonal(shapely.union_all(geoms, grid_size=GRID))


def intersection(a: BaseGeometry, b: BaseGeometry, cull: bool = True) -> BaseGeometry:
    if a.is_empty or b.is_empty:
        return EMPTY
    return polygonal(shapely.intersection(a, b, grid_size=GRID), cull)


def difference(a: BaseGeometry, b: BaseGeometry, cull: bool = True) -> BaseGeometry:
    if a.is_empty:
        return EMPTY
    if b.is_empty:
        return a
    return polygonal(shapely.difference(a, b, grid_size=GRID), cull)


def split_slivers(geom: BaseGeometry) -> tuple[BaseGeometry, BaseGeometry]:
    """Separate ``geom`` into (components >= ``SLIVER_AREA``, slivers)."""
    if geom.is_empty:
        return EMPTY, EMPTY
    parts = list(shapely.get_parts(geom))
    big = [p for p in parts if p.area >= SLIVER_AREA]
    small = [p for p in parts if p.area < SLIVER_AREA]
    def join(ps):
        if not ps:
            return EMPTY
        return ps[0] if len(ps) == 1 else MultiPolygon(ps)
    return join(big), join(small)


def ring_edges(poly: BaseGeometry) -> np.ndarray:
    """All boundary edges of a (multi)polygon as an ``(n, 2, 2)`` array."""
    out = []
    for p in shapely.get_parts(poly):
        for ring in [p.exterior, *p.interiors]:
            c = np.asarray(ring.coords)[:, :2]
            if len(c) >= 2:
                out.append(np.stack([c[:-1], c[1:]], axis=1))
    if not out:
        return np.zeros((0, 2, 2))
    return np.concatenate(out)


def is_convex(poly: BaseGeometry) -> bool:
    """True for a single hole-free polygon whose exterior turns one way only."""
    if not isinstance(poly, Polygon) or poly.interiors:
        return False
    c = np.asarray(poly.exterior.coords)[:-1, :2]
    d = np.roll(c, -1, axis=0) - c
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


def sweep(poly: BaseGeometry, vector) -> BaseGeometry:
    """Region covered by translating ``poly`` along ``[0, 1] * vector``.

    Computed as the union of ``poly`` with the parallelogram traced by each
    boundary edge, which equals the Minkowski sum with the segment. For a
    convex polygon that sum is the hull of both end positions.
    """
    if poly.is_empty:
        return EMPTY
    vx, vy = float(vector[0]), float(vector[1])
    if vx * vx + vy * vy < 1e-18:
        return poly
    if is_convex(poly):
        c = np.asarray(poly.exterior.coords)[:-1, :2]
        pts = shapely.multipoints(np.concatenate([c, c + (vx, vy)]))
        return polygonal(shapely.convex_hull(pts))
    e = ring_edges(poly)
    a, b = e[:, 0], e[:, 1]
    d = b - a
    cross = d[:, 0] * vy - d[:, 1] * vx
    keep = np.abs(cross) > 1e-9
    a, b = a[keep], b[keep]
    v = np.array([vx, vy])
    quads = np.stack([a, b, b + v, a + v, a], axis=1)
    polys = shapely.polygons(quads)
    return union_all([poly, *polys])


def rect(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon:
    return box(xmin, ymin, xmax, ymax)


def halfplane(normal, offset: float, extent: tuple[float, float, float, float]) -> Polygon:
    """Polygon for ``{p : normal . p + offset >= 0}`` restricted to a bounding box."""
    xmin, ymin, xmax, ymax = extent
    corners = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
    n = np.asarray(normal, dtype=float)
    # clip the box polygon against one line (Sutherland-Hodgman, single plane)
    out = []
    k = len(corners)
    for i in range(k):
        p, q = corners[i], corners[(i + 1) % k]
        fp, fq = p @ n + offset, q @ n + offset
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            s = fp / (fp - fq)
            out.append(p + s * (q - p))
    if len(out) < 3:
        return EMPTY
    return Polygon(out)
