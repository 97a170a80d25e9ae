"""Prism city model: buildings, facades, flat roofs and a neighbour index."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

from .ephemeris import GeoLocation
from .errors import InputDomainError, ValidationError

log = logging.getLogger(__name__)

EARTH_RADIUS = 6_371_000.0
MAX_EXTENT_DEG = 2.0
MIN_EDGE = 1e-3
MIN_AREA = 0.1
MAX_HEIGHT = 1000.0
DEFAULT_MIN_ALTITUDE = 5.0


@dataclass(frozen=True)
class Building:
    """Flat-roofed prism. The footprint is re-oriented on construction
    (exterior counterclockwise, holes clockwise)."""

    id: str
    footprint: Polygon
    height: float

    def __post_init__(self):
        fp = self.footprint
        if not isinstance(fp, Polygon):
            fp = Polygon(fp)
        if fp.is_empty or not fp.is_valid:
            raise ValidationError(f"building {self.id!r}: footprint is not a simple polygon "
                                  f"({shapely.is_valid_reason(fp)})")
        if fp.area <= MIN_AREA:
            raise ValidationError(f"building {self.id!r}: footprint area {fp.area:.4g} m2 "
                                  f"<= {MIN_AREA}")
        if not (0.0 < self.height <= MAX_HEIGHT) or not math.isfinite(self.height):
            raise ValidationError(f"building {self.id!r}: height {self.height} outside (0, 1000]")
        object.__setattr__(self, "footprint", orient(fp, sign=1.0))
        object.__setattr__(self, "height", float(self.height))

    @property
    def roof_ref(self) -> str:
        return f"roof:{self.id}"


@dataclass(frozen=True)
class Facade:
    """Vertical wall above one footprint edge.

    The parameterisation used for facade shadows and patches is ``(s, z)``:
    metres along the base edge from ``a`` and metres above ground.
    """

    id: str
    building_id: str
    a: tuple[float, float]
    b: tuple[float, float]
    height: float
    outward_normal: tuple[float, float]
    plane: tuple[float, float, float, float]

    @property
    def ref(self) -> str:
        return f"facade:{self.id}"

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    @property
    def area(self) -> float:
        return self.length * self.height

    @property
    def direction(self) -> tuple[float, float]:
        n = self.length
        return ((self.b[0] - self.a[0]) / n, (self.b[1] - self.a[1]) / n)

    @property
    def azimuth_deg(self) -> float:
        nx, ny = self.outward_normal
        return math.degrees(math.atan2(nx, ny)) % 360.0

    @property
    def rectangle(self) -> Polygon:
        return shapely.box(0.0, 0.0, self.length, self.height)

    def signed_distance(self, x, y):
        A, B, _, D = self.plane
        return A * np.asarray(x) + B * np.asarray(y) + D

    def to_world(self, s, z):
        """Map ``(s, z)`` facade coordinates to world ``(x, y, z)``."""
        ex, ey = self.direction
        s = np.asarray(s, dtype=float)
        return self.a[0] + s * ex, self.a[1] + s * ey, np.asarray(z, dtype=float)


@dataclass(frozen=True)
class RoofSurface:
    building_id: str
    polygon: Polygon
    elevation: float

    @property
    def ref(self) -> str:
        return f"roof:{self.building_id}"


@dataclass(frozen=True)
class SkippedEdge:
    building_id: str
    ring: int
    index: int
    length: float


def decompose_facades(b: Building, skipped: list | None = None) -> list[Facade]:
    """One facade per footprint edge (exterior ring first, then holes).

    Edges shorter than 1 mm are skipped; a ``SkippedEdge`` record is appended
    to ``skipped`` when a list is given.
    """
    rings = [b.footprint.exterior, *b.footprint.interiors]
    out = []
    k = 0
    for r, ring in enumerate(rings):
        c = list(ring.coords)[:-1]
        n = len(c)
        for i in range(n):
            (ax, ay), (bx, by) = c[i][:2], c[(i + 1) % n][:2]
            dx, dy = bx - ax, by - ay
            length = math.hypot(dx, dy)
            if length < MIN_EDGE:
                log.warning("building %s: skipping %.2e m edge %d of ring %d",
                            b.id, length, i, r)
                if skipped is not None:
                    skipped.append(SkippedEdge(b.id, r, i, length))
                continue
            # material lies left of every edge (CCW exterior, CW holes)
            nx, ny = dy / length, -dx / length
            plane = (nx, ny, 0.0, -(nx * ax + ny * ay))
            out.append(Facade(f"{b.id}/f{k:03d}", b.id, (ax, ay), (bx, by), b.height,
                              (nx, ny), plane))
            k += 1
    return out


class GridIndex:
    """Uniform-grid bounding-box index. Queries are conservative: every item
    whose box overlaps the query box is returned (possibly with extras)."""

    def __init__(self, boxes: np.ndarray, cell: float):
        self.cell = float(cell)
        self.boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
        self._cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, (x0, y0, x1, y1) in enumerate(self.boxes):
            for cx in range(self._c(x0), self._c(x1) + 1):
                for cy in range(self._c(y0), self._c(y1) + 1):
                    self._cells[(cx, cy)].append(i)

    def _c(self, v: float) -> int:
        return int(math.floor(v / self.cell))

    def query(self, x0: float, y0: float, x1: float, y1: float) -> list[int]:
        cx0, cx1, cy0, cy1 = self._c(x0), self._c(x1), self._c(y0), self._c(y1)
        found: set[int] = set()
        if (cx1 - cx0 + 1) * (cy1 - cy0 + 1) > len(self._cells):
            for key, items in self._cells.items():
                if cx0 <= key[0] <= cx1 and cy0 <= key[1] <= cy1:
                    found.update(items)
        else:
            for cx in range(cx0, cx1 + 1):
                for cy in range(cy0, cy1 + 1):
                    found.update(self._cells.get((cx, cy), ()))
        b = self.boxes
        return sorted(i for i in found
                      if b[i, 0] <= x1 and b[i, 2] >= x0 and b[i, 1] <= y1 and b[i, 3] >= y0)


@dataclass(frozen=True)
class Scene:
    buildings: tuple[Building, ...]
    facades: tuple[Facade, ...]
    origin: GeoLocation
    bounds: tuple[float, float, float, float]
    index: GridIndex = field(repr=False, compare=False)
    skipped_edges: tuple[SkippedEdge, ...] = ()

    def __post_init__(self):
        groups = defaultdict(list)
        for f in self.facades:
            groups[f.building_id].append(f)
        object.__setattr__(self, "_by_id", {b.id: i for i, b in enumerate(self.buildings)})
        object.__setattr__(self, "_facades_of", dict(groups))
        object.__setattr__(self, "_max_height", max(b.height for b in self.buildings))

    def building(self, bid: str) -> Building:
        return self.buildings[self._by_id[bid]]

    def facades_of(self, bid: str) -> list[Facade]:
        return self._facades_of.get(bid, [])

    @property
    def roofs(self) -> list[RoofSurface]:
        return [RoofSurface(b.id, b.footprint, b.height) for b in self.buildings]

    @property
    def max_height(self) -> float:
        return self._max_height

    def candidates(self, x0, y0, x1, y1) -> list[Building]:
        return [self.buildings[i] for i in self.index.query(x0, y0, x1, y1)]


def build_scene(buildings: Sequence[Building], origin: GeoLocation,
                margin: float | None = None) -> Scene:
    """Assemble an immutable scene.

    ``bounds`` is the footprint bounding box grown by ``margin`` metres; the
    default margin is the longest shadow the tallest building casts at the
    5 degree minimum altitude, so unflagged shadows are never clipped.
    """
    buildings = tuple(buildings)
    if not buildings:
        raise ValidationError("scene needs at least one building")
    seen = set()
    for b in buildings:
        if b.id in seen:
            raise ValidationError(f"duplicate building id {b.id!r}")
        seen.add(b.id)
    skipped: list[SkippedEdge] = []
    facades = tuple(f for b in buildings for f in decompose_facades(b, skipped))
    boxes = np.array([b.footprint.bounds for b in buildings])
    if margin is None:
        margin = max(b.height for b in buildings) / math.tan(math.radians(DEFAULT_MIN_ALTITUDE))
    bounds = (boxes[:, 0].min() - margin, boxes[:, 1].min() - margin,
              boxes[:, 2].max() + margin, boxes[:, 3].max() + margin)
    diag = np.hypot(boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1])
    cell = max(float(np.percentile(diag, 95)), 1.0)
    return Scene(buildings, facades, origin, tuple(float(v) for v in bounds),
                 GridIndex(boxes, cell), tuple(skipped))


def lonlat_to_local(lon, lat, origin: GeoLocation):
    """Equirectangular tangent projection about ``origin`` (metres)."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if (np.any(np.abs(lon - origin.longitude) > MAX_EXTENT_DEG)
            or np.any(np.abs(lat - origin.latitude) > MAX_EXTENT_DEG)):
        raise InputDomainError(f"vertex more than {MAX_EXTENT_DEG} deg from origin "
                               f"({origin.latitude}, {origin.longitude})")
    k = math.cos(math.radians(origin.latitude))
    x = EARTH_RADIUS * k * np.radians(lon - origin.longitude)
    y = EARTH_RADIUS * np.radians(lat - origin.latitude)
    return x, y


def local_to_lonlat(x, y, origin: GeoLocation):
    k = math.cos(math.radians(origin.latitude))
    lon = origin.longitude + np.degrees(np.asarray(x, dtype=float) / (EARTH_RADIUS * k))
    lat = origin.latitude + np.degrees(np.asarray(y, dtype=float) / EARTH_RADIUS)
    return lon, lat


def _project_polygon(poly: Polygon, origin: GeoLocation) -> Polygon:
    def ring(coords):
        c = np.asarray(coords)[:, :2]
        x, y = lonlat_to_local(c[:, 0], c[:, 1], origin)
        return np.column_stack([x, y])
    return Polygon(ring(poly.exterior.coords), [ring(h.coords) for h in poly.interiors])


def project_to_local(features: Iterable, origin: GeoLocation) -> list[Building]:
    """Turn ``(lonlat_polygon, height[, id])`` tuples into local-frame buildings.

    Polygons may be shapely polygons or coordinate sequences (exterior only).
    Missing ids default to ``b<index>``.
    """
    out = []
    for i, feat in enumerate(features):
        poly, height = feat[0], feat[1]
        bid = str(feat[2]) if len(feat) > 2 and feat[2] is not None else f"b{i}"
        if not isinstance(poly, Polygon):
            poly = Polygon(poly)
        out.append(Building(bid, _project_polygon(poly, origin), height))
    return out


def bbox_center(polygons: Iterable[Polygon]) -> GeoLocation:
    """Centre of the joint bounding box of lon/lat polygons."""
    b = np.array([p.bounds for p in polygons])
    return GeoLocation(float((b[:, 1].min() + b[:, 3].max()) / 2),
                       float((b[:, 0].min() + b[:, 2].max()) / 2))
