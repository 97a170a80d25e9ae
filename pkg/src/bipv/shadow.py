"""Analytic shadows of prism buildings on the ground, roofs and facades.

Ground and roof shadows are the footprint swept along the horizontal shadow
direction by ``h * cot(altitude)`` (``h`` relative to the receiving plane).
Facade shadows project a caster, clipped to the sunward half-space of the
target wall, along the light vector onto the wall plane and express the
result in the wall's ``(s, z)`` coordinates.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.affinity import affine_transform
from shapely.geometry.base import BaseGeometry

from . import geometry as geo
from .ephemeris import SunSample
from .errors import SunBelowHorizonError
from .scene import Building, Facade, Scene

DEFAULT_MIN_ALTITUDE = 5.0
GRAZING = 1e-12
PLANE_EPS = 1e-6


@dataclass(frozen=True)
class ShadowPolygon:
    """Shadow on one target surface. Ground and roof polygons are in world
    ``(x, y)``; facade polygons are in facade ``(s, z)`` coordinates."""

    surface_ref: str
    polygon: BaseGeometry
    caster_id: str | None
    timestamp: dt.datetime | None
    flags: frozenset = frozenset()

    @property
    def area(self) -> float:
        return self.polygon.area


@dataclass
class SurfaceShadow:
    """Union of all shadows falling on one roof or facade at one instant."""

    surface_ref: str
    building_id: str
    kind: str
    union: BaseGeometry
    parts: list[ShadowPolygon] = field(default_factory=list)
    whole: bool = False
    flags: set = field(default_factory=set)
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class SceneShadows:
    sun: SunSample
    surfaces: dict[str, SurfaceShadow]
    ground: list[ShadowPolygon] = field(default_factory=list)


def _require_sun(sun: SunSample):
    if sun.altitude_deg <= 0.0:
        raise SunBelowHorizonError(
            f"sun altitude {sun.altitude_deg:.3f} deg at {sun.timestamp} is not above the horizon")


def shadow_vector(height: float, sun: SunSample) -> tuple[float, float]:
    """Horizontal displacement of a point at ``height`` onto the ground plane."""
    d = height / math.tan(math.radians(sun.altitude_deg))
    tx, ty = sun.toward_sun
    return (-d * tx, -d * ty)


def ground_shadow(b: Building, sun: SunSample,
                  bounds: tuple[float, float, float, float] | None = None,
                  min_altitude: float = DEFAULT_MIN_ALTITUDE) -> ShadowPolygon:
    """Shadow of ``b`` on the ground, including its own footprint.

    Below ``min_altitude`` the result carries the ``"truncated"`` flag; it is
    always clipped to ``bounds`` when given.

    Raises:
        SunBelowHorizonError: altitude <= 0.
    """
    _require_sun(sun)
    poly = geo.sweep(b.footprint, shadow_vector(b.height, sun))
    flags = set()
    if bounds is not None:
        poly = geo.intersection(poly, geo.rect(*bounds))
    if sun.altitude_deg < min_altitude:
        flags.add("truncated")
    return ShadowPolygon("ground", poly, b.id, sun.timestamp, frozenset(flags))


def roof_shadow(caster: Building, target: Building, sun: SunSample) -> ShadowPolygon | None:
    """Shadow of ``caster`` on the flat roof of ``target``, or ``None``."""
    _require_sun(sun)
    rel = caster.height - target.height
    if rel <= 0.0 or caster.id == target.id:
        return None
    swept = geo.sweep(caster.footprint, shadow_vector(rel, sun))
    poly = geo.intersection(swept, target.footprint)
    if poly.is_empty:
        return None
    return ShadowPolygon(target.roof_ref, poly, caster.id, sun.timestamp)


def sun_facing(f: Facade, sun: SunSample) -> bool:
    tx, ty = sun.toward_sun
    nx, ny = f.outward_normal
    return nx * tx + ny * ty > 0.0


def facade_projection(target: Facade, sun: SunSample):
    """Affine map (shapely ``affine_transform`` matrix) sending a ground point
    ``(x, y, 0)`` along the light vector onto the wall, in ``(s, z)``.

    Returns ``None`` when the light is (numerically) parallel to the wall.
    """
    A, B, _, D = target.plane
    lx, ly, lz = sun.light_vector
    k = -(A * lx + B * ly)
    if abs(k) < GRAZING:
        return None
    ex, ey = target.direction
    le = lx * ex + ly * ey
    ax, ay = target.a
    sin_al = -lz
    return [ex + A * le / k, ey + B * le / k,
            -sin_al * A / k, -sin_al * B / k,
            -(ax * ex + ay * ey) + D * le / k, -sin_al * D / k]


def facade_shadow(caster: Building, target: Facade, sun: SunSample) -> ShadowPolygon | None:
    """Shadow of the prism ``caster`` on ``target`` in ``(s, z)`` coordinates.

    A wall facing away from the sun is returned fully covered with the
    ``"orientation"`` flag. Light parallel to the wall gives an empty polygon
    flagged ``"grazing"``. ``None`` means no shadow from this caster.
    """
    _require_sun(sun)
    rect = target.rectangle
    m = facade_projection(target, sun)
    if m is None:
        return ShadowPolygon(target.ref, geo.EMPTY, caster.id, sun.timestamp,
                             frozenset({"grazing"}))
    if not sun_facing(target, sun):
        return ShadowPolygon(target.ref, rect, caster.id, sun.timestamp,
                             frozenset({"orientation"}))
    A, B, _, D = target.plane
    fp = caster.footprint
    ext = np.asarray(fp.exterior.coords)[:, :2]
    f = ext @ (A, B) + D
    if f.max() < PLANE_EPS:
        return None  # wholly behind the wall plane
    # vertex images bound the image of the clipped footprint from outside
    s = ext @ m[0:2] + m[4]
    z = ext @ m[2:4] + m[5]
    front = f >= PLANE_EPS
    if not front.all():
        s, z = _with_crossings(s, z, f)
    if z.min() >= target.height or s.min() > target.length or s.max() < 0.0 \
            or z.max() + caster.height <= 0.0:
        return None
    if front.all():
        clipped = fp
    else:
        x0, y0, x1, y1 = fp.bounds
        half = geo.halfplane((A, B), D - PLANE_EPS, (x0 - 1, y0 - 1, x1 + 1, y1 + 1))
        clipped = geo.intersection(fp, half)
        if clipped.is_empty:
            return None
    base = affine_transform(clipped, m)
    proj = geo.sweep(base, (0.0, caster.height))
    poly = geo.intersection(proj, rect)
    if poly.is_empty:
        return None
    return ShadowPolygon(target.ref, poly, caster.id, sun.timestamp)


def _with_crossings(s, z, f):
    """Front vertex images plus images of the points where ring edges cross
    the wall plane (the extra vertices the half-plane clip introduces)."""
    keep = f >= PLANE_EPS
    a, b = f[:-1], f[1:]
    cross = (a >= PLANE_EPS) != (b >= PLANE_EPS)
    t = (PLANE_EPS - a[cross]) / (b[cross] - a[cross])
    sc = s[:-1][cross] + t * (s[1:][cross] - s[:-1][cross])
    zc = z[:-1][cross] + t * (z[1:][cross] - z[:-1][cross])
    return np.concatenate([s[keep], sc]), np.concatenate([z[keep], zc])


def _toward_box(box, reach: float, sun: SunSample):
    """Grow ``box`` by ``reach`` metres in the direction of the sun."""
    x0, y0, x1, y1 = box
    tx, ty = sun.toward_sun
    dx, dy = reach * tx, reach * ty
    return (x0 + min(0.0, dx), y0 + min(0.0, dy), x1 + max(0.0, dx), y1 + max(0.0, dy))


def roof_surface_shadow(scene: Scene, target: Building, sun: SunSample) -> SurfaceShadow:
    cot = 1.0 / math.tan(math.radians(sun.altitude_deg))
    reach = max(scene.max_height - target.height, 0.0) * cot
    out = SurfaceShadow(target.roof_ref, target.id, "roof", geo.EMPTY)
    if reach <= 0.0:
        return out
    query = _toward_box(target.footprint.bounds, reach, sun)
    for c in scene.candidates(*query):
        if c.id == target.id or c.height <= target.height:
            continue
        sp = roof_shadow(c, target, sun)
        if sp is not None:
            out.parts.append(sp)
    out.union = geo.union_all([p.polygon for p in out.parts])
    return out


def facade_surface_shadow(scene: Scene, target: Facade, sun: SunSample) -> SurfaceShadow:
    out = SurfaceShadow(target.ref, target.building_id, "facade", geo.EMPTY)
    if facade_projection(target, sun) is None:
        out.flags.add("grazing")
        return out
    if not sun_facing(target, sun):
        out.whole = True
        out.union = target.rectangle
        out.flags.add("orientation")
        return out
    cot = 1.0 / math.tan(math.radians(sun.altitude_deg))
    (ax, ay), (bx, by) = target.a, target.b
    box = (min(ax, bx), min(ay, by), max(ax, bx), max(ay, by))
    query = _toward_box(box, scene.max_height * cot, sun)
    for c in scene.candidates(*query):
        sp = facade_shadow(c, target, sun)
        if sp is not None and not sp.polygon.is_empty:
            out.parts.append(sp)
    out.union = geo.union_all([p.polygon for p in out.parts])
    return out


def surface_refs(scene: Scene) -> list[str]:
    """All roof and facade references in canonical (sorted) order."""
    return sorted([b.roof_ref for b in scene.buildings] + [f.ref for f in scene.facades])


def surface_shadow(scene: Scene, ref: str, sun: SunSample) -> SurfaceShadow:
    kind, _, key = ref.partition(":")
    try:
        if kind == "roof":
            return roof_surface_shadow(scene, scene.building(key), sun)
        bid = key.rsplit("/", 1)[0]
        facade = next(f for f in scene.facades_of(bid) if f.id == key)
        return facade_surface_shadow(scene, facade, sun)
    except Exception as exc:  # degrade per surface, never abort the scene
        out = SurfaceShadow(ref, key.rsplit("/", 1)[0], kind, geo.EMPTY)
        out.flags.add("failed")
        out.diagnostics.append(f"{type(exc).__name__}: {exc}")
        return out


def scene_shadows(scene: Scene, sun: SunSample, refs: list[str] | None = None,
                  include_ground: bool = False,
                  min_altitude: float = DEFAULT_MIN_ALTITUDE) -> SceneShadows:
    """Shadows on every roof and facade of ``scene`` at one sun position.

    Surfaces are keyed and ordered by reference; per-caster parts are ordered
    by caster id, so the output does not depend on evaluation order.

    Raises:
        SunBelowHorizonError: altitude <= 0.
    """
    _require_sun(sun)
    refs = surface_refs(scene) if refs is None else sorted(refs)
    surfaces = {}
    for ref in refs:
        s = surface_shadow(scene, ref, sun)
        s.parts.sort(key=lambda p: p.caster_id or "")
        surfaces[ref] = s
    ground = []
    if include_ground:
        ground = [ground_shadow(b, sun, scene.bounds, min_altitude)
                  for b in sorted(scene.buildings, key=lambda b: b.id)]
    return SceneShadows(sun, surfaces, ground)


def point_shaded(shadow: SurfaceShadow, u, v) -> np.ndarray:
    """Vectorised membership test of surface-parameter points in a shadow union."""
    u = np.asarray(u, dtype=float)
    if shadow.whole:
        return np.ones(u.shape, dtype=bool)
    if shadow.union.is_empty:
        return np.zeros(u.shape, dtype=bool)
    return shapely.contains_xy(shadow.union, u, v)
