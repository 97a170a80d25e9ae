"""Synthetic scenes and clear-sky weather for demos and scenario checks."""

from __future__ import annotations

import datetime as dt
import math

import numpy as np
import shapely
from shapely.affinity import rotate, translate
from shapely.geometry import Polygon, box

from .ephemeris import UTC, GeoLocation, as_utc, solar_angles
from .irradiance import WeatherRecord, WeatherSeries
from .scene import Building, Scene, build_scene

SOLAR_CONSTANT = 1353.0


def clear_sky(altitude_deg):
    """Meinel-type clear-sky beam and a 10% diffuse fraction, W/m2.

    Returns ``(dni, dhi, ghi)`` with ``ghi = dni * sin(alt) + dhi``.
    """
    alt = np.asarray(altitude_deg, dtype=float)
    up = alt > 0
    sin_al = np.sin(np.radians(np.where(up, alt, 90.0)))
    air_mass = 1.0 / sin_al
    dni = np.where(up, SOLAR_CONSTANT * 0.7 ** (air_mass ** 0.678), 0.0)
    dhi = 0.1 * dni
    ghi = np.where(up, dni * sin_al + dhi, 0.0)
    return dni, dhi, ghi


def clear_sky_weather(loc: GeoLocation, start: dt.datetime, end: dt.datetime,
                      spacing_minutes: int = 60, temp_air: float = 20.0,
                      wind_speed: float = 1.0) -> WeatherSeries:
    """Regularly spaced clear-sky records covering ``[start, end]``."""
    start, end = as_utc(start), as_utc(end)
    step = dt.timedelta(minutes=spacing_minutes)
    n = int((end - start) // step) + 1
    times = [start + i * step for i in range(n)]
    alt, _ = solar_angles([t.timestamp() for t in times], loc.latitude, loc.longitude)
    dni, dhi, ghi = clear_sky(alt)
    recs = [WeatherRecord(t, float(a), float(b), float(c), temp_air, wind_speed)
            for t, a, b, c in zip(times, dni, dhi, ghi)]
    return WeatherSeries(recs, spacing_minutes * 60.0)


def weather_for_dates(loc: GeoLocation, dates, spacing_minutes: int = 60, **kw) -> WeatherSeries:
    first, last = min(dates), max(dates)
    start = dt.datetime(first.year, first.month, first.day, tzinfo=UTC) - dt.timedelta(days=1)
    end = dt.datetime(last.year, last.month, last.day, tzinfo=UTC) + dt.timedelta(days=2)
    return clear_sky_weather(loc, start, end, spacing_minutes, **kw)


def random_footprint(rng: np.random.Generator, size: tuple[float, float] = (5.0, 20.0)) -> Polygon:
    """A rectangle or L-shape, randomly rotated, centred near the origin."""
    w, d = rng.uniform(*size, 2)
    if rng.random() < 0.3:
        cw, cd = w * rng.uniform(0.3, 0.6), d * rng.uniform(0.3, 0.6)
        poly = Polygon([(0, 0), (w, 0), (w, d - cd), (w - cw, d - cd), (w - cw, d), (0, d)])
    else:
        poly = box(0, 0, w, d)
    poly = translate(poly, -w / 2, -d / 2)
    return rotate(poly, rng.uniform(0, 180), origin=(0, 0))


def random_scene(rng: np.random.Generator, n: int = 10, extent: float = 80.0,
                 heights: tuple[float, float] = (3.0, 100.0), gap: float = 1.0,
                 origin: GeoLocation = GeoLocation(22.3, 114.2),
                 size: tuple[float, float] = (5.0, 20.0)) -> Scene:
    """Up to ``n`` non-overlapping random prisms within ``extent`` metres."""
    placed: list[Polygon] = []
    buildings = []
    for _ in range(50 * n):
        if len(buildings) == n:
            break
        fp = translate(random_footprint(rng, size), *rng.uniform(0, extent, 2))
        if any(fp.distance(p) < gap for p in placed):
            continue
        placed.append(fp)
        buildings.append(Building(f"b{len(buildings):02d}", fp, float(rng.uniform(*heights))))
    return build_scene(buildings, origin)


def block_scene(rows: int, cols: int, width: float, depth: float, height: float,
                gap: float, origin: GeoLocation = GeoLocation(22.3, 114.2),
                prefix: str = "t") -> Scene:
    """Regular grid of identical rectangular prisms separated by ``gap``."""
    buildings = []
    for r in range(rows):
        for c in range(cols):
            x, y = c * (width + gap), r * (depth + gap)
            buildings.append(Building(f"{prefix}{r}{c}", box(x, y, x + width, y + depth), height))
    return build_scene(buildings, origin)


def synthetic_city(n: int = 1000, seed: int = 0, spacing: float = 30.0,
                   origin: GeoLocation = GeoLocation(22.3, 114.2)) -> Scene:
    """Jittered street grid of ``n`` prisms with mixed heights (mostly low/mid-rise)."""
    rng = np.random.default_rng(seed)
    side = int(math.ceil(math.sqrt(n)))
    buildings = []
    for k in range(n):
        r, c = divmod(k, side)
        w, d = rng.uniform(8, 20, 2)
        fp = box(0, 0, w, d)
        fp = rotate(fp, rng.uniform(-15, 15), origin="centroid")
        cx = c * spacing + rng.uniform(-2, 2)
        cy = r * spacing + rng.uniform(-2, 2)
        fp = translate(fp, cx - fp.centroid.x, cy - fp.centroid.y)
        h = float(np.clip(rng.lognormal(math.log(15), 0.6), 3, 150))
        buildings.append(Building(f"c{k:04d}", fp, h))
    return build_scene(buildings, origin)
