"""End-to-end run: shadows -> patches -> POA -> power -> rollups."""

from __future__ import annotations

import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aggregate import BuildingPotential, PatchResult, RegionReport, building_rollup, region_rollup
from .ephemeris import DayWindow, GeoLocation, SunSample, day_window, sun_positions, timeline, UTC
from .errors import InvariantError, NoCrossingError, WindowCollapsedError
from .insolation import SurfacePatch, accumulate_suns, mask_matrix, shade_fraction
from .irradiance import DEFAULT_ALBEDO, WeatherSeries, poa_components
from .pvmodel import FACADE, ROOF, PVConfig, cell_temperature, facade_orientation, \
    rooftop_orientation, unit_power
from .scene import Scene

log = logging.getLogger(__name__)


@dataclass
class RunSettings:
    interval_minutes: int = 60
    padding_minutes: int = 30
    min_altitude_deg: float = 5.0
    albedo: float = DEFAULT_ALBEDO
    pv: PVConfig = field(default_factory=PVConfig)
    workers: int = 1
    lossy: bool = False


@dataclass
class DayRun:
    date: dt.date
    window: DayWindow
    suns: list[SunSample]
    patches: dict[str, list[SurfacePatch]]
    results: list[PatchResult]
    class_power: dict[str, np.ndarray]
    building_power: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def building_energy_series(self, building_id: str, interval_minutes: int) -> np.ndarray:
        """Per-instant energy (kWh) of one building, roof plus facades."""
        p = self.building_power.get(building_id, {})
        tot = sum(p.values()) if p else np.zeros(len(self.suns))
        return tot * interval_minutes / 60.0 / 1000.0


@dataclass
class Simulation:
    settings: RunSettings
    days: list[DayRun]
    buildings: list[BuildingPotential]
    region: RegionReport
    diagnostics: list[str] = field(default_factory=list)

    @property
    def patch_results(self) -> list[PatchResult]:
        return [r for d in self.days for r in d.results]


def _polar_day_window(date: dt.date, loc: GeoLocation) -> DayWindow:
    midnight = dt.datetime(date.year, date.month, date.day, tzinfo=UTC) \
        - dt.timedelta(hours=loc.longitude / 15.0)
    return DayWindow(midnight, midnight + dt.timedelta(hours=24) - dt.timedelta(seconds=1), 0)


def surface_patch_results(date, patches: Sequence[SurfacePatch], suns: Sequence[SunSample],
                          wx: dict[str, np.ndarray], orient, surface_class: str,
                          cfg: PVConfig, interval_minutes: int):
    """Daily totals for every patch of one surface plus its area-weighted
    per-instant power (W/m2)."""
    alt = np.array([s.altitude_deg for s in suns])
    az = np.array([s.azimuth_deg for s in suns])
    g_dir, g_dif, g_ref = poa_components(wx["dni"], wx["dhi"], wx["ghi"], alt, az, orient)
    shaded = mask_matrix(patches)
    beam = np.where(shaded, 0.0, g_dir[None, :])
    poa_tot = beam + (g_dif + g_ref)[None, :]
    t_cell = cell_temperature(poa_tot, wx["temp_air"][None, :], wx["wind_speed"][None, :], cfg)
    p = np.atleast_2d(unit_power(poa_tot, t_cell, surface_class, cfg))
    hours = interval_minutes / 60.0 / 1000.0
    n = len(suns)
    out = []
    for i, patch in enumerate(patches):
        t_p = patch.overlap_count * interval_minutes
        out.append(PatchResult(
            date=date, surface_ref=patch.surface_ref, building_id=patch.building_id,
            surface_class=surface_class, area_m2=patch.area_m2,
            sunlit_minutes=n * interval_minutes - t_p, shaded_minutes=t_p,
            poa_kwh_m2=float(poa_tot[i].sum() * hours),
            direct_kwh_m2=float(beam[i].sum() * hours),
            pv_kwh_m2=float(p[i].sum() * hours),
            patch=patch))
    areas = np.array([pt.area_m2 for pt in patches])
    return out, areas, p


def simulate_day(scene: Scene, weather: WeatherSeries, date: dt.date,
                 settings: RunSettings = RunSettings()) -> DayRun | None:
    """Simulate one day at ``scene.origin``; ``None`` for polar night or a
    window collapsed by padding."""
    loc = scene.origin
    try:
        window = day_window(date, loc, settings.padding_minutes)
    except NoCrossingError as exc:
        if exc.sign < 0:
            log.info("%s: polar night, skipped", date)
            return None
        window = _polar_day_window(date, loc)
    except WindowCollapsedError:
        log.info("%s: padding collapses the daylight window, skipped", date)
        return None
    times = timeline(window, settings.interval_minutes)
    suns = sun_positions(times, loc)
    suns = [s for s in suns if s.altitude_deg > 0.0]
    if not suns:
        return None
    wx = weather.align([s.timestamp for s in suns])
    patches = accumulate_suns(scene, suns, settings.workers, settings.lossy)
    cfg = settings.pv
    roof_orient = rooftop_orientation(loc, cfg, settings.albedo)
    facades = {f.ref: f for f in scene.facades}
    results: list[PatchResult] = []
    weighted = {ROOF: np.zeros(len(suns)), FACADE: np.zeros(len(suns))}
    area_tot = {ROOF: 0.0, FACADE: 0.0}
    per_building: dict[str, dict[str, np.ndarray]] = {}
    for ref, ps in patches.items():
        if ref.startswith("roof:"):
            cls, orient = ROOF, roof_orient
        else:
            cls, orient = FACADE, facade_orientation(facades[ref], settings.albedo)
        res, areas, p = surface_patch_results(date, ps, suns, wx, orient, cls, cfg,
                                              settings.interval_minutes)
        results.extend(res)
        watts = (areas[:, None] * p).sum(axis=0)
        weighted[cls] += watts
        area_tot[cls] += areas.sum()
        bp = per_building.setdefault(ps[0].building_id, {})
        bp[cls] = bp.get(cls, 0.0) + watts
    class_power = {c: (weighted[c] / area_tot[c] if area_tot[c] > 0 else weighted[c])
                   for c in weighted}
    return DayRun(date, window, suns, patches, results, class_power, per_building)


def _profiles(days: Sequence[DayRun], longitude: float) -> dict[str, dict[int, float]]:
    acc = {ROOF: defaultdict(list), FACADE: defaultdict(list)}
    for d in days:
        for k, s in enumerate(d.suns):
            t = s.timestamp
            solar_h = (t.hour + t.minute / 60.0 + t.second / 3600.0 + longitude / 15.0) % 24.0
            for c in acc:
                acc[c][int(math.floor(solar_h))].append(float(d.class_power[c][k]))
    return {c: {h: float(np.mean(v)) for h, v in sorted(a.items())} for c, a in acc.items()}


def simulate(scene: Scene, weather: WeatherSeries, dates: Sequence[dt.date],
             settings: RunSettings = RunSettings()) -> Simulation:
    """Run every date and roll results up to buildings and the whole scene."""
    days = []
    diagnostics = []
    for date in dates:
        d = simulate_day(scene, weather, date, settings)
        if d is None:
            diagnostics.append(f"{date}: no daylight window, skipped")
            continue
        days.append(d)
        for ps in d.patches.values():
            for p in ps:
                diagnostics.extend(f"{date}: {m}" for m in p.diagnostics)
    per_building: dict[str, list[PatchResult]] = defaultdict(list)
    for d in days:
        for r in d.results:
            per_building[r.building_id].append(r)
    buildings = []
    for b in sorted(scene.buildings, key=lambda b: b.id):
        facade_area = sum(f.area for f in scene.facades_of(b.id))
        buildings.append(building_rollup(b.id, per_building.get(b.id, []),
                                         b.footprint.area, facade_area))
    shade = []
    for d in days:
        for k, s in enumerate(d.suns):
            fr = shade_fraction(d.patches, k)
            shade.append({"timestamp": s.timestamp.isoformat(), **fr})
    centroids = {b.id: (b.footprint.centroid.x, b.footprint.centroid.y) for b in scene.buildings}
    region = region_rollup(buildings, scene.bounds, centroids, shade,
                           _profiles(days, scene.origin.longitude))
    return Simulation(settings, days, buildings, region, diagnostics)


def check_invariants(scene: Scene, sim: Simulation, rel_tol: float = 1e-6):
    """Post-run consistency checks.

    Raises:
        InvariantError: a surface's patch areas do not add up to the surface
            area, a patch's exposure minutes do not add up to the window, or
            an energy total is negative.
    """
    areas = {b.roof_ref: b.footprint.area for b in scene.buildings}
    areas.update({f.ref: f.area for f in scene.facades})
    window = {}
    for d in sim.days:
        window[d.date] = len(d.suns) * sim.settings.interval_minutes
        for ref, ps in d.patches.items():
            tot = sum(p.area_m2 for p in ps)
            if abs(tot - areas[ref]) > rel_tol * areas[ref]:
                raise InvariantError(f"{d.date} {ref}: patch areas sum to {tot:.9g} m2, "
                                     f"surface is {areas[ref]:.9g} m2")
    for r in sim.patch_results:
        if r.sunlit_minutes + r.shaded_minutes != window[r.date] or r.sunlit_minutes < 0:
            raise InvariantError(f"{r.date} {r.surface_ref}: t_s + t_p != {window[r.date]} min")
    for b in sim.buildings:
        if min(b.roof_kwh, b.facade_kwh) < 0:
            raise InvariantError(f"building {b.building_id}: negative energy")
