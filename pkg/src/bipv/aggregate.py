"""Energy integration and building / region rollups."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError
from .pvmodel import FACADE, ROOF, PowerSample


@dataclass(frozen=True)
class PatchResult:
    """Per-patch totals for one simulated day."""

    date: dt.date
    surface_ref: str
    building_id: str
    surface_class: str
    area_m2: float
    sunlit_minutes: int
    shaded_minutes: int
    poa_kwh_m2: float
    direct_kwh_m2: float
    pv_kwh_m2: float
    patch: object = field(default=None, compare=False, repr=False)

    @property
    def pv_kwh(self) -> float:
        return self.pv_kwh_m2 * self.area_m2


@dataclass(frozen=True)
class BuildingPotential:
    building_id: str
    roof_kwh: float
    facade_kwh: float
    roof_area_m2: float
    facade_area_m2: float
    roof_direct_kwh: float = 0.0
    facade_direct_kwh: float = 0.0

    @property
    def roof_kwh_per_m2(self) -> float:
        return self.roof_kwh / self.roof_area_m2 if self.roof_area_m2 > 0 else 0.0

    @property
    def facade_kwh_per_m2(self) -> float:
        return self.facade_kwh / self.facade_area_m2 if self.facade_area_m2 > 0 else 0.0

    def as_row(self) -> dict:
        return {
            "building_id": self.building_id,
            "roof_kwh": self.roof_kwh,
            "facade_kwh": self.facade_kwh,
            "roof_area_m2": self.roof_area_m2,
            "facade_area_m2": self.facade_area_m2,
            "roof_kwh_per_m2": self.roof_kwh_per_m2,
            "facade_kwh_per_m2": self.facade_kwh_per_m2,
        }


@dataclass
class RegionReport:
    bounds: tuple[float, float, float, float] | None
    building_count: int
    roof_kwh: float
    facade_kwh: float
    roof_area_m2: float
    facade_area_m2: float
    facade_to_roof_ratio: float | None
    shade_fractions: list[dict] = field(default_factory=list)
    profiles: dict[str, dict[int, float]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    @property
    def roof_kwh_per_m2(self) -> float:
        return self.roof_kwh / self.roof_area_m2 if self.roof_area_m2 > 0 else 0.0

    @property
    def facade_kwh_per_m2(self) -> float:
        return self.facade_kwh / self.facade_area_m2 if self.facade_area_m2 > 0 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = list(self.bounds) if self.bounds is not None else None
        d["roof_kwh_per_m2"] = self.roof_kwh_per_m2
        d["facade_kwh_per_m2"] = self.facade_kwh_per_m2
        d["profiles"] = {k: {str(h): v for h, v in sorted(p.items())}
                         for k, p in self.profiles.items()}
        return d


def integrate_energy(samples: Sequence[PowerSample], interval_minutes: float,
                     area_m2: float = 1.0) -> float:
    """Left-Riemann energy in kWh of ``area_m2`` producing ``p_unit`` W/m2."""
    stamps = [s.timestamp for s in samples]
    for i in range(1, len(stamps)):
        if stamps[i] is not None and stamps[i - 1] is not None and stamps[i] <= stamps[i - 1]:
            raise ValidationError(f"power samples out of order at index {i}")
    return sum(s.p_unit for s in samples) * interval_minutes / 60.0 / 1000.0 * area_m2


def _surface_areas(results: Iterable[PatchResult]) -> dict[str, tuple[str, float]]:
    """Surface area per surface reference, from the patches of any one day."""
    per_day: dict[tuple[str, dt.date], float] = defaultdict(float)
    cls = {}
    for r in results:
        per_day[(r.surface_ref, r.date)] += r.area_m2
        cls[r.surface_ref] = r.surface_class
    areas: dict[str, float] = {}
    for (ref, _), a in per_day.items():
        areas[ref] = max(areas.get(ref, 0.0), a)
    return {ref: (cls[ref], a) for ref, a in areas.items()}


def building_rollup(building_id: str, results: Sequence[PatchResult],
                    roof_area_m2: float | None = None,
                    facade_area_m2: float | None = None) -> BuildingPotential:
    """Class-wise energy sums for one building.

    Areas default to the patch areas of a single day per surface; pass the
    scene geometry areas when available.
    """
    energy = {ROOF: 0.0, FACADE: 0.0}
    direct = {ROOF: 0.0, FACADE: 0.0}
    for r in sorted(results, key=lambda r: (r.date, r.surface_ref)):
        if r.building_id != building_id:
            raise ValidationError(f"patch of {r.building_id!r} passed to rollup of {building_id!r}")
        energy[r.surface_class] += r.pv_kwh
        direct[r.surface_class] += r.direct_kwh_m2 * r.area_m2
    if roof_area_m2 is None or facade_area_m2 is None:
        area = {ROOF: 0.0, FACADE: 0.0}
        for c, a in _surface_areas(results).values():
            area[c] += a
        roof_area_m2 = area[ROOF] if roof_area_m2 is None else roof_area_m2
        facade_area_m2 = area[FACADE] if facade_area_m2 is None else facade_area_m2
    return BuildingPotential(building_id, energy[ROOF], energy[FACADE],
                             float(roof_area_m2), float(facade_area_m2),
                             direct[ROOF], direct[FACADE])


def region_rollup(buildings: Sequence[BuildingPotential],
                  bounds: tuple[float, float, float, float] | None = None,
                  centroids: dict[str, tuple[float, float]] | None = None,
                  shade_fractions: list[dict] | None = None,
                  profiles: dict[str, dict[int, float]] | None = None) -> RegionReport:
    """Totals and facade/roof ratio over the buildings whose footprint
    centroid falls inside ``bounds`` (all buildings when ``bounds`` or
    ``centroids`` is omitted)."""
    members = sorted(buildings, key=lambda b: b.building_id)
    if bounds is not None and centroids is not None:
        x0, y0, x1, y1 = bounds
        members = [b for b in members
                   if x0 <= centroids[b.building_id][0] <= x1
                   and y0 <= centroids[b.building_id][1] <= y1]
    roof = sum(b.roof_kwh for b in members)
    facade = sum(b.facade_kwh for b in members)
    flags = [] if members else ["empty"]
    return RegionReport(
        bounds=tuple(bounds) if bounds is not None else None,
        building_count=len(members),
        roof_kwh=roof,
        facade_kwh=facade,
        roof_area_m2=sum(b.roof_area_m2 for b in members),
        facade_area_m2=sum(b.facade_area_m2 for b in members),
        facade_to_roof_ratio=facade / roof if roof > 0 else None,
        shade_fractions=list(shade_fractions or []),
        profiles=dict(profiles or {}),
        flags=flags,
    )
