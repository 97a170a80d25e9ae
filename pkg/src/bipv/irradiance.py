"""Plane-of-array irradiance with an isotropic sky and ground reflection.

Shading removes only the beam component; sky-diffuse and ground-reflected
terms use the unobstructed view factors ``(1 +/- cos tilt) / 2``.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ephemeris import SunSample, as_utc
from .errors import ValidationError, WeatherGapError

DEFAULT_ALBEDO = 0.2
GHI_SLACK = 50.0


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: dt.datetime
    dni: float
    dhi: float
    ghi: float
    temp_air: float
    wind_speed: float

    def __post_init__(self):
        vals = (self.dni, self.dhi, self.ghi, self.temp_air, self.wind_speed)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite weather value at {self.timestamp}")
        for name in ("dni", "dhi", "ghi", "wind_speed"):
            if getattr(self, name) < 0:
                raise ValidationError(f"negative {name} at {self.timestamp}")
        if self.ghi > self.dni + self.dhi + GHI_SLACK:
            raise ValidationError(f"ghi {self.ghi} exceeds dni + dhi + {GHI_SLACK} "
                                  f"at {self.timestamp}")


@dataclass(frozen=True)
class SurfaceOrientation:
    tilt_deg: float
    azimuth_deg: float
    albedo: float = DEFAULT_ALBEDO

    def __post_init__(self):
        if not 0.0 <= self.tilt_deg <= 90.0:
            raise ValidationError(f"tilt {self.tilt_deg} outside [0, 90]")
        if not 0.0 <= self.albedo <= 1.0:
            raise ValidationError(f"albedo {self.albedo} outside [0, 1]")
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg) % 360.0)


@dataclass(frozen=True)
class PoaBreakdown:
    g_dir: float
    g_dif: float
    g_ref: float

    @property
    def total(self) -> float:
        return self.g_dir + self.g_dif + self.g_ref


class WeatherSeries:
    """Immutable, time-ordered weather records with nearest-record lookup.

    A lookup succeeds when a record lies within half the record spacing of
    the requested instant.
    """

    def __init__(self, records: Sequence[WeatherRecord], spacing_s: float | None = None):
        records = list(records)
        if not records:
            raise ValidationError("empty weather series")
        t = np.array([as_utc(r.timestamp).timestamp() for r in records])
        if np.any(np.diff(t) <= 0):
            i = int(np.argmax(np.diff(t) <= 0)) + 1
            raise ValidationError(f"weather timestamps not increasing at record {i}")
        if spacing_s is None:
            spacing_s = float(np.min(np.diff(t))) if len(t) > 1 else 3600.0
        self.records = records
        self.spacing_s = float(spacing_s)
        self._t = t
        self._cols = {k: np.array([getattr(r, k) for r in records], dtype=float)
                      for k in ("dni", "dhi", "ghi", "temp_air", "wind_speed")}

    def __len__(self):
        return len(self.records)

    @property
    def spacing_minutes(self) -> float:
        return self.spacing_s / 60.0

    def _nearest(self, secs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        j = np.clip(np.searchsorted(self._t, secs), 1, len(self._t) - 1) if len(self._t) > 1 \
            else np.zeros(len(secs), dtype=int)
        if len(self._t) > 1:
            left = j - 1
            pick_left = np.abs(secs - self._t[left]) <= np.abs(self._t[j] - secs)
            j = np.where(pick_left, left, j)
        ok = np.abs(self._t[j] - secs) <= self.spacing_s / 2.0 + 1e-6
        return j, ok

    def align(self, instants: Sequence[dt.datetime]) -> dict[str, np.ndarray]:
        """Weather columns at ``instants`` (nearest record).

        Raises:
            WeatherGapError: some instants have no record within half a spacing.
        """
        instants = [as_utc(t) for t in instants]
        secs = np.array([t.timestamp() for t in instants])
        j, ok = self._nearest(secs)
        if not np.all(ok):
            spans = []
            run = None
            for t, good in zip(instants, ok):
                if not good:
                    run = [t, t] if run is None else [run[0], t]
                elif run is not None:
                    spans.append(tuple(run))
                    run = None
            if run is not None:
                spans.append(tuple(run))
            text = ", ".join(f"{a.isoformat()}..{b.isoformat()}" for a, b in spans)
            raise WeatherGapError(f"no weather record for instants {text}", spans)
        return {k: v[j] for k, v in self._cols.items()}

    def at(self, t: dt.datetime) -> WeatherRecord:
        j, ok = self._nearest(np.array([as_utc(t).timestamp()]))
        if not ok[0]:
            raise WeatherGapError(f"no weather record near {t.isoformat()}", [(t, t)])
        return self.records[int(j[0])]


def cos_aoi(altitude_deg, azimuth_deg, tilt_deg, surface_azimuth_deg):
    """Vectorised cosine of the angle of incidence, clipped to [-1, 1]."""
    al = np.radians(altitude_deg)
    tilt = np.radians(tilt_deg)
    c = (np.cos(tilt) * np.sin(al)
         + np.sin(tilt) * np.cos(al) * np.cos(np.radians(np.asarray(azimuth_deg)
                                                         - surface_azimuth_deg)))
    return np.clip(c, -1.0, 1.0)


def angle_of_incidence(sun: SunSample, orient: SurfaceOrientation) -> float:
    """Angle between the sun ray and the panel normal, degrees in [0, 180]."""
    c = cos_aoi(sun.altitude_deg, sun.azimuth_deg, orient.tilt_deg, orient.azimuth_deg)
    return float(np.degrees(np.arccos(c)))


def poa_components(dni, dhi, ghi, altitude_deg, azimuth_deg, orient: SurfaceOrientation):
    """Unshaded beam, sky-diffuse and ground-reflected irradiance (arrays)."""
    c = cos_aoi(altitude_deg, azimuth_deg, orient.tilt_deg, orient.azimuth_deg)
    up = np.asarray(altitude_deg) > 0.0
    g_dir = np.where(up, np.asarray(dni, dtype=float) * np.maximum(c, 0.0), 0.0)
    ct = math.cos(math.radians(orient.tilt_deg))
    g_dif = np.asarray(dhi, dtype=float) * (1.0 + ct) / 2.0
    g_ref = np.asarray(ghi, dtype=float) * orient.albedo * (1.0 - ct) / 2.0
    return g_dir, g_dif, g_ref


def poa(record: WeatherRecord, orient: SurfaceOrientation, sun: SunSample,
        shaded: bool = False) -> PoaBreakdown:
    """Plane-of-array irradiance for one record; ``shaded`` zeroes the beam term."""
    for name in ("dni", "dhi", "ghi"):
        if getattr(record, name) < 0:
            raise ValidationError(f"negative {name} at {record.timestamp}")
    g_dir, g_dif, g_ref = poa_components(record.dni, record.dhi, record.ghi,
                                         sun.altitude_deg, sun.azimuth_deg, orient)
    return PoaBreakdown(0.0 if shaded else float(g_dir), float(g_dif), float(g_ref))


def surface_mean_irradiance(patches) -> float:
    """Area-weighted mean irradiance of ``(area, irradiance)`` pairs."""
    a = np.array([p[0] for p in patches], dtype=float)
    i = np.array([p[1] for p in patches], dtype=float)
    total = a.sum()
    if not total > 0:
        raise ValidationError("surface_mean_irradiance needs positive total area")
    return float((a * i).sum() / total)
