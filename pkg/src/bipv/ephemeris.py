"""Solar position, daylight windows and simulation timelines.

Positions follow the low-precision ecliptic/equatorial chain popularised by
the SunCalc library (mean anomaly -> equation of centre -> ecliptic longitude
-> right ascension/declination -> local hour angle). Accuracy is a few tenths
of a degree between 1950 and 2150, which is plenty for footprint-level
shadow geometry. Atmospheric refraction is ignored.

Axis convention used throughout the package: x = east, y = north, z = up,
azimuth measured clockwise from north.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InputDomainError, NoCrossingError, WindowCollapsedError

RAD = math.pi / 180.0
DAY_SECONDS = 86400.0
J1970 = 2440588.0
J2000 = 2451545.0
OBLIQUITY = RAD * 23.4397

MIN_YEAR = 1950
MAX_YEAR = 2150

UTC = dt.timezone.utc


@dataclass(frozen=True)
class GeoLocation:
    latitude: float
    longitude: float

    def __post_init__(self):
        lat, lon = self.latitude, self.longitude
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise InputDomainError(f"non-finite location ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise InputDomainError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise InputDomainError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True)
class SunSample:
    """Sun direction at one instant.

    ``light_vector`` points from the sun toward the scene (x east, y north,
    z up), so its z component is negative while the sun is up.
    """

    timestamp: dt.datetime | None
    altitude_deg: float
    azimuth_deg: float
    light_vector: tuple[float, float, float]

    @classmethod
    def from_angles(cls, altitude_deg: float, azimuth_deg: float,
                    timestamp: dt.datetime | None = None) -> "SunSample":
        al = math.radians(altitude_deg)
        az = math.radians(azimuth_deg)
        lv = (-math.sin(az) * math.cos(al), -math.cos(az) * math.cos(al), -math.sin(al))
        return cls(timestamp, float(altitude_deg), float(azimuth_deg) % 360.0, lv)

    @property
    def toward_sun(self) -> tuple[float, float]:
        """Unit horizontal bearing toward the sun."""
        az = math.radians(self.azimuth_deg)
        return (math.sin(az), math.cos(az))

    @property
    def is_up(self) -> bool:
        return self.altitude_deg > 0.0


@dataclass(frozen=True)
class DayWindow:
    start: dt.datetime
    end: dt.datetime
    padding_minutes: int
    sunrise: dt.datetime | None = None
    sunset: dt.datetime | None = None

    @property
    def minutes(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0


def as_utc(t: dt.datetime) -> dt.datetime:
    """Return ``t`` as an aware UTC datetime; naive values are taken as UTC."""
    if t.tzinfo is None:
        return t.replace(tzinfo=UTC)
    return t.astimezone(UTC)


def _epoch_seconds(t: dt.datetime) -> float:
    return as_utc(t).timestamp()


def _check_year(t: dt.datetime):
    if not MIN_YEAR <= t.year <= MAX_YEAR:
        raise InputDomainError(
            f"{t.isoformat()} outside the ephemeris validity window {MIN_YEAR}-{MAX_YEAR}")


def solar_angles(epoch_seconds, latitude: float, longitude: float):
    """Vectorised solar altitude and azimuth in degrees.

    Args:
        epoch_seconds: POSIX seconds (scalar or array).
        latitude, longitude: observer position in degrees.

    Returns:
        ``(altitude_deg, azimuth_deg)`` arrays, azimuth clockwise from north
        in [0, 360).
    """
    d = np.asarray(epoch_seconds, dtype=float) / DAY_SECONDS - 0.5 + J1970 - J2000
    m = RAD * (357.5291 + 0.98560028 * d)
    c = RAD * (1.9148 * np.sin(m) + 0.02 * np.sin(2 * m) + 0.0003 * np.sin(3 * m))
    ecl = m + c + RAD * 102.9372 + math.pi
    dec = np.arcsin(np.sin(ecl) * math.sin(OBLIQUITY))
    ra = np.arctan2(np.sin(ecl) * math.cos(OBLIQUITY), np.cos(ecl))
    lw = -RAD * longitude
    phi = RAD * latitude
    h = RAD * (280.16 + 360.9856235 * d) - lw - ra
    alt = np.arcsin(np.sin(phi) * np.sin(dec) + np.cos(phi) * np.cos(dec) * np.cos(h))
    # measured from south, positive westward
    az_s = np.arctan2(np.sin(h), np.cos(h) * np.sin(phi) - np.tan(dec) * np.cos(phi))
    az = np.mod(np.degrees(az_s) + 180.0, 360.0)
    return np.degrees(alt), az


def sun_position(t: dt.datetime, loc: GeoLocation) -> SunSample:
    """Solar altitude/azimuth and light vector at instant ``t``."""
    t = as_utc(t)
    _check_year(t)
    alt, az = solar_angles(t.timestamp(), loc.latitude, loc.longitude)
    return SunSample.from_angles(float(alt), float(az), t)


def sun_positions(times: Sequence[dt.datetime], loc: GeoLocation) -> list[SunSample]:
    times = [as_utc(t) for t in times]
    for t in times:
        _check_year(t)
    alt, az = solar_angles([t.timestamp() for t in times], loc.latitude, loc.longitude)
    return [SunSample.from_angles(float(a), float(z), t) for t, a, z in zip(times, alt, az)]


def _altitude(sec: float, loc: GeoLocation) -> float:
    return float(solar_angles(sec, loc.latitude, loc.longitude)[0])


def sunrise_sunset(date: dt.date, loc: GeoLocation) -> tuple[dt.datetime, dt.datetime]:
    """Horizon crossings (geometric centre, no refraction) around local solar noon.

    Raises:
        NoCrossingError: polar day or night on ``date``.
    """
    noon_guess = dt.datetime(date.year, date.month, date.day, 12, tzinfo=UTC) \
        - dt.timedelta(hours=loc.longitude / 15.0)
    _check_year(noon_guess)
    base = noon_guess.timestamp()
    secs = base + np.arange(-720, 721, 10) * 60.0
    alt, _ = solar_angles(secs, loc.latitude, loc.longitude)
    k = int(np.argmax(alt))
    if alt[k] <= 0.0:
        raise NoCrossingError(f"sun stays below the horizon on {date} at "
                              f"({loc.latitude}, {loc.longitude})", sign=-1)
    before = np.nonzero(alt[:k] < 0.0)[0]
    after = np.nonzero(alt[k:] < 0.0)[0]
    if before.size == 0 or after.size == 0:
        raise NoCrossingError(f"sun stays above the horizon on {date} at "
                              f"({loc.latitude}, {loc.longitude})", sign=+1)
    i = before[-1]
    j = k + after[0]
    rise = brentq(_altitude, secs[i], secs[i + 1], args=(loc,), xtol=1.0)
    sett = brentq(_altitude, secs[j - 1], secs[j], args=(loc,), xtol=1.0)
    # whole seconds strictly inside the daylight interval
    rise, sett = math.ceil(rise), math.floor(sett)
    while _altitude(rise, loc) <= 0.0:
        rise += 1
    while _altitude(sett, loc) <= 0.0:
        sett -= 1
    return (dt.datetime.fromtimestamp(rise, UTC), dt.datetime.fromtimestamp(sett, UTC))


def day_window(date: dt.date, loc: GeoLocation, padding_minutes: int = 30) -> DayWindow:
    """Daylight window shrunk by ``padding_minutes`` at both ends.

    Raises:
        InputDomainError: negative padding.
        NoCrossingError: polar day/night.
        WindowCollapsedError: padding leaves no daylight.
    """
    if padding_minutes < 0:
        raise InputDomainError(f"padding_minutes must be >= 0, got {padding_minutes}")
    rise, sett = sunrise_sunset(date, loc)
    pad = dt.timedelta(minutes=padding_minutes)
    start, end = rise + pad, sett - pad
    if start >= end:
        raise WindowCollapsedError(
            f"padding of {padding_minutes} min collapses the {date} window "
            f"({rise.isoformat()} - {sett.isoformat()})")
    return DayWindow(start, end, int(padding_minutes), rise, sett)


def timeline(window: DayWindow, interval_minutes: int = 60) -> list[dt.datetime]:
    """Instants ``start, start + interval, ...`` not exceeding ``window.end``.

    A window shorter than one interval yields the single instant ``start``.
    """
    if interval_minutes < 1:
        raise InputDomainError(f"interval_minutes must be >= 1, got {interval_minutes}")
    step = dt.timedelta(minutes=interval_minutes)
    n = int((window.end - window.start) // step) + 1
    return [window.start + i * step for i in range(n)]
