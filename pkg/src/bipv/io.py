"""Footprint and weather ingestion; patch, building, report and shadow export.

Geometry is exchanged as GeoJSON in WGS84 lon/lat; tables as comma-separated
text with a header row. Every writer is byte-stable: keys are sorted,
coordinates carry six decimals and rows follow a fixed order.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.affinity import affine_transform
from shapely.geometry import MultiPolygon, Polygon, shape

from .aggregate import BuildingPotential, PatchResult, RegionReport
from .ephemeris import UTC, GeoLocation
from .errors import BIPVIOError, ValidationError
from .irradiance import WeatherRecord, WeatherSeries
from .scene import (EARTH_RADIUS, MAX_HEIGHT, MIN_AREA, Building, Facade, Scene,
                    local_to_lonlat, lonlat_to_local)
from .shadow import SceneShadows

LEVEL_HEIGHT = 3.0
COORD_DECIMALS = 6
VALUE_DECIMALS = 9

# header aliases (lower-cased) -> internal column
WEATHER_COLUMNS = {
    "timestamp": "timestamp", "time": "timestamp", "datetime": "timestamp",
    "dni": "dni", "dhi": "dhi", "ghi": "ghi",
    "temp_air": "temp_air", "temperature": "temp_air", "air temperature": "temp_air",
    "wind_speed": "wind_speed", "wind speed": "wind_speed",
}
REQUIRED_WEATHER = ("dni", "dhi", "ghi", "temp_air", "wind_speed")
SPLIT_TIME = ("year", "month", "day", "hour", "minute")

BUILDING_COLUMNS = ("building_id", "roof_kwh", "facade_kwh", "roof_area_m2",
                    "facade_area_m2", "roof_kwh_per_m2", "facade_kwh_per_m2")


class FormatError(ValidationError):
    """Input file is readable but does not follow the expected schema."""


@dataclass(frozen=True)
class FootprintFeature:
    id: str
    geometry: Polygon          # lon/lat
    height: float
    height_source: str = "height"


@dataclass
class IngestReport:
    source: str
    feature_count: int = 0
    accepted: list[str] = field(default_factory=list)
    rejected: list[dict] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)
    levels_fallback: list[str] = field(default_factory=list)
    accepted_features: int = 0

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)

    def reject(self, index: int, fid: str | None, reason: str):
        self.rejected.append({"index": index, "id": fid, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "feature_count": self.feature_count,
            "accepted_count": self.accepted_features,
            "building_count": len(self.accepted),
            "rejected_count": self.rejected_count,
            "rejected": self.rejected,
            "warnings": self.warnings,
            "levels_fallback": self.levels_fallback,
            "levels_height_m": LEVEL_HEIGHT,
        }


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8-sig") as fh:
            return fh.read()
    except OSError as exc:
        raise BIPVIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _open_for_write(path):
    try:
        d = os.path.dirname(os.fspath(path))
        if d:
            os.makedirs(d, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise BIPVIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_json(obj, path):
    """Pretty, key-sorted JSON with a trailing newline."""
    with _open_for_write(path) as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False))
        fh.write("\n")


# --------------------------------------------------------------------- buildings

def _number(value) -> float | None:
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        pass
    m = re.fullmatch(r"\s*([-+]?\d+(?:\.\d*)?|[-+]?\.\d+)\s*(m)?\s*", str(value))
    return float(m.group(1)) if m else None


def _local_area(poly: Polygon) -> float:
    """Area in m2 under a tangent projection about the polygon's own centre."""
    c = poly.centroid
    k = math.cos(math.radians(c.y))
    sx = EARTH_RADIUS * k * math.pi / 180.0
    sy = EARTH_RADIUS * math.pi / 180.0
    return poly.area * sx * sy


def _vertex_key(poly: Polygon):
    def ring(r):
        return frozenset((round(x, 9), round(y, 9)) for x, y in list(r.coords)[:-1])
    return (ring(poly.exterior), frozenset(ring(h) for h in poly.interiors))


def _feature_height(props: dict) -> tuple[float | None, str | None, str | None]:
    """(height, source, reason-if-unusable)."""
    h = _number(props.get("height"))
    if props.get("height") is not None and h is None:
        return None, None, f"unparseable height {props.get('height')!r}"
    if h is not None:
        if not (0.0 < h <= MAX_HEIGHT) or not math.isfinite(h):
            return None, None, f"height {h} outside (0, {MAX_HEIGHT:g}]"
        return h, "height", None
    raw = props.get("levels", props.get("building:levels"))
    lv = _number(raw)
    if lv is not None:
        if lv <= 0:
            return None, None, f"levels {lv} not positive"
        return lv * LEVEL_HEIGHT, "levels", None
    return None, None, "missing height"


def load_buildings(path) -> tuple[list[FootprintFeature], IngestReport]:
    """Read a GeoJSON FeatureCollection of lon/lat building footprints.

    Features with a usable height are kept. ``levels`` stands in for a
    missing height at 3 m per level. Invalid, tiny, height-less and
    duplicated footprints are rejected and listed in the report. A
    MultiPolygon contributes one footprint per part (ids ``<id>.<k>``).

    Raises:
        BIPVIOError: the file cannot be read.
        FormatError: not JSON or not a FeatureCollection (with position).
    """
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection" \
            or not isinstance(doc.get("features"), list):
        raise FormatError(f"{path}: top level must be a FeatureCollection with a 'features' list")
    report = IngestReport(str(path), len(doc["features"]))
    out: list[FootprintFeature] = []
    seen_geom: dict = {}
    seen_id: set[str] = set()
    for i, feat in enumerate(doc["features"]):
        where = f"{path}: features[{i}]"
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise FormatError(f"{where} is not a Feature")
        props = feat.get("properties") or {}
        if not isinstance(props, dict):
            raise FormatError(f"{where}.properties is not an object")
        fid = props.get("id", feat.get("id"))
        fid = str(fid) if fid is not None else f"f{i}"
        geom = feat.get("geometry")
        try:
            g = shape(geom) if geom is not None else None
        except Exception as exc:
            raise FormatError(f"{where}.geometry is malformed: {exc}") from exc
        if g is None or g.is_empty:
            report.reject(i, fid, "missing geometry")
            continue
        if isinstance(g, Polygon):
            parts = [(fid, g)]
        elif isinstance(g, MultiPolygon):
            parts = [(f"{fid}.{k}", p) for k, p in enumerate(g.geoms)]
        else:
            report.reject(i, fid, f"unsupported geometry {g.geom_type}")
            continue
        h, source, why = _feature_height(props)
        if why is not None:
            report.reject(i, fid, why)
            continue
        reasons = []
        keep = []
        for pid, p in parts:
            if not p.is_valid:
                r = shapely.is_valid_reason(p)
                reasons.append("self-intersection" if "elf-intersection" in r
                               else f"invalid geometry ({r})")
            elif _local_area(p) <= MIN_AREA:
                reasons.append(f"area below {MIN_AREA} m2")
            elif pid in seen_id:
                reasons.append(f"duplicate id {pid!r}")
            elif _vertex_key(p) in seen_geom:
                reasons.append(f"duplicate geometry of {seen_geom[_vertex_key(p)]!r}")
            else:
                keep.append((pid, p))
                seen_id.add(pid)
                seen_geom[_vertex_key(p)] = pid
        if not keep:
            report.reject(i, fid, "; ".join(dict.fromkeys(reasons)))
            continue
        if reasons:
            report.warnings.append({"index": i, "id": fid, "reason": "parts dropped: "
                                    + "; ".join(dict.fromkeys(reasons))})
        report.accepted_features += 1
        for pid, p in keep:
            out.append(FootprintFeature(pid, p, h, source))
            report.accepted.append(pid)
            if source == "levels":
                report.levels_fallback.append(pid)
    return out, report


def features_origin(features: Sequence[FootprintFeature]) -> GeoLocation:
    """Centre of the joint lon/lat bounding box."""
    if not features:
        raise ValidationError("no usable building features")
    b = np.array([f.geometry.bounds for f in features])
    return GeoLocation(float((b[:, 1].min() + b[:, 3].max()) / 2),
                       float((b[:, 0].min() + b[:, 2].max()) / 2))


def to_buildings(features: Sequence[FootprintFeature], origin: GeoLocation) -> list[Building]:
    out = []
    for f in features:
        def ring(coords):
            c = np.asarray(coords)[:, :2]
            x, y = lonlat_to_local(c[:, 0], c[:, 1], origin)
            return np.column_stack([x, y])
        poly = Polygon(ring(f.geometry.exterior.coords),
                       [ring(h.coords) for h in f.geometry.interiors])
        out.append(Building(f.id, poly, f.height))
    return out


def _round_coords(coords) -> list[list[float]]:
    return [[round(float(x), COORD_DECIMALS), round(float(y), COORD_DECIMALS)]
            for x, y in coords]


def _lonlat_polygon(poly: Polygon, origin: GeoLocation) -> dict:
    rings = []
    for r in [poly.exterior, *poly.interiors]:
        c = np.asarray(r.coords)[:, :2]
        lon, lat = local_to_lonlat(c[:, 0], c[:, 1], origin)
        rings.append(_round_coords(zip(lon, lat)))
    return {"type": "Polygon", "coordinates": rings}


def _geometry(geom, origin: GeoLocation) -> dict:
    parts = [p for p in shapely.get_parts(geom) if isinstance(p, Polygon) and not p.is_empty]
    polys = [_lonlat_polygon(p, origin)["coordinates"] for p in parts]
    if len(polys) == 1:
        return {"type": "Polygon", "coordinates": polys[0]}
    return {"type": "MultiPolygon", "coordinates": polys}


def _collection(features: list[dict]) -> dict:
    return {"type": "FeatureCollection", "features": features}


def export_buildings(buildings: Sequence[Building], origin: GeoLocation, path):
    """Write local-frame buildings back to a lon/lat FeatureCollection."""
    feats = []
    for b in sorted(buildings, key=lambda b: b.id):
        feats.append({"type": "Feature", "properties": {"id": b.id, "height": b.height},
                      "geometry": _lonlat_polygon(b.footprint, origin)})
    write_json(_collection(feats), path)


# ----------------------------------------------------------------------- weather

def _parse_time(text: str, where: str) -> dt.datetime:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        t = dt.datetime.fromisoformat(s)
    except ValueError as exc:
        raise FormatError(f"{where}: unparseable timestamp {text!r}") from exc
    if t.tzinfo is None:
        raise FormatError(f"{where}: timestamp {text!r} has no zone offset")
    return t.astimezone(UTC)


def _nsrdb_zone(meta_header: list[str], meta_values: list[str]) -> dt.timezone:
    keys = [h.strip().lower() for h in meta_header]
    if "time zone" in keys:
        k = keys.index("time zone")
        if k < len(meta_values):
            hours = _number(meta_values[k])
            if hours is not None:
                return dt.timezone(dt.timedelta(hours=hours))
    return UTC


def _find_header(rows: list[list[str]]) -> int:
    for i, row in enumerate(rows[:4]):
        names = {c.strip().lower() for c in row}
        if "dni" in names:
            return i
    return 0


def load_weather(path) -> WeatherSeries:
    """Read a comma-separated weather file.

    Columns are matched case-insensitively: ``timestamp`` (ISO-8601 with a
    zone offset) or NSRDB-style ``Year, Month, Day, Hour, Minute`` fields,
    ``dni``, ``dhi``, ``ghi``, ``temp_air`` (or ``Temperature``) and
    ``wind_speed`` (or ``Wind Speed``). NSRDB metadata lines above the
    header are skipped; their ``Time Zone`` applies to split time fields.

    The record spacing is the smallest step; every step must be a whole
    multiple of it within 1 s (missing records surface later as alignment
    gaps).

    Raises:
        BIPVIOError: unreadable file.
        FormatError: missing column, bad value, non-increasing or irregular
            timestamps; the message names the line and column.
    """
    text = _read_text(path)
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise FormatError(f"{path}: empty file")
    h = _find_header(rows)
    zone = _nsrdb_zone(rows[0], rows[1]) if h >= 2 else UTC
    header = [c.strip() for c in rows[h]]
    lower = [c.lower() for c in header]
    col: dict[str, int] = {}
    for j, name in enumerate(lower):
        key = WEATHER_COLUMNS.get(name)
        if key is not None and key not in col:
            col[key] = j
    split = all(k in lower for k in SPLIT_TIME)
    missing = [k for k in REQUIRED_WEATHER if k not in col]
    if "timestamp" not in col and not split:
        missing.insert(0, "timestamp")
    if missing:
        raise FormatError(f"{path} line {h + 1}: missing column(s) {', '.join(missing)}")
    records = []
    prev = None
    for i, row in enumerate(rows[h + 1:], start=h + 2):
        if not row or all(not c.strip() for c in row):
            continue
        where = f"{path} line {i}"
        if len(row) < len(header):
            raise FormatError(f"{where}: expected {len(header)} fields, found {len(row)}")
        if "timestamp" in col:
            t = _parse_time(row[col["timestamp"]], f"{where}, column {header[col['timestamp']]!r}")
        else:
            try:
                y, mo, d, hh, mi = (int(float(row[lower.index(k)])) for k in SPLIT_TIME)
                t = dt.datetime(y, mo, d, hh, mi, tzinfo=zone).astimezone(UTC)
            except ValueError as exc:
                raise FormatError(f"{where}: bad date/time fields ({exc})") from exc
        vals = {}
        for k in REQUIRED_WEATHER:
            raw = row[col[k]]
            v = _number(raw)
            if v is None or not math.isfinite(v):
                raise FormatError(f"{where}, column {header[col[k]]!r}: not a number: {raw!r}")
            if k in ("dni", "dhi", "ghi", "wind_speed") and v < 0:
                raise FormatError(f"{where}, column {header[col[k]]!r}: negative value {v:g}")
            vals[k] = v
        if prev is not None and t <= prev:
            raise FormatError(f"{where}: timestamp {t.isoformat()} not after "
                              f"{prev.isoformat()} (rows out of order)")
        prev = t
        try:
            records.append(WeatherRecord(t, **vals))
        except ValidationError as exc:
            raise FormatError(f"{where}: {exc}") from exc
    if not records:
        raise FormatError(f"{path}: no data rows")
    secs = np.array([r.timestamp.timestamp() for r in records])
    steps = np.diff(secs)
    spacing = float(steps.min()) if len(steps) else 3600.0
    if len(steps):
        ratio = steps / spacing
        bad = np.abs(ratio - np.round(ratio)) * spacing > 1.0
        if np.any(bad):
            k = int(np.argmax(bad)) + 1
            raise FormatError(f"{path}: record {k} ({records[k].timestamp.isoformat()}) breaks "
                              f"the {spacing / 60:g}-minute spacing")
    return WeatherSeries(records, spacing)


def write_weather(series: WeatherSeries | Iterable[WeatherRecord], path):
    """Write records in the canonical column layout (ISO timestamps, UTC)."""
    records = series.records if isinstance(series, WeatherSeries) else list(series)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *REQUIRED_WEATHER])
        for r in records:
            w.writerow([r.timestamp.astimezone(UTC).isoformat(), *(repr(float(getattr(r, k)))
                                                                   for k in REQUIRED_WEATHER)])


# ------------------------------------------------------------------------ export

def unfold_facade(geom, facade: Facade):
    """Lay a facade-space ``(s, z)`` geometry flat on the ground, hinged on
    the base edge and folded outward, so that it can be drawn in 2-D GIS."""
    ex, ey = facade.direction
    nx, ny = facade.outward_normal
    ax, ay = facade.a
    return affine_transform(geom, [ex, nx, ey, ny, ax, ay])


def _r(v: float) -> float:
    return round(float(v), VALUE_DECIMALS)


def _patch_rows(results: Sequence[PatchResult], scene: Scene):
    facades = {f.ref: f for f in scene.facades}
    rows = []
    for r in results:
        geom = r.patch.polygon
        props = {
            "date": r.date.isoformat(),
            "surface_ref": r.surface_ref,
            "building_id": r.building_id,
            "surface_class": r.surface_class,
            "area_m2": _r(r.area_m2),
            "sunlit_minutes": int(r.sunlit_minutes),
            "shaded_minutes": int(r.shaded_minutes),
            "poa_kwh_m2": _r(r.poa_kwh_m2),
            "direct_kwh_m2": _r(r.direct_kwh_m2),
            "pv_kwh_m2": _r(r.pv_kwh_m2),
            "shade_mask": r.patch.mask_string,
        }
        if r.surface_ref in facades:
            _, z0, _, z1 = geom.bounds
            props["z_min"] = _r(z0)
            props["z_max"] = _r(z1)
            geom = unfold_facade(geom, facades[r.surface_ref])
        rows.append((props, geom))
    rows.sort(key=lambda pg: (pg[0]["date"], pg[0]["surface_ref"], pg[0]["shade_mask"],
                              pg[1].representative_point().coords[0]))
    return rows


def export_patches(results: Sequence[PatchResult], scene: Scene, path, fmt: str = "geojson"):
    """Write one record per (day, patch).

    Roof patches keep their footprint position; facade patches are unfolded
    onto the ground outside their wall with ``z_min``/``z_max`` properties.
    ``csv`` output carries the geometry as lon/lat WKT.
    """
    rows = _patch_rows(results, scene)
    if fmt == "geojson":
        feats = [{"type": "Feature", "properties": p, "geometry": _geometry(g, scene.origin)}
                 for p, g in rows]
        write_json(_collection(feats), path)
    elif fmt == "csv":
        cols = ["date", "surface_ref", "building_id", "surface_class", "area_m2",
                "sunlit_minutes", "shaded_minutes", "poa_kwh_m2", "direct_kwh_m2",
                "pv_kwh_m2", "shade_mask", "z_min", "z_max", "wkt"]
        with _open_for_write(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for p, g in rows:
                wkt = shapely.to_wkt(shape(_geometry(g, scene.origin)),
                                     rounding_precision=COORD_DECIMALS, trim=True)
                w.writerow([p.get(c, "") for c in cols[:-1]] + [wkt])
    else:
        raise ValidationError(f"unknown export format {fmt!r} (geojson or csv)")


def export_building_csv(buildings: Sequence[BuildingPotential], path):
    """Per-building totals; floats written with full round-trip precision."""
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BUILDING_COLUMNS)
        for b in sorted(buildings, key=lambda b: b.building_id):
            row = b.as_row()
            w.writerow([row["building_id"], *(repr(float(row[c])) for c in BUILDING_COLUMNS[1:])])


def read_building_csv(path) -> list[BuildingPotential]:
    """Inverse of :func:`export_building_csv`.

    Raises:
        FormatError: header differs from the building table schema.
    """
    rows = list(csv.reader(_read_text(path).splitlines()))
    if not rows or tuple(c.strip() for c in rows[0]) != BUILDING_COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(BUILDING_COLUMNS)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(BUILDING_COLUMNS):
            raise FormatError(f"{path} line {i}: expected {len(BUILDING_COLUMNS)} fields")
        try:
            vals = [float(v) for v in row[1:5]]
        except ValueError as exc:
            raise FormatError(f"{path} line {i}: {exc}") from exc
        out.append(BuildingPotential(row[0], *vals))
    return out


def export_region_report(report: RegionReport, path, extra: dict | None = None):
    d = report.to_dict()
    if extra:
        d.update(extra)
    write_json(d, path)


def export_shadows(shadows: SceneShadows, scene: Scene, path):
    """Per-surface shadow polygons of one instant as a FeatureCollection.

    Ground and roof shadows are in plan; facade shadows are unfolded like
    facade patches. Walls turned away from the sun appear whole with the
    ``orientation`` flag.
    """
    facades = {f.ref: f for f in scene.facades}
    ts = shadows.sun.timestamp.isoformat() if shadows.sun.timestamp else None
    feats = []

    def add(ref, kind, caster, geom, flags, facade=None):
        if geom is None or geom.is_empty:
            if not flags:
                return
            geom = None
        props = {"surface_ref": ref, "kind": kind, "caster_id": caster,
                 "flags": sorted(flags), "timestamp": ts}
        if facade is not None and geom is not None:
            _, z0, _, z1 = geom.bounds
            props["z_min"], props["z_max"] = _r(z0), _r(z1)
            geom = unfold_facade(geom, facade)
        feats.append({"type": "Feature", "properties": props,
                      "geometry": _geometry(geom, scene.origin) if geom is not None else None})

    for sp in sorted(shadows.ground, key=lambda s: s.caster_id or ""):
        add("ground", "ground", sp.caster_id, sp.polygon, set(sp.flags))
    for ref in sorted(shadows.surfaces):
        s = shadows.surfaces[ref]
        f = facades.get(ref)
        if s.whole or s.flags:
            add(ref, s.kind, None, s.union if s.whole else None, set(s.flags), f)
            if s.whole:
                continue
        for sp in s.parts:
            add(ref, s.kind, sp.caster_id, sp.polygon, set(sp.flags), f)
    write_json(_collection(feats), path)
