"""Command-line entry point: ``bipv shadow | simulate | report``.

Settings come from built-in defaults, then an optional ``--config`` file
(``key = value`` lines, or a previous run's ``manifest.json``), then flags.
Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from . import __version__
from . import io as bio
from .ephemeris import GeoLocation, as_utc, sun_position, sunrise_sunset
from .errors import BIPVError, BIPVIOError, InvariantError, NoCrossingError, \
    SunBelowHorizonError, ValidationError
from .pipeline import RunSettings, check_invariants, simulate
from .pvmodel import PVConfig
from .scene import build_scene
from .shadow import scene_shadows

log = logging.getLogger("bipv")

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
FORMATS = ("geojson", "csv")


@dataclass
class RunConfig:
    buildings: str | None = None
    weather: str | None = None
    lat: float | None = None
    lon: float | None = None
    start: str | None = None
    end: str | None = None
    interval_min: int = 60
    padding_min: int = 30
    min_altitude: float = 5.0
    albedo: float = 0.2
    pv: dict = field(default_factory=dict)
    format: str = "geojson"
    lossy: bool = False
    out: str | None = None
    threads: int = 0

    def validate(self, need_weather: bool = True):
        if not self.buildings:
            raise ValidationError("no --buildings file given")
        if need_weather:
            if not self.weather:
                raise ValidationError("no --weather file given")
            if not self.start:
                raise ValidationError("no --start date given")
            self.dates()
        if (self.lat is None) != (self.lon is None):
            raise ValidationError("--lat and --lon must be given together")
        if self.interval_min < 1:
            raise ValidationError(f"interval-min must be >= 1, got {self.interval_min}")
        if self.padding_min < 0:
            raise ValidationError(f"padding-min must be >= 0, got {self.padding_min}")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {', '.join(FORMATS)}")
        if self.threads < 0:
            raise ValidationError(f"threads must be >= 0, got {self.threads}")

    def dates(self) -> list[dt.date]:
        try:
            first = dt.date.fromisoformat(self.start)
            last = dt.date.fromisoformat(self.end or self.start)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad date in --start/--end: {exc}") from None
        if last < first:
            raise ValidationError(f"empty date range {first} .. {last}")
        return [first + dt.timedelta(days=k) for k in range((last - first).days + 1)]

    def pv_config(self) -> PVConfig:
        return PVConfig().with_overrides(**self.pv)

    def settings(self) -> RunSettings:
        return RunSettings(interval_minutes=self.interval_min, padding_minutes=self.padding_min,
                           min_altitude_deg=self.min_altitude, albedo=self.albedo,
                           pv=self.pv_config(), workers=self.threads, lossy=self.lossy)

    def echo(self) -> dict:
        """Settings that determine the outputs (thread count and output
        location excluded)."""
        d = asdict(self)
        for k in ("threads", "out"):
            d.pop(k)
        d["pv"] = asdict(self.pv_config())
        return d


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"interval_minutes": "interval_min", "padding_minutes": "padding_min",
            "min_altitude_deg": "min_altitude", "latitude": "lat", "longitude": "lon"}


def _coerce(key: str, value):
    t = str(_TYPES[key])
    if value is None:
        return None
    if "bool" in t:
        return value if isinstance(value, bool) else str(value).strip().lower() in ("1", "true", "yes")
    try:
        if t.startswith("int"):
            return int(value)
        if t.startswith("float"):
            return float(value)
    except ValueError:
        raise ValidationError(f"config {key}: bad value {value!r}") from None
    return str(value)


def _apply(cfg: RunConfig, key: str, value, origin: str):
    key = key.strip().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key.startswith("pv."):
        cfg.pv[key[3:]] = value
        return
    if key == "pv" and isinstance(value, dict):
        cfg.pv.update(value)
        return
    if key not in _TYPES:
        raise ValidationError(f"{origin}: unknown setting {key!r}")
    setattr(cfg, key, _coerce(key, value))


def read_config(path) -> dict:
    """Settings from a ``key = value`` file or a run manifest."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise BIPVIOError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON at line {exc.lineno}") from None
        return dict(doc.get("config", doc))
    out = {}
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path} line {i}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _resolve(args, command: str) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            _apply(cfg, k, v, str(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if f.name != "pv" and v is not None:
            setattr(cfg, f.name, v)
    for item in getattr(args, "pv", None) or []:
        if "=" not in item:
            raise ValidationError(f"--pv expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg.pv[k.strip()] = v.strip()
    if not cfg.out:
        raise ValidationError("no --out path given")
    cfg.validate(need_weather=(command == "simulate"))
    return cfg


def _load_scene(cfg: RunConfig):
    features, report = bio.load_buildings(cfg.buildings)
    if not features:
        raise ValidationError(f"{cfg.buildings}: no usable building features "
                              f"({report.rejected_count} rejected)")
    if cfg.lat is not None:
        origin = GeoLocation(cfg.lat, cfg.lon)
    else:
        origin = bio.features_origin(features)
    return build_scene(bio.to_buildings(features, origin), origin), report


def sha256(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 16), b""):
                h.update(block)
    except OSError as exc:
        raise BIPVIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return h.hexdigest()


def cmd_shadow(cfg: RunConfig, instant: str) -> str:
    """Shadow polygons of every surface (and the ground) at one instant."""
    scene, _ = _load_scene(cfg)
    try:
        t = dt.datetime.fromisoformat(instant.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"bad --instant {instant!r}") from None
    t = as_utc(t)
    sun = sun_position(t, scene.origin)
    if sun.altitude_deg <= 0:
        try:
            rise, sett = sunrise_sunset(t.date(), scene.origin)
            when = f"sunrise {rise.isoformat()}, sunset {sett.isoformat()}"
        except NoCrossingError as exc:
            when = str(exc)
        raise SunBelowHorizonError(f"sun-below-horizon at {t.isoformat()} "
                                   f"(altitude {sun.altitude_deg:.2f} deg; {when})")
    shadows = scene_shadows(scene, sun, include_ground=True, min_altitude=cfg.min_altitude)
    bio.export_shadows(shadows, scene, cfg.out)
    return cfg.out


def cmd_simulate(cfg: RunConfig) -> dict[str, str]:
    """Full run; writes patches, building table, region report, ingest report
    and a manifest into the ``out`` directory."""
    scene, ingest = _load_scene(cfg)
    weather = bio.load_weather(cfg.weather)
    sim = simulate(scene, weather, cfg.dates(), cfg.settings())
    check_invariants(scene, sim)
    out = cfg.out
    ext = "geojson" if cfg.format == "geojson" else "csv"
    files = {
        "patches": os.path.join(out, f"patches.{ext}"),
        "buildings": os.path.join(out, "buildings.csv"),
        "region": os.path.join(out, "region.json"),
        "ingest": os.path.join(out, "ingest.json"),
    }
    bio.export_patches(sim.patch_results, scene, files["patches"], cfg.format)
    bio.export_building_csv(sim.buildings, files["buildings"])
    bio.export_region_report(sim.region, files["region"], {
        "origin": [scene.origin.latitude, scene.origin.longitude],
        "dates": [d.isoformat() for d in cfg.dates()],
        "days_simulated": [d.date.isoformat() for d in sim.days],
        "diagnostics": sim.diagnostics,
    })
    bio.write_json(ingest.to_dict(), files["ingest"])
    manifest = {
        "version": __version__,
        "config": cfg.echo(),
        "inputs": {k: {"path": p, "sha256": sha256(p)}
                   for k, p in (("buildings", cfg.buildings), ("weather", cfg.weather))},
        "outputs": {k: {"file": os.path.basename(p), "sha256": sha256(p)}
                    for k, p in sorted(files.items())},
    }
    files["manifest"] = os.path.join(out, "manifest.json")
    bio.write_json(manifest, files["manifest"])
    return files


def _parse_report_input(item: str) -> tuple[str, str]:
    if "=" in item:
        label, path = item.split("=", 1)
        return label, path
    stem = os.path.splitext(os.path.basename(item))[0]
    parent = os.path.basename(os.path.dirname(os.path.abspath(item)))
    return (parent if stem == "buildings" and parent else stem), item


def cmd_report(inputs: list[str], out: str | None = None) -> tuple[list[dict], dict]:
    """Facade/roof comparison across building tables.

    Inputs are ``LABEL=PATH`` (or bare paths, labelled by file or folder
    name). A label ``group/name`` is summarised per group as well.
    """
    if not inputs:
        raise ValidationError("report needs at least one building CSV")
    rows = []
    for item in inputs:
        label, path = _parse_report_input(item)
        bs = bio.read_building_csv(path)
        roof = sum(b.roof_kwh for b in bs)
        facade = sum(b.facade_kwh for b in bs)
        roof_a = sum(b.roof_area_m2 for b in bs)
        facade_a = sum(b.facade_area_m2 for b in bs)
        rows.append({
            "label": label,
            "group": label.split("/", 1)[0] if "/" in label else "",
            "buildings": len(bs),
            "roof_kwh": roof,
            "facade_kwh": facade,
            "roof_kwh_per_m2": roof / roof_a if roof_a > 0 else 0.0,
            "facade_kwh_per_m2": facade / facade_a if facade_a > 0 else 0.0,
            "facade_to_roof_ratio": facade / roof if roof > 0 else None,
        })
    ratios = [r["facade_to_roof_ratio"] for r in rows if r["facade_to_roof_ratio"] is not None]
    summary = {
        "regions": len(rows),
        "mean_ratio": sum(ratios) / len(ratios) if ratios else None,
        "regions_facade_above_roof": sum(1 for x in ratios if x > 1.0),
        "groups": {},
    }
    for g in sorted({r["group"] for r in rows if r["group"]}):
        rs = [r["facade_to_roof_ratio"] for r in rows
              if r["group"] == g and r["facade_to_roof_ratio"] is not None]
        summary["groups"][g] = {"regions": len(rs), "mean_ratio": sum(rs) / len(rs) if rs else None}
    if out:
        cols = list(rows[0])
        with bio._open_for_write(out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow(["" if r[c] is None else r[c] for c in cols])
    return rows, summary


def format_report(rows: list[dict], summary: dict) -> str:
    w = max(5, *(len(r["label"]) for r in rows))
    lines = [f"{'label':<{w}}  {'bldgs':>6}  {'roof kWh':>12}  {'facade kWh':>12}  {'ratio':>7}"]
    for r in rows:
        ratio = "-" if r["facade_to_roof_ratio"] is None else f"{r['facade_to_roof_ratio']:.3f}"
        lines.append(f"{r['label']:<{w}}  {r['buildings']:>6}  {r['roof_kwh']:>12.1f}  "
                     f"{r['facade_kwh']:>12.1f}  {ratio:>7}")
    mean = summary["mean_ratio"]
    lines.append(f"mean facade/roof ratio: {'-' if mean is None else f'{mean:.3f}'} "
                 f"over {summary['regions']} region(s); facade > roof in "
                 f"{summary['regions_facade_above_roof']}")
    for g, s in summary["groups"].items():
        m = "-" if s["mean_ratio"] is None else f"{s['mean_ratio']:.3f}"
        lines.append(f"  {g}: mean ratio {m} over {s['regions']} region(s)")
    return "\n".join(lines)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value settings file or a previous manifest.json")
    p.add_argument("--buildings", help="GeoJSON FeatureCollection of lon/lat footprints")
    p.add_argument("--lat", type=float, help="local-frame origin latitude (default: data centre)")
    p.add_argument("--lon", type=float, help="local-frame origin longitude")
    p.add_argument("--min-altitude", dest="min_altitude", type=float,
                   help="altitude below which shadows are flagged truncated (deg, default 5)")
    p.add_argument("--threads", type=int, help="worker processes, 0 = one per core (default 0)")
    p.add_argument("--out", help="output file (shadow) or directory (simulate)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bipv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shadow", help="shadow polygons at one instant")
    _add_common(p)
    p.add_argument("--instant", required=True, help="ISO-8601 instant, e.g. 2023-03-21T04:00Z")

    p = sub.add_parser("simulate", help="patches, building totals and region report")
    _add_common(p)
    p.add_argument("--weather", help="weather CSV (timestamp, dni, dhi, ghi, temp_air, wind_speed)")
    p.add_argument("--start", help="first date, YYYY-MM-DD")
    p.add_argument("--end", help="last date (inclusive, default = start)")
    p.add_argument("--interval-min", dest="interval_min", type=int, help="timeline step (default 60)")
    p.add_argument("--padding-min", dest="padding_min", type=int,
                   help="trim after sunrise / before sunset (default 30)")
    p.add_argument("--albedo", type=float, help="ground reflectance (default 0.2)")
    p.add_argument("--pv", action="append", metavar="KEY=VALUE",
                   help="PV setting override, e.g. eta_stc=0.18 (repeatable)")
    p.add_argument("--format", choices=FORMATS, help="patch output format (default geojson)")
    p.add_argument("--lossy", action="store_true", default=None,
                   help="merge adjacent patches differing in one instant")

    p = sub.add_parser("report", help="facade/roof ratio table over building CSVs")
    p.add_argument("inputs", nargs="+", metavar="[LABEL=]PATH")
    p.add_argument("--out", help="write the table as CSV")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            rows, summary = cmd_report(args.inputs, args.out)
            if args.json:
                print(json.dumps({"rows": rows, "summary": summary}, indent=2, sort_keys=True))
            else:
                print(format_report(rows, summary))
        elif args.command == "shadow":
            print(cmd_shadow(_resolve(args, "shadow"), args.instant))
        else:
            files = cmd_simulate(_resolve(args, "simulate"))
            for k in sorted(files):
                print(f"{k}: {files[k]}")
    except ValidationError as exc:
        print(f"bipv: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BIPVIOError, OSError) as exc:
        print(f"bipv: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"bipv: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except BIPVError as exc:
        print(f"bipv: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # anything unexpected is a bug, not bad input
        log.debug("unexpected failure", exc_info=True)
        print(f"bipv: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
