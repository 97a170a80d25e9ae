import csv
import datetime as dt
import json
import math

import numpy as np
import pytest
from shapely.geometry import box

from bipv import cli, synthetic
from bipv.aggregate import BuildingPotential
from bipv import io as bio
from bipv.ephemeris import day_window, sun_positions, timeline
from bipv.pipeline import RunSettings, simulate
from bipv.scene import Building, build_scene
from bipv.shadow import scene_shadows

from conftest import EQUINOX, HK


@pytest.fixture
def inputs(tmp_path):
    scene = synthetic.random_scene(np.random.default_rng(7), n=10, extent=70)
    bpath, wpath = tmp_path / "b.geojson", tmp_path / "w.csv"
    bio.export_buildings(scene.buildings, HK, bpath)
    bio.write_weather(synthetic.weather_for_dates(HK, [EQUINOX]), wpath)
    return bpath, wpath


def run(*argv):
    return cli.main([str(a) for a in argv])


class TestExitCodes:
    def test_missing_buildings_file(self, tmp_path, capsys):
        assert run("shadow", "--buildings", tmp_path / "none.geojson", "--instant",
                   "2023-03-21T04:00Z", "--out", tmp_path / "s.geojson") == 2
        assert "none.geojson" in capsys.readouterr().err

    def test_night_instant(self, inputs, tmp_path, capsys):
        # 02:00 local in Hong Kong
        assert run("shadow", "--buildings", inputs[0], "--instant", "2023-03-20T18:00Z",
                   "--out", tmp_path / "s.geojson") == 1
        err = capsys.readouterr().err
        assert "sun-below-horizon" in err and "sunrise" in err and "sunset" in err

    def test_empty_range(self, inputs, tmp_path, capsys):
        assert run("simulate", "--buildings", inputs[0], "--weather", inputs[1],
                   "--start", "2023-03-22", "--end", "2023-03-21", "--out", tmp_path / "o") == 1
        assert "empty date range" in capsys.readouterr().err

    def test_weather_gap(self, inputs, tmp_path, capsys):
        assert run("simulate", "--buildings", inputs[0], "--weather", inputs[1],
                   "--start", "2023-06-01", "--out", tmp_path / "o") == 1
        assert "no weather record" in capsys.readouterr().err

    def test_bad_report_schema(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        assert run("report", tmp_path / "x.csv") == 1

    def test_invariant_violation(self, inputs, tmp_path, monkeypatch):
        from bipv.errors import InvariantError

        def broken(*a, **k):
            raise InvariantError("patch areas of roof:b00 do not add up")
        monkeypatch.setattr(cli, "check_invariants", broken)
        assert run("simulate", "--buildings", inputs[0], "--weather", inputs[1],
                   "--start", "2023-03-21", "--out", tmp_path / "o") == 3

    def test_unknown_config_key(self, inputs, tmp_path, capsys):
        (tmp_path / "c.txt").write_text("colour = red\n")
        assert run("simulate", "--config", tmp_path / "c.txt", "--buildings", inputs[0],
                   "--out", tmp_path / "o") == 1
        assert "colour" in capsys.readouterr().err


class TestShadowCommand:
    def test_matches_library(self, inputs, tmp_path):
        out = tmp_path / "s.geojson"
        assert run("shadow", "--buildings", inputs[0], "--lat", HK.latitude, "--lon",
                   HK.longitude, "--instant", "2023-03-21T02:30Z", "--out", out) == 0
        cfg = cli.RunConfig(buildings=str(inputs[0]), lat=HK.latitude, lon=HK.longitude)
        scene, _ = cli._load_scene(cfg)
        sun = sun_positions([dt.datetime(2023, 3, 21, 2, 30, tzinfo=dt.timezone.utc)], HK)[0]
        bio.export_shadows(scene_shadows(scene, sun, include_ground=True), scene,
                           tmp_path / "lib.geojson")
        assert out.read_bytes() == (tmp_path / "lib.geojson").read_bytes()

    def test_single_building(self, tmp_path):
        bpath = tmp_path / "one.geojson"
        bio.export_buildings([Building("solo", box(0, 0, 10, 10), 20)], HK, bpath)
        out = tmp_path / "s.geojson"
        assert run("shadow", "--buildings", bpath, "--instant", "2023-03-21T04:00Z",
                   "--out", out) == 0
        feats = json.loads(out.read_text())["features"]
        kinds = [f["properties"]["kind"] for f in feats]
        assert kinds.count("ground") == 1
        flagged = [f for f in feats if "orientation" in f["properties"]["flags"]]
        assert 1 <= len(flagged) <= 3


class TestSimulateCommand:
    def test_outputs_and_rerun(self, inputs, tmp_path):
        a = tmp_path / "a"
        assert run("simulate", "--buildings", inputs[0], "--weather", inputs[1],
                   "--start", "2023-03-21", "--threads", 1, "--out", a) == 0
        names = {p.name for p in a.iterdir()}
        assert names == {"patches.geojson", "buildings.csv", "region.json", "ingest.json",
                         "manifest.json"}
        manifest = json.loads((a / "manifest.json").read_text())
        assert manifest["inputs"]["weather"]["sha256"] == cli.sha256(inputs[1])
        assert manifest["outputs"]["buildings"]["sha256"] == cli.sha256(a / "buildings.csv")
        b = tmp_path / "b"
        assert run("simulate", "--config", a / "manifest.json", "--out", b) == 0
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_hand_integration(self, tmp_path):
        bpath, wpath = tmp_path / "one.geojson", tmp_path / "w.csv"
        bio.export_buildings([Building("solo", box(0, 0, 12, 12), 9)], HK, bpath)
        weather = synthetic.weather_for_dates(HK, [EQUINOX])
        bio.write_weather(weather, wpath)
        assert run("simulate", "--buildings", bpath, "--weather", wpath, "--start",
                   "2023-03-21", "--lat", HK.latitude, "--lon", HK.longitude,
                   "--out", tmp_path / "o") == 0
        row = next(csv.DictReader(open(tmp_path / "o" / "buildings.csv")))

        # spreadsheet-style: every instant, unshaded roof at tilt = lat facing south
        times = timeline(day_window(EQUINOX, HK, 30), 60)
        tilt = math.radians(HK.latitude)
        n = np.array([0.0, -math.sin(tilt), math.cos(tilt)])
        kwh_m2 = 0.0
        for s in sun_positions(times, HK):
            w = weather.at(s.timestamp)
            al, az = math.radians(s.altitude_deg), math.radians(s.azimuth_deg)
            toward = np.array([math.sin(az) * math.cos(al), math.cos(az) * math.cos(al),
                               math.sin(al)])
            g = (w.dni * max(toward @ n, 0.0) + w.dhi * (1 + math.cos(tilt)) / 2
                 + w.ghi * 0.2 * (1 - math.cos(tilt)) / 2)
            t_cell = w.temp_air + g / (25 + 6.84 * w.wind_speed)
            kwh_m2 += g * 0.2 * (1 - 0.004 * (t_cell - 25)) / 1000
        area = float(row["roof_area_m2"])
        assert float(row["roof_kwh"]) == pytest.approx(kwh_m2 * area, rel=1e-9)


class TestReportCommand:
    def write(self, path, bs):
        bio.export_building_csv(bs, path)
        return path

    def test_one_region(self, tmp_path, capsys):
        p = self.write(tmp_path / "r.csv", [
            BuildingPotential("a", 10.0, 5.0, 100.0, 200.0)])
        assert run("report", f"r1={p}") == 0
        out = capsys.readouterr().out.splitlines()
        assert out[1].startswith("r1") and "0.500" in out[1]
        assert out[2].startswith("mean facade/roof ratio: 0.500 over 1 region")

    def test_two_regions_grouped(self, tmp_path):
        p1 = self.write(tmp_path / "1.csv", [BuildingPotential("a", 10.0, 5.0, 1.0, 1.0)])
        p2 = self.write(tmp_path / "2.csv", [BuildingPotential("a", 10.0, 15.0, 1.0, 1.0)])
        rows, summary = cli.cmd_report([f"asia/x={p1}", f"asia/y={p2}"], tmp_path / "t.csv")
        assert len(rows) == 2
        assert summary["mean_ratio"] == pytest.approx(1.0)
        assert summary["regions_facade_above_roof"] == 1
        assert summary["groups"]["asia"]["regions"] == 2
        assert (tmp_path / "t.csv").read_text().count("\n") == 3

    def test_tall_dense_ratio_larger(self, tmp_path):
        weather = synthetic.weather_for_dates(HK, [EQUINOX])
        paths = []
        for name, scene in (("tall", synthetic.block_scene(3, 3, 20, 20, 60, 10)),
                            ("low", synthetic.block_scene(3, 3, 20, 20, 8, 40))):
            sim = simulate(scene, weather, [EQUINOX], RunSettings())
            paths.append(f"{name}={self.write(tmp_path / f'{name}.csv', sim.buildings)}")
        rows, _ = cli.cmd_report(paths)
        assert rows[0]["facade_to_roof_ratio"] > rows[1]["facade_to_roof_ratio"]


class TestConfig:
    def test_key_value_file(self, tmp_path):
        (tmp_path / "c.txt").write_text("interval_minutes = 15  # quarter hours\n"
                                        "pv.eta_stc = 0.18\nstart = 2023-01-01\n")
        cfg = cli.RunConfig()
        for k, v in cli.read_config(tmp_path / "c.txt").items():
            cli._apply(cfg, k, v, "c.txt")
        assert cfg.interval_min == 15 and cfg.pv_config().eta_stc == 0.18
        assert cfg.dates() == [dt.date(2023, 1, 1)]

    def test_echo_has_no_threads(self):
        e = cli.RunConfig(threads=8, out="x").echo()
        assert "threads" not in e and "out" not in e and e["pv"]["facade_derate"] == 0.68

    def test_scene_origin_auto(self, inputs):
        scene, report = cli._load_scene(cli.RunConfig(buildings=str(inputs[0])))
        assert report.rejected == []
        assert scene.origin.latitude == pytest.approx(HK.latitude, abs=0.01)
        assert len(scene.buildings) == 10
