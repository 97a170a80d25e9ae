import datetime as dt
import json
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import box, shape

from bipv import synthetic
from bipv.ephemeris import UTC
from bipv.errors import BIPVIOError, ValidationError
from bipv.io import (FormatError, export_building_csv, export_buildings, export_patches,
                     features_origin, load_buildings, load_weather, read_building_csv,
                     to_buildings, write_weather)
from bipv.pipeline import RunSettings, simulate
from bipv.scene import Building, build_scene, local_to_lonlat

from conftest import EQUINOX, HK


def square(lon, lat, d=0.0002):
    return [[lon, lat], [lon + d, lat], [lon + d, lat + d], [lon, lat + d], [lon, lat]]


def feature(coords, **props):
    return {"type": "Feature", "properties": props,
            "geometry": {"type": "Polygon", "coordinates": [coords]}}


def write_fc(tmp_path, feats, name="b.geojson"):
    p = tmp_path / name
    p.write_text(json.dumps({"type": "FeatureCollection", "features": feats}))
    return p


def weather_csv(tmp_path, rows, header="timestamp,dni,dhi,ghi,temp_air,wind_speed"):
    p = tmp_path / "w.csv"
    p.write_text("\n".join([header, *rows]) + "\n")
    return p


def hourly(n, start=dt.datetime(2023, 3, 21, tzinfo=UTC), step=60):
    return [f"{(start + dt.timedelta(minutes=step * i)).isoformat()},500,100,400,25,1"
            for i in range(n)]


class TestLoadBuildings:
    def test_three_valid(self, tmp_path):
        p = write_fc(tmp_path, [feature(square(114.2 + 0.001 * i, 22.3), id=f"b{i}", height=10)
                                for i in range(3)])
        feats, rep = load_buildings(p)
        assert [f.id for f in feats] == ["b0", "b1", "b2"]
        assert rep.rejected == [] and rep.accepted_features == 3

    def test_levels_fallback(self, tmp_path):
        feats, rep = load_buildings(write_fc(tmp_path, [feature(square(114.2, 22.3), levels=10)]))
        assert feats[0].height == 30.0 and feats[0].height_source == "levels"
        assert rep.levels_fallback == [feats[0].id]

    def test_height_string(self, tmp_path):
        feats, _ = load_buildings(write_fc(tmp_path, [feature(square(114.2, 22.3), height="12 m")]))
        assert feats[0].height == 12.0

    def test_bow_tie(self, tmp_path):
        bt = [[114.2, 22.3], [114.2002, 22.3002], [114.2002, 22.3], [114.2, 22.3002],
              [114.2, 22.3]]
        feats, rep = load_buildings(write_fc(tmp_path, [feature(bt, id="x", height=5)]))
        assert feats == [] and rep.rejected[0]["reason"] == "self-intersection"

    @pytest.mark.parametrize("props,reason", [({}, "missing height"),
                                              ({"height": -3}, "height"),
                                              ({"levels": 0}, "levels")])
    def test_height_rejections(self, tmp_path, props, reason):
        _, rep = load_buildings(write_fc(tmp_path, [feature(square(114.2, 22.3), **props)]))
        assert reason in rep.rejected[0]["reason"]

    def test_tiny(self, tmp_path):
        _, rep = load_buildings(write_fc(tmp_path, [feature(square(114.2, 22.3, 1e-6),
                                                            height=3)]))
        assert "area" in rep.rejected[0]["reason"]

    def test_duplicates(self, tmp_path):
        sq = square(114.2, 22.3)
        rot = sq[1:] + [sq[1]]
        p = write_fc(tmp_path, [feature(sq, id="a", height=5), feature(rot, id="b", height=5),
                                feature(square(114.3, 22.3), id="a", height=5)])
        feats, rep = load_buildings(p)
        assert [f.id for f in feats] == ["a"]
        assert "'a'" in rep.rejected[0]["reason"] and "duplicate" in rep.rejected[1]["reason"]

    def test_multipolygon_parts(self, tmp_path):
        mp = {"type": "Feature", "properties": {"id": "m", "height": 8},
              "geometry": {"type": "MultiPolygon",
                           "coordinates": [[square(114.2, 22.3)], [square(114.21, 22.3)]]}}
        feats, rep = load_buildings(write_fc(tmp_path, [mp]))
        assert [f.id for f in feats] == ["m.0", "m.1"] and rep.accepted_features == 1

    def test_bad_json_position(self, tmp_path):
        p = tmp_path / "bad.geojson"
        p.write_text('{"type": "FeatureCollection",\n "features": [,]}')
        with pytest.raises(FormatError, match="line 2 column"):
            load_buildings(p)

    def test_not_collection(self, tmp_path):
        p = tmp_path / "x.geojson"
        p.write_text('{"type": "Feature"}')
        with pytest.raises(FormatError):
            load_buildings(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(BIPVIOError):
            load_buildings(tmp_path / "nope.geojson")

    @given(st.lists(st.sampled_from(["ok", "bowtie", "noheight", "tiny", "dup"]), max_size=12))
    def test_counts(self, kinds):
        import tempfile
        from pathlib import Path
        feats = []
        for i, k in enumerate(kinds):
            lon = 114.2 + 0.001 * i
            if k == "bowtie":
                c = [[lon, 22.3], [lon + 2e-4, 22.3002], [lon + 2e-4, 22.3], [lon, 22.3002],
                     [lon, 22.3]]
                feats.append(feature(c, height=5))
            elif k == "noheight":
                feats.append(feature(square(lon, 22.3)))
            elif k == "tiny":
                feats.append(feature(square(lon, 22.3, 1e-6), height=5))
            elif k == "dup":
                feats.append(feature(square(114.1, 22.3), height=5))
            else:
                feats.append(feature(square(lon, 22.3), height=5))
        with tempfile.TemporaryDirectory() as d:
            _, rep = load_buildings(write_fc(Path(d), feats))
        assert rep.accepted_features + rep.rejected_count == len(kinds)


class TestBuildingRoundTrip:
    @given(st.integers(0, 10_000), st.floats(1, 300))
    def test_round_trip(self, seed, h):
        import tempfile
        from pathlib import Path
        rng = np.random.default_rng(seed)
        b = Building("r", synthetic.random_footprint(rng), round(h, 3))
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "out.geojson"
            export_buildings([b], HK, p)
            feats, rep = load_buildings(p)
            doc = json.loads(p.read_text())
        assert rep.rejected == []
        assert feats[0].height == b.height
        lon, lat = local_to_lonlat(*np.asarray(b.footprint.exterior.coords).T, HK)
        want = np.round(np.column_stack([lon, lat]), 6)
        got = np.asarray(doc["features"][0]["geometry"]["coordinates"][0])
        assert np.array_equal(got, want)
        np.testing.assert_array_equal(np.asarray(feats[0].geometry.exterior.coords), want)

    def test_to_buildings_and_origin(self, tmp_path):
        p = write_fc(tmp_path, [feature(square(114.2, 22.3), id="a", height=10),
                                feature(square(114.201, 22.301), id="b", height=10)])
        feats, _ = load_buildings(p)
        o = features_origin(feats)
        assert o.longitude == pytest.approx(114.2006) and o.latitude == pytest.approx(22.3006)
        bs = to_buildings(feats, o)
        assert bs[0].footprint.area == pytest.approx(bs[1].footprint.area, rel=1e-3)
        assert 400 < bs[0].footprint.area < 500


class TestLoadWeather:
    def test_hourly(self, tmp_path):
        w = load_weather(weather_csv(tmp_path, hourly(24)))
        assert len(w) == 24 and w.spacing_minutes == 60

    def test_out_of_order(self, tmp_path):
        rows = hourly(5)
        rows[2], rows[3] = rows[3], rows[2]
        with pytest.raises(FormatError, match="line 5"):
            load_weather(weather_csv(tmp_path, rows))

    def test_missing_column(self, tmp_path):
        with pytest.raises(FormatError, match="wind_speed"):
            load_weather(weather_csv(tmp_path, ["2023-03-21T00:00:00+00:00,1,1,1,1"],
                                     "timestamp,dni,dhi,ghi,temp_air"))

    def test_negative(self, tmp_path):
        rows = hourly(3)
        rows[1] = rows[1].replace(",500,", ",-5,")
        with pytest.raises(FormatError, match=r"line 3, column 'dni'"):
            load_weather(weather_csv(tmp_path, rows))

    def test_naive_timestamp(self, tmp_path):
        with pytest.raises(FormatError, match="zone"):
            load_weather(weather_csv(tmp_path, ["2023-03-21T00:00:00,500,100,400,25,1"]))

    def test_irregular(self, tmp_path):
        rows = hourly(3) + [f"{dt.datetime(2023, 3, 21, 3, 20, tzinfo=UTC).isoformat()},"
                            "500,100,400,25,1"]
        with pytest.raises(FormatError, match="spacing"):
            load_weather(weather_csv(tmp_path, rows))

    def test_nsrdb_15min(self, tmp_path):
        lines = ["Source,Location ID,Time Zone,Latitude,Longitude",
                 "NSRDB,123,8,22.3,114.2",
                 "Year,Month,Day,Hour,Minute,DNI,DHI,GHI,Temperature,Wind Speed"]
        for i in range(8):
            lines.append(f"2023,3,21,{8 + i // 4},{15 * (i % 4)},600,90,500,24,2")
        p = tmp_path / "nsrdb.csv"
        p.write_text("\n".join(lines) + "\n")
        w = load_weather(p)
        assert len(w) == 8 and w.spacing_minutes == 15
        assert w.records[0].timestamp == dt.datetime(2023, 3, 21, 0, 0, tzinfo=UTC)
        assert w.records[0].temp_air == 24

    def test_round_trip(self, tmp_path):
        w = synthetic.weather_for_dates(HK, [EQUINOX], 15)
        write_weather(w, tmp_path / "w.csv")
        back = load_weather(tmp_path / "w.csv")
        assert back.records == w.records


@pytest.fixture(scope="module")
def run():
    scene = build_scene([Building("a", box(0, 0, 20, 15), 30),
                         Building("b", box(30, -5, 45, 10), 12)], HK)
    sim = simulate(scene, synthetic.weather_for_dates(HK, [EQUINOX]), [EQUINOX], RunSettings())
    return scene, sim


class TestExports:
    def test_byte_stable(self, run, tmp_path):
        scene, sim = run
        for fmt in ("geojson", "csv"):
            export_patches(sim.patch_results, scene, tmp_path / f"1.{fmt}", fmt)
            export_patches(list(reversed(sim.patch_results)), scene, tmp_path / f"2.{fmt}", fmt)
            assert (tmp_path / f"1.{fmt}").read_bytes() == (tmp_path / f"2.{fmt}").read_bytes()

    def test_properties(self, run, tmp_path):
        scene, sim = run
        export_patches(sim.patch_results, scene, tmp_path / "p.geojson")
        doc = json.loads((tmp_path / "p.geojson").read_text())
        assert len(doc["features"]) == len(sim.patch_results)
        for f in doc["features"]:
            props = f["properties"]
            for k in ("surface_class", "building_id", "area_m2", "sunlit_minutes", "poa_kwh_m2",
                      "pv_kwh_m2"):
                assert k in props
            assert shape(f["geometry"]).is_valid
            if props["surface_class"] == "facade":
                assert 0 <= props["z_min"] < props["z_max"]

    def test_sums_match_rollups(self, run, tmp_path):
        scene, sim = run
        export_patches(sim.patch_results, scene, tmp_path / "p.geojson")
        export_building_csv(sim.buildings, tmp_path / "b.csv")
        doc = json.loads((tmp_path / "p.geojson").read_text())
        sums = defaultdict(float)
        for f in doc["features"]:
            p = f["properties"]
            sums[p["building_id"]] += p["area_m2"] * p["pv_kwh_m2"]
        for b, back in zip(sim.buildings, read_building_csv(tmp_path / "b.csv")):
            assert sums[b.building_id] == pytest.approx(b.roof_kwh + b.facade_kwh, rel=1e-9)
            assert back == b.__class__(b.building_id, b.roof_kwh, b.facade_kwh,
                                       b.roof_area_m2, b.facade_area_m2)

    def test_bad_format(self, run, tmp_path):
        with pytest.raises(ValidationError):
            export_patches(run[1].patch_results, run[0], tmp_path / "p.shp", "shapefile")

    def test_unwritable(self, run, tmp_path):
        (tmp_path / "file").write_text("")
        with pytest.raises(BIPVIOError):
            export_building_csv(run[1].buildings, tmp_path / "file" / "b.csv")

    def test_building_csv_schema(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("id,roof\nx,1\n")
        with pytest.raises(FormatError):
            read_building_csv(p)
