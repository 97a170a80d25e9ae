import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon, box

from bipv.ephemeris import GeoLocation
from bipv.errors import InputDomainError, ValidationError
from bipv.scene import (Building, GridIndex, build_scene, decompose_facades, lonlat_to_local,
                        project_to_local)
from bipv.synthetic import random_footprint

HK = GeoLocation(22.3, 114.2)


def courtyard(h=5.0):
    return Building("c", Polygon(box(0, 0, 30, 30).exterior.coords,
                                 [box(10, 10, 20, 20).exterior.coords]), h)


class TestBuilding:
    def test_reoriented_ccw(self):
        b = Building("x", Polygon([(0, 0), (0, 1), (1, 1), (1, 0)]), 3)
        assert b.footprint.exterior.is_ccw

    def test_bow_tie_rejected(self):
        with pytest.raises(ValidationError, match="'bt'"):
            Building("bt", Polygon([(0, 0), (1, 1), (1, 0), (0, 1)]), 3)

    @pytest.mark.parametrize("h", [0, -1, 1000.5, float("nan")])
    def test_height_range(self, h):
        with pytest.raises(ValidationError):
            Building("x", box(0, 0, 1, 1), h)

    def test_tiny_footprint(self):
        with pytest.raises(ValidationError):
            Building("x", box(0, 0, 0.3, 0.3), 3)


class TestBuildScene:
    def test_square(self, square_scene):
        assert len(square_scene.roofs) == 1
        assert len(square_scene.facades) == 4
        assert all(f.area == pytest.approx(200) for f in square_scene.facades)

    def test_two_squares(self):
        s = build_scene([Building("a", box(0, 0, 10, 10), 5),
                         Building("b", box(20, 0, 30, 10), 5)], HK)
        assert len(s.roofs) == 2 and len(s.facades) == 8

    def test_courtyard(self):
        s = build_scene([courtyard()], HK)
        assert len(s.roofs) == 1 and len(s.facades) == 8
        assert s.roofs[0].polygon.area == pytest.approx(800)

    def test_duplicate_id(self):
        with pytest.raises(ValidationError, match="'a'"):
            build_scene([Building("a", box(0, 0, 1, 1), 5), Building("a", box(5, 5, 6, 6), 5)], HK)

    def test_empty(self):
        with pytest.raises(ValidationError):
            build_scene([], HK)

    def test_bounds_contain_footprints(self):
        s = build_scene([Building("a", box(0, 0, 10, 10), 50)], HK)
        x0, y0, x1, y1 = s.bounds
        assert x0 <= 0 and y0 <= 0 and x1 >= 10 and y1 >= 10
        # default margin covers the longest shadow at 5 degrees
        assert x1 - 10 >= 50 / math.tan(math.radians(5)) - 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        bs = [Building(f"b{i}", random_footprint(rng), 10) for i in range(1)]
        a, b = build_scene(bs, HK), build_scene(bs, HK)
        assert [f.id for f in a.facades] == [f.id for f in b.facades]
        assert [f.a for f in a.facades] == [f.a for f in b.facades]


class TestFacades:
    def test_unit_square_normals(self):
        fs = decompose_facades(Building("u", box(0, 0, 1, 1), 2))
        by_edge = {(f.a, f.b): f for f in fs}
        assert by_edge[((0.0, 0.0), (1.0, 0.0))].outward_normal == pytest.approx((0, -1))
        assert by_edge[((1.0, 0.0), (1.0, 1.0))].outward_normal == pytest.approx((1, 0))

    def test_diagonal_plane(self):
        b = Building("d", Polygon([(0, 0), (1, 1), (0, 2)]), 4)
        f = next(f for f in decompose_facades(b) if f.a == (0.0, 0.0))
        A, B, C, D = f.plane
        assert C == 0
        assert A * 0 + B * 0 + D == pytest.approx(0, abs=1e-12)
        assert A * 1 + B * 1 + D == pytest.approx(0, abs=1e-12)
        # x - y = 0 up to scale
        assert A == pytest.approx(-B)

    def test_courtyard_normals_point_into_courtyard(self):
        fs = decompose_facades(courtyard())
        inner = [f for f in fs if 10 <= f.a[0] <= 20 and 10 <= f.a[1] <= 20]
        assert len(inner) == 4
        for f in inner:
            mx, my = (f.a[0] + f.b[0]) / 2, (f.a[1] + f.b[1]) / 2
            nx, ny = f.outward_normal
            # a step along the normal lands in the open courtyard
            assert 10 < mx + nx < 20 and 10 < my + ny < 20

    def test_short_edge_skipped(self):
        poly = Polygon([(0, 0), (10, 0), (10, 10), (9.9995, 10.0), (0, 10)])
        skipped = []
        fs = decompose_facades(Building("s", poly, 3), skipped)
        assert len(fs) == 4 and len(skipped) == 1

    @given(st.integers(0, 10_000), st.floats(1, 200))
    def test_invariants(self, seed, h):
        b = Building("r", random_footprint(np.random.default_rng(seed)), h)
        fs = decompose_facades(b)
        assert sum(f.area for f in fs) == pytest.approx(b.footprint.length * h, rel=1e-6)
        closure = np.sum([np.array(f.outward_normal) * f.length for f in fs], axis=0)
        assert np.allclose(closure, 0, atol=1e-6)
        coords = np.asarray(b.footprint.exterior.coords)
        convex = b.footprint.convex_hull.area <= b.footprint.area * (1 + 1e-9)
        for f in fs:
            A, B, C, D = f.plane
            assert C == 0
            assert math.hypot(*f.outward_normal) == pytest.approx(1)
            if convex:
                assert np.all(A * coords[:, 0] + B * coords[:, 1] + D <= 1e-6)
            # locally the solid is always behind the plane
            mx, my = (f.a[0] + f.b[0]) / 2, (f.a[1] + f.b[1]) / 2
            nx, ny = f.outward_normal
            assert b.footprint.contains(Point(mx - 1e-3 * nx, my - 1e-3 * ny))
            assert not b.footprint.contains(Point(mx + 1e-3 * nx, my + 1e-3 * ny))


class TestIndex:
    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0.5, 20),
                              st.floats(0.5, 20)), min_size=1, max_size=30),
           st.tuples(st.floats(-10, 110), st.floats(-10, 110), st.floats(0, 50), st.floats(0, 50)))
    def test_conservative(self, rects, q):
        boxes = np.array([(x, y, x + w, y + h) for x, y, w, h in rects])
        idx = GridIndex(boxes, 7.0)
        qx, qy, qw, qh = q
        got = set(idx.query(qx, qy, qx + qw, qy + qh))
        for i, (x0, y0, x1, y1) in enumerate(boxes):
            if x0 <= qx + qw and x1 >= qx and y0 <= qy + qh and y1 >= qy:
                assert i in got


class TestProjection:
    def test_identity_at_origin(self):
        bs = project_to_local([([(114.2, 22.3), (114.2001, 22.3), (114.2001, 22.3001),
                                 (114.2, 22.3001)], 10.0, "x")], HK)
        assert bs[0].footprint.bounds[0] == pytest.approx(0, abs=1e-9)

    def test_lat_metres(self):
        _, y = lonlat_to_local(0.0, 0.001, GeoLocation(0, 0))
        assert float(y) == pytest.approx(111.19, abs=0.01)

    def test_lon_metres_at_60(self):
        x, _ = lonlat_to_local(0.001, 60.0, GeoLocation(60, 0))
        assert float(x) == pytest.approx(55.6, abs=0.05)

    def test_extent(self):
        with pytest.raises(InputDomainError):
            lonlat_to_local(3.0, 0.0, GeoLocation(0, 0))
