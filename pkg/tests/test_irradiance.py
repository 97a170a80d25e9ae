import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bipv.ephemeris import UTC, SunSample
from bipv.errors import ValidationError, WeatherGapError
from bipv.irradiance import (SurfaceOrientation, WeatherRecord, WeatherSeries, angle_of_incidence,
                             poa, surface_mean_irradiance)

T0 = dt.datetime(2023, 3, 21, 4, 0, tzinfo=UTC)


def rec(dni=800.0, dhi=100.0, ghi=500.0, t=T0, temp=25.0, wind=1.0):
    return WeatherRecord(t, dni, dhi, ghi, temp, wind)


def unit(alt, az):
    a, z = math.radians(alt), math.radians(az)
    return np.array([math.sin(z) * math.cos(a), math.cos(z) * math.cos(a), math.sin(a)])


def panel_normal(tilt, az):
    # tilting the up vector toward the panel azimuth is the same as a sun at 90 - tilt
    return unit(90.0 - tilt, az)


class TestAngleOfIncidence:
    def test_zenith_flat(self):
        assert angle_of_incidence(SunSample.from_angles(90, 0), SurfaceOrientation(0, 180)) \
            == pytest.approx(0, abs=1e-6)

    def test_zenith_vertical(self):
        assert angle_of_incidence(SunSample.from_angles(90, 0), SurfaceOrientation(90, 180)) \
            == pytest.approx(90, abs=1e-6)

    def test_vertical_facing_sun(self):
        # cos AOI = cos 30 * cos 0, so the sun sits 30 degrees off the wall normal
        got = angle_of_incidence(SunSample.from_angles(30, 135), SurfaceOrientation(90, 135))
        c = unit(30, 135) @ panel_normal(90, 135)
        assert got == pytest.approx(math.degrees(math.acos(c)), abs=1e-9)
        assert got == pytest.approx(30, abs=1e-9)

    @given(st.floats(0.1, 90), st.floats(0, 359.9), st.floats(0, 90), st.floats(0, 359.9))
    def test_matches_dot_product(self, alt, az, tilt, paz):
        got = angle_of_incidence(SunSample.from_angles(alt, az), SurfaceOrientation(tilt, paz))
        c = float(np.clip(unit(alt, az) @ panel_normal(tilt, paz), -1, 1))
        assert got == pytest.approx(math.degrees(math.acos(c)), abs=1e-6)
        assert 0 <= got <= 180


class TestPoa:
    def test_reference_example(self):
        # choose a sun 25 degrees off the normal of a 30 degree south-facing panel
        orient = SurfaceOrientation(30, 180, 0.2)
        sun = SunSample.from_angles(90 - 30 - 25, 180)
        n = panel_normal(30, 180)
        assert math.degrees(math.acos(unit(sun.altitude_deg, 180) @ n)) == pytest.approx(25)
        b = poa(rec(), orient, sun)
        assert b.g_dir == pytest.approx(725.05, abs=0.01)
        assert b.g_dif == pytest.approx(93.30, abs=0.01)
        assert b.g_ref == pytest.approx(6.70, abs=0.01)
        assert b.total == pytest.approx(825.05, abs=0.02)

    def test_flat_no_reflection(self):
        assert poa(rec(), SurfaceOrientation(0, 180, 0.9), SunSample.from_angles(40, 100)).g_ref \
            == 0.0

    def test_vertical_half_sky(self):
        assert poa(rec(dhi=100), SurfaceOrientation(90, 0), SunSample.from_angles(40, 100)).g_dif \
            == pytest.approx(50, abs=1e-12)

    def test_night_no_direct(self):
        assert poa(rec(), SurfaceOrientation(0, 180), SunSample.from_angles(-3, 100)).g_dir == 0

    def test_back_of_panel_no_direct(self):
        assert poa(rec(), SurfaceOrientation(90, 0), SunSample.from_angles(30, 180)).g_dir == 0

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            rec(dni=-1)

    @given(st.floats(0, 1100), st.floats(0, 500), st.floats(0.5, 90), st.floats(0, 359.9),
           st.floats(0, 90), st.floats(0, 359.9), st.floats(0, 1))
    def test_identities(self, dni, dhi, alt, az, tilt, paz, albedo):
        sun = SunSample.from_angles(alt, az)
        ghi = dni * math.sin(math.radians(alt)) + dhi
        r = rec(dni, dhi, ghi)
        o = SurfaceOrientation(tilt, paz, albedo)
        lit, dark = poa(r, o, sun), poa(r, o, sun, shaded=True)
        assert lit.total - dark.total == pytest.approx(lit.g_dir, abs=1e-9)
        assert dark.g_dir == 0 and dark.g_dif == lit.g_dif and dark.g_ref == lit.g_ref
        assert min(lit.g_dir, lit.g_dif, lit.g_ref) >= 0
        flat = poa(r, SurfaceOrientation(0, paz, albedo), sun)
        assert flat.total == pytest.approx(ghi, abs=1e-9)


class TestSurfaceMean:
    def test_examples(self):
        assert surface_mean_irradiance([(5, 300), (7, 300)]) == pytest.approx(300)
        assert surface_mean_irradiance([(2, 0), (2, 800)]) == pytest.approx(400)
        assert surface_mean_irradiance([(30, 100), (70, 500)]) == pytest.approx(380)

    def test_zero_area(self):
        with pytest.raises(ValidationError):
            surface_mean_irradiance([(0, 100)])

    @given(st.lists(st.tuples(st.floats(0.1, 100), st.floats(0, 1000)), min_size=1, max_size=10),
           st.integers(2, 5))
    def test_subdivision_invariant(self, patches, k):
        split = [(a / k, i) for a, i in patches for _ in range(k)]
        assert surface_mean_irradiance(split) == pytest.approx(surface_mean_irradiance(patches),
                                                               rel=1e-12)


class TestWeatherSeries:
    def series(self, minutes=(0, 60, 120, 180)):
        return WeatherSeries([rec(t=T0 + dt.timedelta(minutes=m), dni=float(m), ghi=100.0) for m in minutes])

    def test_nearest(self):
        w = self.series()
        got = w.align([T0 + dt.timedelta(minutes=m) for m in (10, 50, 120)])
        assert got["dni"].tolist() == [0, 60, 120]

    def test_gap_lists_span(self):
        w = self.series((0, 60, 300))
        with pytest.raises(WeatherGapError) as ei:
            w.align([T0 + dt.timedelta(minutes=m) for m in (0, 120, 180, 240, 300)])
        assert len(ei.value.spans) == 1
        assert ei.value.spans[0] == (T0 + dt.timedelta(minutes=120),
                                     T0 + dt.timedelta(minutes=240))

    def test_beyond_end(self):
        with pytest.raises(WeatherGapError):
            self.series().at(T0 + dt.timedelta(hours=5))

    def test_unordered(self):
        with pytest.raises(ValidationError):
            self.series((0, 120, 60))

    def test_ghi_consistency(self):
        with pytest.raises(ValidationError):
            rec(dni=0, dhi=100, ghi=400)
