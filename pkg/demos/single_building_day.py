"""A lone 20 m building on the March equinox in Hong Kong.

Walks through the pipeline one stage at a time: the day's timeline, the
noon shadow, the per-surface patches and the day's energy.
"""

import datetime as dt

from shapely.geometry import box

from bipv import synthetic
from bipv.ephemeris import GeoLocation, day_window, sun_positions, timeline
from bipv.pipeline import simulate
from bipv.scene import Building, build_scene
from bipv.shadow import ground_shadow, scene_shadows

HK = GeoLocation(22.3, 114.2)
DAY = dt.date(2023, 3, 21)


def main():
    scene = build_scene([Building("solo", box(0, 0, 15, 10), 20.0)], HK)
    print(f"{len(scene.facades)} facades, roof {scene.roofs[0].polygon.area:.0f} m2")

    window = day_window(DAY, HK, padding_minutes=30)
    times = timeline(window, 60)
    suns = sun_positions(times, HK)
    print(f"window {window.start:%H:%M}-{window.end:%H:%M} UTC, {len(times)} hourly instants")
    for s in suns:
        print(f"  {s.timestamp:%H:%M}  alt {s.altitude_deg:5.1f}  az {s.azimuth_deg:5.1f}")

    noon = max(suns, key=lambda s: s.altitude_deg)
    g = ground_shadow(scene.buildings[0], noon)
    print(f"\nnoon ground shadow covers {g.polygon.area:.0f} m2 (footprint 150 m2)")
    shadows = scene_shadows(scene, noon)
    for ref, s in shadows.surfaces.items():
        state = "turned away" if s.whole else f"{s.union.area:.1f} m2 shaded"
        print(f"  {ref:18s} {state}")

    weather = synthetic.weather_for_dates(HK, [DAY])
    sim = simulate(scene, weather, [DAY])
    print("\nsunlit minutes per surface")
    for r in sorted(sim.patch_results, key=lambda r: r.surface_ref):
        print(f"  {r.surface_ref:18s} {r.sunlit_minutes:4d} min  {r.pv_kwh_m2:.3f} kWh/m2")
    b = sim.buildings[0]
    print(f"\nroof {b.roof_kwh:.1f} kWh, facades {b.facade_kwh:.1f} kWh, "
          f"facade/roof {sim.region.facade_to_roof_ratio:.2f}")


if __name__ == "__main__":
    main()
