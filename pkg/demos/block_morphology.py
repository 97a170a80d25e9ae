"""Dense towers against sparse low-rise slabs over one equinox day.

Uniform-height blocks show why roofs stay unshaded when every neighbour
has the same height; varying the tower heights brings roof shading back.
"""

import datetime as dt

import numpy as np

from bipv import synthetic
from bipv.ephemeris import GeoLocation
from bipv.pipeline import simulate
from bipv.scene import Building, build_scene

HK = GeoLocation(22.3, 114.2)
DAY = dt.date(2023, 3, 21)


def summarise(name, scene):
    sim = simulate(scene, synthetic.weather_for_dates(HK, [DAY]), [DAY])
    roof = np.mean([s["roof"] for s in sim.region.shade_fractions])
    facade = np.mean([s["facade"] for s in sim.region.shade_fractions])
    r = sim.region
    print(f"{name:24s} roof shade {roof:6.1%}  facade shade {facade:6.1%}  "
          f"roof {r.roof_kwh_per_m2:.2f} kWh/m2  facade {r.facade_kwh_per_m2:.2f} kWh/m2  "
          f"facade/roof {r.facade_to_roof_ratio:.2f}")


def jitter(scene, lo, hi, seed):
    rng = np.random.default_rng(seed)
    return build_scene([Building(b.id, b.footprint, float(h))
                        for b, h in zip(scene.buildings, rng.uniform(lo, hi, len(scene.buildings)))],
                       HK)


def main():
    towers = synthetic.block_scene(3, 3, 30, 30, 100, 15)
    slabs = synthetic.block_scene(3, 3, 30, 30, 10, 40)
    summarise("towers, all 100 m", towers)
    summarise("slabs, all 10 m", slabs)
    summarise("towers, 20-100 m", jitter(towers, 20, 100, 6))
    summarise("slabs, 6-14 m", jitter(slabs, 6, 14, 6))


if __name__ == "__main__":
    main()
