"""How much a western neighbour costs a low building over a year.

Twelve mid-month days stand in for the year. The loss is compared with an
unoccluded twin and broken down by position in the day.
"""

import datetime as dt

import numpy as np
from shapely.geometry import box

from bipv import synthetic
from bipv.ephemeris import GeoLocation
from bipv.pipeline import simulate
from bipv.scene import Building, build_scene

HK = GeoLocation(22.3, 114.2)


def main():
    low = Building("low", box(0, 0, 20, 20), 10.0)
    dates = [dt.date(2023, m, 15) for m in range(1, 13)]
    weather = synthetic.weather_for_dates(HK, dates)
    twin = simulate(build_scene([low], HK), weather, dates)
    for height, gap in ((25, 30), (40, 20), (60, 15)):
        west = Building("west", box(-gap - 20, -10, -gap, 30), float(height))
        occ = simulate(build_scene([low, west], HK), weather, dates)
        bo = next(b for b in occ.buildings if b.building_id == "low")
        bt = twin.buildings[0]
        loss = 1 - (bo.roof_kwh + bo.facade_kwh) / (bt.roof_kwh + bt.facade_kwh)
        tail = total = 0.0
        for do, dw in zip(occ.days, twin.days):
            lost = dw.building_energy_series("low", 60) - do.building_energy_series("low", 60)
            total += lost.sum()
            tail += lost[-2:].sum()
        print(f"neighbour {height:3d} m at {gap:2d} m: annual loss {loss:6.2%}, "
              f"{tail / total:6.1%} of it in the last two hours")
    print(f"\nunoccluded twin: {twin.buildings[0].roof_kwh:.0f} kWh roof, "
          f"{twin.buildings[0].facade_kwh:.0f} kWh facades over the 12 days")


if __name__ == "__main__":
    main()
