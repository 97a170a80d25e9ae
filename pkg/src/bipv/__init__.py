"""Facade and rooftop PV potential from building footprints.

Shadows of flat-roofed prism buildings are cast analytically for each
instant of a day, every roof and facade is partitioned into patches with a
uniform shade history, and plane-of-array irradiance is converted to PV
energy and rolled up per building and region.
"""

__version__ = "0.1.0"

from .ephemeris import DayWindow, GeoLocation, SunSample, day_window, sun_position, timeline
from .errors import BIPVError, BIPVIOError, InvariantError, ValidationError
from .pipeline import RunSettings, Simulation, simulate, simulate_day
from .pvmodel import PVConfig
from .scene import Building, Facade, Scene, build_scene

__all__ = [
    "Building", "BIPVError", "BIPVIOError", "DayWindow", "Facade", "GeoLocation",
    "InvariantError", "PVConfig", "RunSettings", "Scene", "Simulation", "SunSample",
    "ValidationError", "build_scene", "day_window", "simulate", "simulate_day",
    "sun_position", "timeline", "__version__",
]
