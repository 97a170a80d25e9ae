"""PV conversion: linear (Faiman) cell temperature and a temperature-derated
efficiency, with a fixed derate for facade-mounted modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .ephemeris import GeoLocation
from .errors import ValidationError
from .irradiance import DEFAULT_ALBEDO, SurfaceOrientation
from .scene import Facade

ROOF = "roof"
FACADE = "facade"


@dataclass(frozen=True)
class PVConfig:
    eta_stc: float = 0.20
    gamma: float = -0.004
    t_ref: float = 25.0
    facade_derate: float = 0.68
    thermal_u0: float = 25.0
    thermal_u1: float = 6.84
    rooftop_tilt_policy: str | float = "latitude"
    rooftop_azimuth_policy: str = "equator-facing"
    max_roof_tilt: float = 60.0

    def __post_init__(self):
        if not 0.0 < self.eta_stc < 1.0:
            raise ValidationError(f"eta_stc {self.eta_stc} outside (0, 1)")
        if not self.gamma < 0.0:
            raise ValidationError(f"gamma {self.gamma} must be negative")
        if not 0.0 < self.facade_derate <= 1.0:
            raise ValidationError(f"facade_derate {self.facade_derate} outside (0, 1]")
        if not self.thermal_u0 > 0.0:
            raise ValidationError(f"thermal_u0 {self.thermal_u0} must be positive")
        if self.rooftop_azimuth_policy != "equator-facing":
            raise ValidationError(f"unknown rooftop_azimuth_policy {self.rooftop_azimuth_policy!r}")
        if self.rooftop_tilt_policy != "latitude":
            try:
                object.__setattr__(self, "rooftop_tilt_policy", float(self.rooftop_tilt_policy))
            except (TypeError, ValueError):
                raise ValidationError(
                    f"rooftop_tilt_policy must be 'latitude' or degrees, "
                    f"got {self.rooftop_tilt_policy!r}") from None

    def with_overrides(self, **kw) -> "PVConfig":
        """Copy with string or numeric overrides (unknown keys rejected)."""
        known = {f.name: f for f in fields(self)}
        clean = {}
        for k, v in kw.items():
            if k not in known:
                raise ValidationError(f"unknown PV setting {k!r}")
            if isinstance(v, str) and k not in ("rooftop_tilt_policy", "rooftop_azimuth_policy"):
                v = float(v)
            clean[k] = v
        return replace(self, **clean)


@dataclass(frozen=True)
class PowerSample:
    timestamp: object
    p_unit: float
    surface_class: str


def cell_temperature(poa_total, temp_air, wind, cfg: PVConfig = PVConfig()):
    """Steady-state cell temperature ``T_air + POA / (u0 + u1 * wind)``."""
    return np.asarray(temp_air) + np.asarray(poa_total) / (
        cfg.thermal_u0 + cfg.thermal_u1 * np.asarray(wind))


def unit_power(poa_total, t_cell, surface_class: str, cfg: PVConfig = PVConfig()):
    """DC output per square metre of module, W/m2 (never negative)."""
    if surface_class not in (ROOF, FACADE):
        raise ValidationError(f"unknown surface class {surface_class!r}")
    derate = cfg.facade_derate if surface_class == FACADE else 1.0
    p = (np.asarray(poa_total, dtype=float) * cfg.eta_stc
         * (1.0 + cfg.gamma * (np.asarray(t_cell) - cfg.t_ref)) * derate)
    p = np.maximum(p, 0.0)
    return float(p) if p.ndim == 0 else p


def rooftop_orientation(loc: GeoLocation, cfg: PVConfig = PVConfig(),
                        albedo: float = DEFAULT_ALBEDO) -> SurfaceOrientation:
    """Equator-facing panels tilted at |latitude| (or a fixed tilt), clamped."""
    if cfg.rooftop_tilt_policy == "latitude":
        tilt = abs(loc.latitude)
    else:
        tilt = float(cfg.rooftop_tilt_policy)
    tilt = min(max(tilt, 0.0), cfg.max_roof_tilt)
    azimuth = 180.0 if loc.latitude >= 0 else 0.0
    return SurfaceOrientation(tilt, azimuth, albedo)


def facade_orientation(f: Facade | tuple[float, float],
                       albedo: float = DEFAULT_ALBEDO) -> SurfaceOrientation:
    """Vertical panel facing the facade's outward normal."""
    nx, ny = f.outward_normal if isinstance(f, Facade) else f
    return SurfaceOrientation(90.0, math.degrees(math.atan2(nx, ny)) % 360.0, albedo)
