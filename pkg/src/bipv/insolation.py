"""Overlay shadows over a day's timeline and partition surfaces into patches.

Each patch is a cell of the arrangement formed by the per-instant shadow
unions on one surface, so its shade history is uniform: bit ``k`` of its
mask is set iff the cell is inside the instant-``k`` shadow.
"""

from __future__ import annotations

import datetime as dt
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely
from shapely.geometry.base import BaseGeometry

from . import geometry as geo
from .ephemeris import GeoLocation, SunSample, sun_positions
from .errors import SunBelowHorizonError, ValidationError
from .scene import Scene
from .shadow import SurfaceShadow, surface_refs, surface_shadow

log = logging.getLogger(__name__)

WHOLE = "whole"


@dataclass(frozen=True)
class SurfacePatch:
    surface_ref: str
    building_id: str
    kind: str
    polygon: BaseGeometry
    area_m2: float
    shade_mask: tuple[int, ...]
    flags: frozenset = frozenset()
    diagnostics: tuple[str, ...] = ()

    @property
    def overlap_count(self) -> int:
        return int(sum(self.shade_mask))

    @property
    def mask_string(self) -> str:
        return "".join(str(b) for b in self.shade_mask)


@dataclass(frozen=True)
class ExposureResult:
    patch: SurfacePatch
    t_p: int
    t_s: int


def overlay(surface: BaseGeometry, shadows: Sequence) -> list[tuple[BaseGeometry, tuple[int, ...]]]:
    """Arrangement of ``surface`` induced by a sequence of shadows.

    ``shadows[k]`` is a polygon, ``None``/empty (no shadow) or ``"whole"``
    (entire surface shaded). Returns ``(geometry, mask)`` pairs, one per
    distinct mask; pieces with equal masks are kept together. Shadow slivers
    below ``SLIVER_AREA`` are left on the unshaded side so that cell areas
    always add up to the surface area.
    """
    cells: list[tuple[BaseGeometry, list[int]]] = [(surface, [])]
    for s in shadows:
        if isinstance(s, str):
            if s != WHOLE:
                raise ValueError(f"unknown shadow marker {s!r}")
            for _, m in cells:
                m.append(1)
            continue
        if s is None or s.is_empty:
            for _, m in cells:
                m.append(0)
            continue
        nxt = []
        for g, m in cells:
            if not shapely.intersects(g, s):
                nxt.append((g, m + [0]))
                continue
            inside, _ = geo.split_slivers(geo.intersection(g, s, cull=False))
            if inside.is_empty:
                nxt.append((g, m + [0]))
                continue
            outside = geo.difference(g, inside, cull=False)
            if outside.is_empty or outside.area < geo.SLIVER_AREA:
                nxt.append((g, m + [1]))
                continue
            nxt.append((inside, m + [1]))
            nxt.append((outside, m + [0]))
        cells = nxt
    return [(g, tuple(m)) for g, m in cells]


def _merge_one_bit(cells):
    """Lossy simplification: fold each cell into a touching larger cell whose
    mask differs in exactly one bit."""
    cells = sorted(cells, key=lambda c: -c[0].area)
    merged: list[list] = []
    for g, m in cells:
        for tgt in merged:
            diff = sum(a != b for a, b in zip(tgt[1], m))
            if diff == 0 or (diff == 1 and shapely.touches(tgt[0], g)):
                tgt[0] = geo.union_all([tgt[0], g])
                break
        else:
            merged.append([g, m])
    return [(g, m) for g, m in merged]


def _explode(ref, bid, kind, cells, flags=frozenset(), diagnostics=()):
    out = []
    for g, m in cells:
        for part in shapely.get_parts(g):
            if part.area <= 0.0:
                continue
            out.append(SurfacePatch(ref, bid, kind, part, float(part.area), m, flags, diagnostics))

    def key(p):
        rp = p.polygon.representative_point()
        return (p.shade_mask, round(rp.x, 6), round(rp.y, 6))
    out.sort(key=key)
    return out


def _surface_polygon(scene: Scene, ref: str):
    kind, _, key = ref.partition(":")
    if kind == "roof":
        return kind, key, scene.building(key).footprint
    bid = key.rsplit("/", 1)[0]
    f = next(f for f in scene.facades_of(bid) if f.id == key)
    return kind, bid, f.rectangle


def partition_surface(scene: Scene, ref: str, suns: Sequence[SunSample],
                      lossy: bool = False) -> list[SurfacePatch]:
    """Patches of one surface over the instants in ``suns``.

    Any failure degrades to a single whole-surface patch flagged
    ``"unpartitioned"`` with an all-shaded mask.
    """
    kind, bid, poly = _surface_polygon(scene, ref)
    try:
        shadows = []
        for sun in suns:
            ss: SurfaceShadow = surface_shadow(scene, ref, sun)
            if "failed" in ss.flags:
                raise RuntimeError("; ".join(ss.diagnostics))
            shadows.append(WHOLE if ss.whole else ss.union)
        cells = overlay(poly, shadows)
        if lossy:
            cells = _merge_one_bit(cells)
        return _explode(ref, bid, kind, cells)
    except Exception as exc:
        msg = f"{ref}: {type(exc).__name__}: {exc}"
        log.warning("surface left unpartitioned: %s", msg)
        return [SurfacePatch(ref, bid, kind, poly, float(poly.area), (1,) * len(suns),
                             frozenset({"unpartitioned"}), (msg,))]


_WORKER: dict = {}


def _init_worker(scene, suns, lossy):
    _WORKER.update(scene=scene, suns=suns, lossy=lossy)


def _run_chunk(refs):
    return [partition_surface(_WORKER["scene"], r, _WORKER["suns"], _WORKER["lossy"])
            for r in refs]


def resolve_workers(workers: int) -> int:
    if workers == 0:
        return os.cpu_count() or 1
    return max(1, int(workers))


def accumulate_suns(scene: Scene, suns: Sequence[SunSample], workers: int = 1,
                    lossy: bool = False) -> dict[str, list[SurfacePatch]]:
    """Partition every roof and facade of ``scene`` for the given sun samples."""
    if not suns:
        raise ValidationError("timeline is empty")
    for s in suns:
        if s.altitude_deg <= 0.0:
            raise SunBelowHorizonError(f"sun below horizon at {s.timestamp}")
    refs = surface_refs(scene)
    workers = resolve_workers(workers)
    if workers == 1 or len(refs) < 2 * workers:
        results = [partition_surface(scene, r, suns, lossy) for r in refs]
    else:
        n = max(1, len(refs) // (4 * workers))
        chunks = [refs[i:i + n] for i in range(0, len(refs), n)]
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(scene, list(suns), lossy)) as pool:
            results = [p for chunk in pool.map(_run_chunk, chunks) for p in chunk]
    return dict(zip(refs, results))


def accumulate_shadows(scene: Scene, timeline: Sequence[dt.datetime], loc: GeoLocation,
                       workers: int = 1, lossy: bool = False) -> dict[str, list[SurfacePatch]]:
    """Per-surface patches for ``timeline`` at ``loc``.

    Args:
        scene: city model.
        timeline: non-empty instants, all with the sun above the horizon.
        loc: location used for the solar ephemeris.
        workers: process count; 0 means one per CPU.
        lossy: also merge touching patches whose masks differ in one bit.
    """
    return accumulate_suns(scene, sun_positions(timeline, loc), workers, lossy)


def exposure(patch: SurfacePatch, interval_minutes: int, window_minutes: int) -> ExposureResult:
    """Shaded (``t_p = n_p * interval``) and sunlit (``t_s = window - t_p``) minutes."""
    n = len(patch.shade_mask)
    if window_minutes != n * interval_minutes:
        raise ValidationError(f"window of {window_minutes} min does not match "
                              f"{n} instants x {interval_minutes} min")
    t_p = patch.overlap_count * int(interval_minutes)
    return ExposureResult(patch, t_p, int(window_minutes) - t_p)


def shade_fraction(patches, instant_index: int) -> dict[str, float]:
    """Area-weighted shaded fraction per surface class at one instant.

    ``patches`` is an iterable of patches or a ``{ref: [patch, ...]}`` mapping.
    A class without any area reports 0.0.
    """
    if isinstance(patches, dict):
        patches = [p for ps in patches.values() for p in ps]
    shaded = {"roof": 0.0, "facade": 0.0}
    total = {"roof": 0.0, "facade": 0.0}
    for p in patches:
        total[p.kind] += p.area_m2
        if p.shade_mask[instant_index]:
            shaded[p.kind] += p.area_m2
    return {k: (shaded[k] / total[k] if total[k] > 0 else 0.0) for k in total}


def mask_matrix(patches: Sequence[SurfacePatch]) -> np.ndarray:
    """``(n_patches, n_instants)`` boolean shade matrix."""
    return np.array([p.shade_mask for p in patches], dtype=bool).reshape(len(patches), -1)
