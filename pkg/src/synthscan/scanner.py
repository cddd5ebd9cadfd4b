"""Survey execution: pulse enumeration, beam sampling and point generation.

A pulse sweeps the angular grid (azimuth-major, elevation fastest). Its beam
cone is sampled by concentric subray rings; every subray walks the scene
front to back, passes through transmissive parts, and the nearest opaque
return inside max_range becomes the emitted point. Range noise is keyed per
pulse, so output is a pure function of (scene, survey, seed) no matter how
many threads run the kernels.

simulate_pulse is the scalar reference path; simulate_leg drives the
compiled kernel over the same arithmetic and produces identical bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .geometry import Bvh, Ray
from .pointcloud import LabeledPoint, PointCloud
from .rng import range_noise
from .scene import Scene
from .survey import Leg, ScannerSettings, Survey, azimuth_steps, elevation_steps

SCAN_T_MIN = 1e-6   # m; suppresses zero-range self-returns at the aperture
CHUNK = 1 << 18     # pulses per kernel launch; fixed so chunking never
                    # depends on thread count

OPAQUE = "opaque"
TRANSMISSIVE = "transmissive"


@dataclass(frozen=True)
class Pulse:
    leg_index: int
    azimuth_index: int
    elevation_index: int
    direction: np.ndarray  # unit central direction


@dataclass(frozen=True)
class SubrayPattern:
    """Beam-cone sample offsets: (angle from axis, azimuth about axis) rad."""
    offsets: np.ndarray  # (n, 2)

    def __len__(self) -> int:
        return int(self.offsets.shape[0])


def subray_pattern(divergence_mrad: float, quality: int) -> SubrayPattern:
    """Concentric-ring beam sampling.

    Ring i of quality q sits at i * (divergence/2)/(q-1) off axis and holds
    round(2*pi*i) subrays, which keeps the angular spacing between neighbors
    roughly equal to the ring spacing. quality 1 (or zero divergence) is the
    bare axial ray.
    """
    if quality < 1:
        raise ValueError("beam sample quality must be >= 1")
    if divergence_mrad < 0:
        raise ValueError("beam divergence must be >= 0")
    if quality == 1 or divergence_mrad == 0.0:
        return SubrayPattern(np.zeros((1, 2), dtype=np.float64))
    half_angle = divergence_mrad * 1e-3 / 2.0
    ring_step = half_angle / (quality - 1)
    offsets = [(0.0, 0.0)]
    for ring in range(1, quality):
        n = max(1, round(2.0 * math.pi * ring))
        for k in range(n):
            offsets.append((ring * ring_step, 2.0 * math.pi * k / n))
    return SubrayPattern(np.asarray(offsets, dtype=np.float64))


def grid_angles(settings: ScannerSettings):
    """Azimuth and elevation angles (radians) of the pulse grid."""
    n_az = azimuth_steps(settings)
    n_el = elevation_steps(settings)
    az = np.radians(settings.horiz_start + np.arange(n_az) * settings.horiz_res)
    el = np.radians(settings.vert_start + np.arange(n_el) * settings.vert_res)
    return az, el


def pulse_grid(settings: ScannerSettings, leg_index: int = 0) -> Iterator[Pulse]:
    """All pulses of the grid in emission order (azimuth-major)."""
    az, el = grid_angles(settings)
    cos_az, sin_az = np.cos(az), np.sin(az)
    cos_el, sin_el = np.cos(el), np.sin(el)
    for i in range(az.shape[0]):
        for j in range(el.shape[0]):
            direction = np.array([cos_el[j] * cos_az[i],
                                  cos_el[j] * sin_az[i],
                                  sin_el[j]])
            yield Pulse(leg_index=leg_index, azimuth_index=i,
                        elevation_index=j, direction=direction)


def pulse_count(settings: ScannerSettings) -> int:
    return azimuth_steps(settings) * elevation_steps(settings)


@dataclass
class ScanGeometry:
    """Scene acceleration data plus per-part scan attributes."""
    bvh: Bvh
    tri_part: np.ndarray      # original triangle id -> part index
    part_labels: np.ndarray   # (P,) int32 class labels
    part_colors: np.ndarray   # (P, 3) uint8
    part_opaque: np.ndarray   # (P,) bool; False = transmissive

    @classmethod
    def from_scene(cls, scene: Scene, transmissive: tuple[int, ...] = (),
                   leaf_size: int = 8) -> "ScanGeometry":
        if 0 in transmissive:
            raise ValueError("the ground plane (part 0) is always opaque")
        v0, v1, v2, part = scene.triangle_arrays()
        bvh = Bvh.from_arrays(v0, v1, v2, part, leaf_size=leaf_size)
        n_parts = len(scene.parts)
        bad = [p for p in transmissive if not 0 <= p < n_parts]
        if bad:
            raise ValueError(f"no such part(s): {bad}")
        opaque = np.ones(n_parts, dtype=bool)
        for p in transmissive:
            opaque[p] = False
        return cls(bvh=bvh, tri_part=part,
                   part_labels=scene.part_labels(),
                   part_colors=scene.part_colors(),
                   part_opaque=opaque)

    def slot_opacity(self) -> np.ndarray:
        """Opacity flags in the BVH's permuted triangle order."""
        return self.part_opaque[self.bvh.tri_part].astype(np.uint8)


def _subray_direction(direction: np.ndarray, ca: float, sa: float,
                      cb: float, sb: float):
    """Rotate the central direction by one pattern offset. Expression-for-
    expression the same as the compiled kernel's frame math."""
    dx, dy, dz = float(direction[0]), float(direction[1]), float(direction[2])
    h = math.sqrt(dx * dx + dy * dy)
    if h < 1e-12:
        ux, uy, uz = 1.0, 0.0, 0.0
    else:
        ux = -dy / h
        uy = dx / h
        uz = 0.0
    vx = dy * uz - dz * uy
    vy = dz * ux - dx * uz
    vz = dx * uy - dy * ux
    rx = cb * ux + sb * vx
    ry = cb * uy + sb * vy
    rz = cb * uz + sb * vz
    return np.array([ca * dx + sa * rx, ca * dy + sa * ry, ca * dz + sa * rz])


def simulate_pulse(geometry: ScanGeometry, origin: np.ndarray, pulse: Pulse,
                   pattern: SubrayPattern, settings: ScannerSettings,
                   seed: int) -> LabeledPoint | None:
    """Scalar reference simulation of a single pulse.

    Walks the ordered hits of every subray, skips transmissive parts, keeps
    the nearest opaque return across subrays, then perturbs the range with
    the pulse-keyed Gaussian noise.
    """
    off = pattern.offsets
    cos_a, sin_a = np.cos(off[:, 0]), np.sin(off[:, 0])
    cos_b, sin_b = np.cos(off[:, 1]), np.sin(off[:, 1])
    best_t = math.inf
    best_hit = None
    best_dir = None
    for s in range(len(pattern)):
        d = _subray_direction(pulse.direction, cos_a[s], sin_a[s],
                              cos_b[s], sin_b[s])
        ray = Ray(origin, d, t_min=SCAN_T_MIN, t_max=settings.max_range)
        for hit in geometry.bvh.ordered_hits(ray):
            if not geometry.part_opaque[hit.part_index]:
                continue  # pulse passes through transmissive parts
            if hit.t < best_t:
                best_t = hit.t
                best_hit = hit
                best_dir = d
            break  # first opaque return ends this subray
    if best_hit is None:
        return None
    noise = float(range_noise(seed, pulse.leg_index, pulse.azimuth_index,
                              pulse.elevation_index, settings.range_noise_sigma))
    r = best_t + noise
    point = origin + r * best_dir
    part = best_hit.part_index
    color = geometry.part_colors[part]
    return LabeledPoint(
        float(point[0]), float(point[1]), float(point[2]),
        float(best_hit.normal[0]), float(best_hit.normal[1]), float(best_hit.normal[2]),
        int(geometry.part_labels[part]),
        int(color[0]), int(color[1]), int(color[2]))


def _set_threads(threads: int | None) -> None:
    if threads is None:
        return
    import numba

    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def simulate_leg(scene: Scene | None, survey: Survey, leg: Leg, *,
                 geometry: ScanGeometry | None = None,
                 transmissive: tuple[int, ...] = (),
                 threads: int | None = None) -> PointCloud:
    """Scan one leg; returns its cloud in pulse-grid order.

    Pass a prebuilt `geometry` to reuse the BVH across legs (simulate_survey
    does); otherwise it is built from `scene`.
    """
    from . import _kernels

    if geometry is None:
        if scene is None:
            raise ValueError("need a scene or a prebuilt geometry")
        geometry = ScanGeometry.from_scene(scene, transmissive=transmissive)
    _set_threads(threads)

    settings = survey.leg_settings(leg)
    az, el = grid_angles(settings)
    cos_az, sin_az = np.cos(az), np.sin(az)
    cos_el, sin_el = np.cos(el), np.sin(el)
    pattern = subray_pattern(settings.beam_divergence, settings.beam_sample_quality)
    off = pattern.offsets
    cos_a, sin_a = np.cos(off[:, 0]), np.sin(off[:, 0])
    cos_b, sin_b = np.cos(off[:, 1]), np.sin(off[:, 1])

    bvh = geometry.bvh
    opaque = geometry.slot_opacity()
    origin = np.asarray(leg.position, dtype=np.float64)
    ox, oy, oz = float(origin[0]), float(origin[1]), float(origin[2])
    n_el = el.shape[0]
    n_pulses = az.shape[0] * n_el

    pieces = []
    for c0 in range(0, n_pulses, CHUNK):
        c1 = min(c0 + CHUNK, n_pulses)
        size = c1 - c0
        out_hit = np.zeros(size, dtype=np.uint8)
        out_t = np.empty(size, dtype=np.float64)
        out_tri = np.empty(size, dtype=np.int32)
        out_dir = np.empty((size, 3), dtype=np.float64)
        out_nrm = np.empty((size, 3), dtype=np.float64)
        _kernels.scan_chunk(
            c0, c1, n_el,
            cos_az, sin_az, cos_el, sin_el,
            cos_a, sin_a, cos_b, sin_b,
            ox, oy, oz, SCAN_T_MIN, settings.max_range,
            bvh.bb_min, bvh.bb_max, bvh.left, bvh.right, bvh.start, bvh.count,
            bvh.v0p, bvh.e1p, bvh.e2p, bvh.tri_id, opaque,
            out_hit, out_t, out_tri, out_dir, out_nrm)
        idx = np.nonzero(out_hit)[0]
        if idx.size == 0:
            continue
        p = c0 + idx
        az_idx = p // n_el
        el_idx = p - az_idx * n_el
        noise = range_noise(survey.seed, leg.index, az_idx, el_idx,
                            settings.range_noise_sigma)
        r = out_t[idx] + noise
        pts = origin[None, :] + r[:, None] * out_dir[idx]
        parts = geometry.tri_part[out_tri[idx]]
        pieces.append((pts, out_nrm[idx],
                       geometry.part_labels[parts],
                       geometry.part_colors[parts]))

    provenance = f"survey:{survey.name} leg:{leg.index}"
    if not pieces:
        return PointCloud.empty(provenance)
    return PointCloud(
        xyz=np.concatenate([p[0] for p in pieces]),
        normals=np.concatenate([p[1] for p in pieces]),
        labels=np.concatenate([p[2] for p in pieces]).astype(np.int32),
        colors=np.concatenate([p[3] for p in pieces]).astype(np.uint8),
        provenance=provenance)


def simulate_survey(scene: Scene, survey: Survey, *,
                    transmissive: tuple[int, ...] = (),
                    threads: int | None = None) -> list[PointCloud]:
    """Scan every leg in order; one cloud per leg (empty clouds retained)."""
    geometry = ScanGeometry.from_scene(scene, transmissive=transmissive)
    return [simulate_leg(None, survey, leg, geometry=geometry, threads=threads)
            for leg in survey.legs]
