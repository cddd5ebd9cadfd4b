"""Triangle geometry: ray intersection, bounding boxes and a BVH.

Coordinates are metric (meters); ray directions are unit vectors. A built
Bvh is immutable and safe to query from multiple threads. Batch queries are
served by compiled kernels (see _kernels); the scalar query paths here use
the exact same arithmetic, so both produce bit-identical distances.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyScene

log = logging.getLogger(__name__)

DET_EPS = 1e-12          # determinant cutoff; rays closer to parallel miss
DEGENERATE_AREA = 1e-12  # m^2; smaller triangles are dropped at ingestion
HIT_MERGE_EPS = 1e-7     # m; ordered hits closer than this collapse into one
DEFAULT_LEAF_SIZE = 8
_INV_CLAMP = 1e30        # stands in for 1/0 in slab tests (conservative)
_MAX_ID = 2**31 - 1


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.float64) / n


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def contains_point(self, p: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(p >= self.min - tol) and np.all(p <= self.max + tol))

    def contains_box(self, other: "Aabb", tol: float = 1e-12) -> bool:
        return bool(np.all(other.min >= self.min - tol) and np.all(other.max <= self.max + tol))

    @property
    def center(self) -> np.ndarray:
        return (self.min + self.max) * 0.5

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min


@dataclass(frozen=True)
class Triangle:
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    part_index: int = 0

    def aabb(self) -> Aabb:
        lo = np.minimum(np.minimum(self.v0, self.v1), self.v2)
        hi = np.maximum(np.maximum(self.v0, self.v1), self.v2)
        return Aabb(lo, hi)

    def area(self) -> float:
        e1 = self.v1 - self.v0
        e2 = self.v2 - self.v0
        c = np.cross(e1, e2)
        return 0.5 * float(math.sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]))


@dataclass(frozen=True)
class Ray:
    """Half-open ray; `direction` is expected unit-length."""
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.t_min < self.t_max:
            raise ValueError(f"need 0 <= t_min < t_max, got [{self.t_min}, {self.t_max}]")


@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray
    normal: np.ndarray
    triangle_id: int
    part_index: int


def _moller_trumbore(ox, oy, oz, dx, dy, dz,
                     ax, ay, az, e1x, e1y, e1z, e2x, e2y, e2z,
                     t_min, t_max):
    """Scalar ray/triangle distance; NaN on miss. Closed triangle: edge and
    vertex grazing count as hits. Mirrored verbatim in _kernels."""
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < DET_EPS:
        return math.nan
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return math.nan
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return math.nan
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < t_min or t > t_max:
        return math.nan
    return t


def _oriented_normal(e1x, e1y, e1z, e2x, e2y, e2z, dx, dy, dz) -> np.ndarray:
    """Unit geometric normal of the triangle, flipped to face the ray origin.
    Mirrored in _kernels."""
    nx = e1y * e2z - e1z * e2y
    ny = e1z * e2x - e1x * e2z
    nz = e1x * e2y - e1y * e2x
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    nx = nx / norm
    ny = ny / norm
    nz = nz / norm
    if nx * dx + ny * dy + nz * dz > 0.0:
        nx = -nx
        ny = -ny
        nz = -nz
    return np.array([nx, ny, nz], dtype=np.float64)


def ray_triangle_intersect(ray: Ray, tri: Triangle, triangle_id: int = 0) -> Hit | None:
    """Intersect one ray with one triangle.

    Returns the hit with the geometric normal oriented toward the ray origin,
    or None when the ray misses or t falls outside [t_min, t_max].
    """
    o, d = ray.origin, ray.direction
    e1 = tri.v1 - tri.v0
    e2 = tri.v2 - tri.v0
    t = _moller_trumbore(o[0], o[1], o[2], d[0], d[1], d[2],
                         tri.v0[0], tri.v0[1], tri.v0[2],
                         e1[0], e1[1], e1[2], e2[0], e2[1], e2[2],
                         ray.t_min, ray.t_max)
    if math.isnan(t):
        return None
    point = o + t * d
    normal = _oriented_normal(e1[0], e1[1], e1[2], e2[0], e2[1], e2[2],
                              d[0], d[1], d[2])
    return Hit(t=t, point=point, normal=normal,
               triangle_id=triangle_id, part_index=tri.part_index)


def _slab_interval(o, inv, bmin, bmax, lo, hi):
    """Ray/AABB slab overlap of [lo, hi]; returns (ok, entry)."""
    for k in range(3):
        t1 = (bmin[k] - o[k]) * inv[k]
        t2 = (bmax[k] - o[k]) * inv[k]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > lo:
            lo = t1
        if t2 < hi:
            hi = t2
        if lo > hi:
            return False, lo
    return True, lo


def _inv_dir(d: np.ndarray) -> np.ndarray:
    inv = np.empty(3, dtype=np.float64)
    for k in range(3):
        inv[k] = 1.0 / d[k] if abs(d[k]) > 1e-300 else _INV_CLAMP
    return inv


class Bvh:
    """Binary BVH over a triangle soup, median split on the longest axis.

    Node arrays are preorder; leaves reference a contiguous slot range of the
    permuted triangle arrays. `tri_id[slot]` recovers the original triangle
    index, which is the tie-break key for equal-distance hits.
    """

    def __init__(self, bb_min, bb_max, left, right, start, count,
                 v0p, e1p, e2p, tri_id, tri_part):
        self.bb_min = bb_min
        self.bb_max = bb_max
        self.left = left
        self.right = right
        self.start = start
        self.count = count
        self.v0p = v0p
        self.e1p = e1p
        self.e2p = e2p
        self.tri_id = tri_id
        self.tri_part = tri_part

    # -- construction ------------------------------------------------------

    @staticmethod
    def from_arrays(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray,
                    part_index: np.ndarray | None = None,
                    leaf_size: int = DEFAULT_LEAF_SIZE) -> "Bvh":
        v0 = np.ascontiguousarray(v0, dtype=np.float64)
        v1 = np.ascontiguousarray(v1, dtype=np.float64)
        v2 = np.ascontiguousarray(v2, dtype=np.float64)
        m = v0.shape[0]
        if m == 0:
            raise EmptyScene("cannot build a BVH over zero triangles")
        if part_index is None:
            part_index = np.zeros(m, dtype=np.int32)
        part_index = np.asarray(part_index, dtype=np.int32)

        tmin = np.minimum(np.minimum(v0, v1), v2)
        tmax = np.maximum(np.maximum(v0, v1), v2)
        cent = (tmin + tmax) * 0.5

        bb_min: list[np.ndarray] = []
        bb_max: list[np.ndarray] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        count: list[int] = []
        order: list[int] = []

        def add_node(idxs: np.ndarray) -> int:
            node = len(bb_min)
            bb_min.append(tmin[idxs].min(axis=0))
            bb_max.append(tmax[idxs].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(0)
            count.append(0)
            if idxs.size <= leaf_size:
                start[node] = len(order)
                count[node] = idxs.size
                order.extend(idxs.tolist())
            else:
                axis = int(np.argmax(bb_max[node] - bb_min[node]))
                idxs = idxs[np.argsort(cent[idxs, axis], kind="stable")]
                mid = idxs.size // 2
                left[node] = add_node(idxs[:mid])
                right[node] = add_node(idxs[mid:])
            return node

        add_node(np.arange(m, dtype=np.int64))
        perm = np.asarray(order, dtype=np.int32)
        return Bvh(
            np.ascontiguousarray(bb_min, dtype=np.float64),
            np.ascontiguousarray(bb_max, dtype=np.float64),
            np.asarray(left, dtype=np.int32),
            np.asarray(right, dtype=np.int32),
            np.asarray(start, dtype=np.int32),
            np.asarray(count, dtype=np.int32),
            np.ascontiguousarray(v0[perm]),
            np.ascontiguousarray(v1[perm] - v0[perm]),
            np.ascontiguousarray(v2[perm] - v0[perm]),
            perm,
            np.ascontiguousarray(part_index[perm]),
        )

    @property
    def n_triangles(self) -> int:
        return int(self.tri_id.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.left.shape[0])

    def aabb(self) -> Aabb:
        return Aabb(self.bb_min[0].copy(), self.bb_max[0].copy())

    # -- scalar queries ----------------------------------------------------

    def _hit_from_slot(self, ray: Ray, t: float, slot: int) -> Hit:
        o, d = ray.origin, ray.direction
        e1 = self.e1p[slot]
        e2 = self.e2p[slot]
        normal = _oriented_normal(e1[0], e1[1], e1[2], e2[0], e2[1], e2[2],
                                  d[0], d[1], d[2])
        return Hit(t=t, point=o + t * d, normal=normal,
                   triangle_id=int(self.tri_id[slot]),
                   part_index=int(self.tri_part[slot]))

    def first_hit(self, ray: Ray) -> Hit | None:
        """Nearest intersection; equal distances resolved to the smallest
        original triangle id."""
        o, d = ray.origin, ray.direction
        inv = _inv_dir(d)
        best_t = math.inf
        best_id = _MAX_ID
        best_slot = -1
        stack = [0]
        while stack:
            node = stack.pop()
            limit = best_t if best_t < ray.t_max else ray.t_max
            ok, _ = _slab_interval(o, inv, self.bb_min[node], self.bb_max[node],
                                   ray.t_min, limit)
            if not ok:
                continue
            if self.count[node] > 0:
                s0 = self.start[node]
                for s in range(s0, s0 + self.count[node]):
                    t = _moller_trumbore(
                        o[0], o[1], o[2], d[0], d[1], d[2],
                        self.v0p[s, 0], self.v0p[s, 1], self.v0p[s, 2],
                        self.e1p[s, 0], self.e1p[s, 1], self.e1p[s, 2],
                        self.e2p[s, 0], self.e2p[s, 1], self.e2p[s, 2],
                        ray.t_min, ray.t_max)
                    if math.isnan(t):
                        continue
                    oid = int(self.tri_id[s])
                    if t < best_t or (t == best_t and oid < best_id):
                        best_t = t
                        best_id = oid
                        best_slot = s
            else:
                stack.append(int(self.left[node]))
                stack.append(int(self.right[node]))
        if best_slot < 0:
            return None
        return self._hit_from_slot(ray, best_t, best_slot)

    def ordered_hits(self, ray: Ray) -> list[Hit]:
        """All intersections sorted by ascending t. Hits closer together than
        HIT_MERGE_EPS collapse into one, keeping the smallest triangle id."""
        o, d = ray.origin, ray.direction
        inv = _inv_dir(d)
        found: list[tuple[float, int, int]] = []
        stack = [0]
        while stack:
            node = stack.pop()
            ok, _ = _slab_interval(o, inv, self.bb_min[node], self.bb_max[node],
                                   ray.t_min, ray.t_max)
            if not ok:
                continue
            if self.count[node] > 0:
                s0 = self.start[node]
                for s in range(s0, s0 + self.count[node]):
                    t = _moller_trumbore(
                        o[0], o[1], o[2], d[0], d[1], d[2],
                        self.v0p[s, 0], self.v0p[s, 1], self.v0p[s, 2],
                        self.e1p[s, 0], self.e1p[s, 1], self.e1p[s, 2],
                        self.e2p[s, 0], self.e2p[s, 1], self.e2p[s, 2],
                        ray.t_min, ray.t_max)
                    if not math.isnan(t):
                        found.append((t, int(self.tri_id[s]), s))
            else:
                stack.append(int(self.left[node]))
                stack.append(int(self.right[node]))
        found.sort(key=lambda h: (h[0], h[1]))
        merged: list[tuple[float, int, int]] = []
        for t, oid, s in found:
            if merged and t - merged[-1][0] < HIT_MERGE_EPS:
                if oid < merged[-1][1]:
                    merged[-1] = (merged[-1][0], oid, s)
            else:
                merged.append((t, oid, s))
        return [self._hit_from_slot(ray, t, s) for t, _, s in merged]

    # -- batch queries (compiled) -------------------------------------------

    def first_hits(self, origins: np.ndarray, directions: np.ndarray,
                   t_min: float = 0.0, t_max: float = math.inf,
                   opaque: np.ndarray | None = None):
        """Vector query: nearest hit per ray.

        Returns (t, triangle_id) arrays; misses hold (inf, -1). `opaque`
        optionally masks triangles (by original id) out of consideration.
        """
        from . import _kernels

        origins = np.ascontiguousarray(origins, dtype=np.float64)
        directions = np.ascontiguousarray(directions, dtype=np.float64)
        mask = self._opacity_slots(opaque)
        n = origins.shape[0]
        out_t = np.empty(n, dtype=np.float64)
        out_id = np.empty(n, dtype=np.int32)
        _kernels.first_hit_batch(
            origins, directions, float(t_min), float(t_max),
            self.bb_min, self.bb_max, self.left, self.right,
            self.start, self.count,
            self.v0p, self.e1p, self.e2p, self.tri_id, mask,
            out_t, out_id)
        return out_t, out_id

    def _opacity_slots(self, opaque: np.ndarray | None) -> np.ndarray:
        """Per-slot opacity mask in permuted triangle order."""
        if opaque is None:
            return np.ones(self.n_triangles, dtype=np.uint8)
        opaque = np.asarray(opaque)
        return opaque[self.tri_id].astype(np.uint8)


def bvh_build(triangles: list[Triangle], leaf_size: int = DEFAULT_LEAF_SIZE) -> Bvh:
    """Build a BVH from a triangle list. Deterministic for a fixed input order."""
    if not triangles:
        raise EmptyScene("triangle list is empty")
    v0 = np.array([t.v0 for t in triangles], dtype=np.float64)
    v1 = np.array([t.v1 for t in triangles], dtype=np.float64)
    v2 = np.array([t.v2 for t in triangles], dtype=np.float64)
    part = np.array([t.part_index for t in triangles], dtype=np.int32)
    return Bvh.from_arrays(v0, v1, v2, part, leaf_size=leaf_size)


def bvh_first_hit(bvh: Bvh, ray: Ray) -> Hit | None:
    return bvh.first_hit(ray)


def bvh_ordered_hits(bvh: Bvh, ray: Ray) -> list[Hit]:
    return bvh.ordered_hits(ray)


def brute_force_first_hits(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray,
                           origins: np.ndarray, directions: np.ndarray,
                           t_min: float = 0.0, t_max: float = math.inf):
    """Linear-scan reference: nearest hit of each ray against every triangle.

    Same arithmetic as the BVH path, so agreement is exact; used as the
    all-triangles baseline for correctness and timing comparisons.
    """
    e1 = np.asarray(v1, dtype=np.float64) - np.asarray(v0, dtype=np.float64)
    e2 = np.asarray(v2, dtype=np.float64) - np.asarray(v0, dtype=np.float64)
    a = np.asarray(v0, dtype=np.float64)
    n = origins.shape[0]
    out_t = np.full(n, np.inf, dtype=np.float64)
    out_id = np.full(n, -1, dtype=np.int32)
    ids = np.arange(e1.shape[0])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(n):
            ox, oy, oz = origins[k]
            dx, dy, dz = directions[k]
            px = dy * e2[:, 2] - dz * e2[:, 1]
            py = dz * e2[:, 0] - dx * e2[:, 2]
            pz = dx * e2[:, 1] - dy * e2[:, 0]
            det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
            inv = 1.0 / det
            tx = ox - a[:, 0]
            ty = oy - a[:, 1]
            tz = oz - a[:, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            qx = ty * e1[:, 2] - tz * e1[:, 1]
            qy = tz * e1[:, 0] - tx * e1[:, 2]
            qz = tx * e1[:, 1] - ty * e1[:, 0]
            v = (dx * qx + dy * qy + dz * qz) * inv
            t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
            valid = ((np.abs(det) >= DET_EPS)
                     & (u >= 0.0) & (u <= 1.0)
                     & (v >= 0.0) & (u + v <= 1.0)
                     & (t >= t_min) & (t <= t_max))
            if not valid.any():
                continue
            tv = np.where(valid, t, np.inf)
            tbest = tv.min()
            out_t[k] = tbest
            out_id[k] = ids[tv == tbest].min()
    return out_t, out_id


def check_bvh_containment(bvh: Bvh) -> bool:
    """Exhaustive descent: every node box holds its children and triangles."""
    tmin = np.minimum(np.minimum(bvh.v0p, bvh.v0p + bvh.e1p), bvh.v0p + bvh.e2p)
    tmax = np.maximum(np.maximum(bvh.v0p, bvh.v0p + bvh.e1p), bvh.v0p + bvh.e2p)
    seen = np.zeros(bvh.n_triangles, dtype=bool)

    def descend(node: int) -> bool:
        lo, hi = bvh.bb_min[node], bvh.bb_max[node]
        if bvh.count[node] > 0:
            s0 = bvh.start[node]
            for s in range(s0, s0 + bvh.count[node]):
                if seen[s]:
                    return False
                seen[s] = True
                if (tmin[s] < lo - 1e-12).any() or (tmax[s] > hi + 1e-12).any():
                    return False
            return True
        for child in (int(bvh.left[node]), int(bvh.right[node])):
            if (bvh.bb_min[child] < lo - 1e-12).any() or (bvh.bb_max[child] > hi + 1e-12).any():
                return False
            if not descend(child):
                return False
        return True

    return descend(0) and bool(seen.all())
