"""Compiled ray-traversal kernels.

The triangle and normal arithmetic here mirrors geometry._moller_trumbore and
geometry._oriented_normal expression for expression. No fastmath: results must
be bit-identical to the pure-Python paths and independent of thread count.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

DET_EPS = 1e-12
INV_CLAMP = 1e30
STACK_DEPTH = 128
MAX_ID = 2**31 - 1


@njit(cache=True, inline="always")
def _inv_component(d):
    if abs(d) > 1e-300:
        return 1.0 / d
    return INV_CLAMP


@njit(cache=True, inline="always")
def _slab(ox, oy, oz, ix, iy, iz, bmin, bmax, lo, hi):
    t1 = (bmin[0] - ox) * ix
    t2 = (bmax[0] - ox) * ix
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > lo:
        lo = t1
    if t2 < hi:
        hi = t2
    if lo > hi:
        return False
    t1 = (bmin[1] - oy) * iy
    t2 = (bmax[1] - oy) * iy
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > lo:
        lo = t1
    if t2 < hi:
        hi = t2
    if lo > hi:
        return False
    t1 = (bmin[2] - oz) * iz
    t2 = (bmax[2] - oz) * iz
    if t1 > t2:
        t1, t2 = t2, t1
    if t1 > lo:
        lo = t1
    if t2 < hi:
        hi = t2
    return lo <= hi


@njit(cache=True, inline="always")
def _tri_t(ox, oy, oz, dx, dy, dz,
           ax, ay, az, e1x, e1y, e1z, e2x, e2y, e2z,
           t_min, t_max):
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


@njit(cache=True)
def _first_hit(ox, oy, oz, dx, dy, dz, t_min, t_max,
               bb_min, bb_max, left, right, start, count,
               v0p, e1p, e2p, tri_id, opaque):
    """Nearest hit over opaque slots; ties go to the smallest original id.
    Returns (t, original_id, slot); slot == -1 on miss."""
    ix = _inv_component(dx)
    iy = _inv_component(dy)
    iz = _inv_component(dz)
    best_t = math.inf
    best_id = MAX_ID
    best_slot = -1
    stack = np.empty(STACK_DEPTH, dtype=np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        limit = best_t if best_t < t_max else t_max
        if not _slab(ox, oy, oz, ix, iy, iz,
                     bb_min[node], bb_max[node], t_min, limit):
            continue
        c = count[node]
        if c > 0:
            s0 = start[node]
            for s in range(s0, s0 + c):
                if opaque[s] == 0:
                    continue
                t = _tri_t(ox, oy, oz, dx, dy, dz,
                           v0p[s, 0], v0p[s, 1], v0p[s, 2],
                           e1p[s, 0], e1p[s, 1], e1p[s, 2],
                           e2p[s, 0], e2p[s, 1], e2p[s, 2],
                           t_min, t_max)
                if math.isnan(t):
                    continue
                oid = tri_id[s]
                if t < best_t or (t == best_t and oid < best_id):
                    best_t = t
                    best_id = oid
                    best_slot = s
        else:
            stack[sp] = left[node]
            sp += 1
            stack[sp] = right[node]
            sp += 1
    return best_t, best_id, best_slot


@njit(cache=True, parallel=True)
def first_hit_batch(origins, dirs, t_min, t_max,
                    bb_min, bb_max, left, right, start, count,
                    v0p, e1p, e2p, tri_id, opaque,
                    out_t, out_id):
    for k in prange(origins.shape[0]):
        t, oid, slot = _first_hit(
            origins[k, 0], origins[k, 1], origins[k, 2],
            dirs[k, 0], dirs[k, 1], dirs[k, 2], t_min, t_max,
            bb_min, bb_max, left, right, start, count,
            v0p, e1p, e2p, tri_id, opaque)
        if slot >= 0:
            out_t[k] = t
            out_id[k] = oid
        else:
            out_t[k] = math.inf
            out_id[k] = -1


@njit(cache=True, parallel=True)
def brute_force_batch(origins, dirs, t_min, t_max,
                      v0, e1, e2, out_t, out_id):
    """Compiled linear scan, for honest BVH-vs-brute-force timing."""
    m = v0.shape[0]
    for k in prange(origins.shape[0]):
        ox = origins[k, 0]
        oy = origins[k, 1]
        oz = origins[k, 2]
        dx = dirs[k, 0]
        dy = dirs[k, 1]
        dz = dirs[k, 2]
        best_t = math.inf
        best_id = MAX_ID
        found = False
        for i in range(m):
            t = _tri_t(ox, oy, oz, dx, dy, dz,
                       v0[i, 0], v0[i, 1], v0[i, 2],
                       e1[i, 0], e1[i, 1], e1[i, 2],
                       e2[i, 0], e2[i, 1], e2[i, 2],
                       t_min, t_max)
            if math.isnan(t):
                continue
            if t < best_t or (t == best_t and i < best_id):
                best_t = t
                best_id = i
                found = True
        if found:
            out_t[k] = best_t
            out_id[k] = best_id
        else:
            out_t[k] = math.inf
            out_id[k] = -1


@njit(cache=True, parallel=True)
def scan_chunk(p0, p1, n_el,
               cos_az, sin_az, cos_el, sin_el,
               cos_a, sin_a, cos_b, sin_b,
               ox, oy, oz, t_min, max_range,
               bb_min, bb_max, left, right, start, count,
               v0p, e1p, e2p, tri_id, opaque,
               out_hit, out_t, out_tri, out_dir, out_nrm):
    """Simulate the flattened pulse range [p0, p1).

    Pulse p maps to azimuth i = p // n_el, elevation j = p % n_el
    (azimuth-major, elevation fastest). Each pulse writes only its own output
    slot, so results never depend on the number of worker threads.
    """
    n_sub = cos_a.shape[0]
    for p in prange(p0, p1):
        w = p - p0
        i = p // n_el
        j = p - i * n_el
        dx = cos_el[j] * cos_az[i]
        dy = cos_el[j] * sin_az[i]
        dz = sin_el[j]
        # orthonormal frame around the central direction
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
        best_t = math.inf
        best_slot = -1
        bdx = 0.0
        bdy = 0.0
        bdz = 0.0
        for s in range(n_sub):
            rx = cos_b[s] * ux + sin_b[s] * vx
            ry = cos_b[s] * uy + sin_b[s] * vy
            rz = cos_b[s] * uz + sin_b[s] * vz
            sdx = cos_a[s] * dx + sin_a[s] * rx
            sdy = cos_a[s] * dy + sin_a[s] * ry
            sdz = cos_a[s] * dz + sin_a[s] * rz
            t, _, slot = _first_hit(ox, oy, oz, sdx, sdy, sdz, t_min, max_range,
                                    bb_min, bb_max, left, right, start, count,
                                    v0p, e1p, e2p, tri_id, opaque)
            if slot >= 0 and t < best_t:
                best_t = t
                best_slot = slot
                bdx = sdx
                bdy = sdy
                bdz = sdz
        if best_slot >= 0:
            out_hit[w] = 1
            out_t[w] = best_t
            out_tri[w] = tri_id[best_slot]
            out_dir[w, 0] = bdx
            out_dir[w, 1] = bdy
            out_dir[w, 2] = bdz
            e1x = e1p[best_slot, 0]
            e1y = e1p[best_slot, 1]
            e1z = e1p[best_slot, 2]
            e2x = e2p[best_slot, 0]
            e2y = e2p[best_slot, 1]
            e2z = e2p[best_slot, 2]
            nx = e1y * e2z - e1z * e2y
            ny = e1z * e2x - e1x * e2z
            nz = e1x * e2y - e1y * e2x
            norm = math.sqrt(nx * nx + ny * ny + nz * nz)
            nx = nx / norm
            ny = ny / norm
            nz = nz / norm
            if nx * bdx + ny * bdy + nz * bdz > 0.0:
                nx = -nx
                ny = -ny
                nz = -nz
            out_nrm[w, 0] = nx
            out_nrm[w, 1] = ny
            out_nrm[w, 2] = nz
        else:
            out_hit[w] = 0
