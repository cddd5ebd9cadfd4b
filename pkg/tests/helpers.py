"""Shared test utilities: independent oracles and random-scene builders."""
from __future__ import annotations

import numpy as np

PARALLEL_EPS = 1e-12  # same determinant contract the library documents


def oracle_ray_triangle(o, d, a, b, c, t_min=0.0, t_max=np.inf, edge_tol=0.0):
    """Independent intersection oracle: plane hit + barycentric coordinates.

    Deliberately a different formulation from the library (which uses the
    signed-volume method): intersect the supporting plane first, then test
    the barycentric coordinates of the plane point.
    """
    a = np.asarray(a, dtype=np.float64)
    e0 = np.asarray(b, dtype=np.float64) - a
    e1 = np.asarray(c, dtype=np.float64) - a
    n = np.cross(e0, e1)
    denom = float(np.dot(d, n))
    if abs(denom) < PARALLEL_EPS:
        return None
    t = float(np.dot(a - o, n)) / denom
    if t < t_min or t > t_max:
        return None
    p = o + t * np.asarray(d, dtype=np.float64)
    v2 = p - a
    d00 = float(np.dot(e0, e0))
    d01 = float(np.dot(e0, e1))
    d11 = float(np.dot(e1, e1))
    d20 = float(np.dot(v2, e0))
    d21 = float(np.dot(v2, e1))
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    u = 1.0 - v - w
    if u < -edge_tol or v < -edge_tol or w < -edge_tol:
        return None
    return t


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_soup(rng, n, lo=-5.0, hi=5.0, size=1.0):
    """n random triangles: anchor in [lo, hi]^3, edges up to `size` long."""
    a = rng.uniform(lo, hi, size=(n, 3))
    b = a + rng.uniform(-size, size, size=(n, 3))
    c = a + rng.uniform(-size, size, size=(n, 3))
    return a, b, c


def random_rays(rng, n, lo=-6.0, hi=6.0):
    origins = rng.uniform(lo, hi, size=(n, 3))
    dirs = random_unit(rng, n)
    return origins, dirs


def quad(x0, y0, x1, y1, z, part=0):
    """Two triangles covering the axis-aligned rectangle at height z."""
    from synthscan.geometry import Triangle, vec3

    return [
        Triangle(vec3(x0, y0, z), vec3(x1, y0, z), vec3(x1, y1, z), part),
        Triangle(vec3(x0, y0, z), vec3(x1, y1, z), vec3(x0, y1, z), part),
    ]


def plane_asset(name, x0, y0, x1, y1, z=0.0, label_id=0, color=(128, 128, 128)):
    """Two-triangle rectangle as a MeshAsset."""
    from synthscan.assets import MeshAsset

    vertices = np.array([[x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z]],
                        dtype=np.float64)
    triangles = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return MeshAsset(name=name, vertices=vertices, triangles=triangles,
                     color=color, label_id=label_id)


def box_asset(name, center, size, label_id, color=(200, 60, 60)):
    """Closed axis-aligned box as a MeshAsset."""
    from synthscan.assets import MeshAsset

    cx, cy, cz = center
    h = size / 2.0
    verts = np.array([
        [cx - h, cy - h, cz - h], [cx + h, cy - h, cz - h],
        [cx + h, cy + h, cz - h], [cx - h, cy + h, cz - h],
        [cx - h, cy - h, cz + h], [cx + h, cy - h, cz + h],
        [cx + h, cy + h, cz + h], [cx - h, cy + h, cz + h]], dtype=np.float64)
    faces = np.array([
        (0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7),
        (0, 1, 5), (0, 5, 4), (3, 6, 2), (3, 7, 6),
        (0, 7, 3), (0, 4, 7), (1, 2, 6), (1, 6, 5)], dtype=np.int32)
    return MeshAsset(name=name, vertices=verts, triangles=faces,
                     color=color, label_id=label_id)


def scene_of(assets_with_translations, name="test"):
    """Scene from (asset, translation) pairs; part 0 should be the ground."""
    from synthscan.assets import LabelRegistry
    from synthscan.scene import Scene, ScenePart
    from synthscan.geometry import vec3

    registry = LabelRegistry()
    parts = []
    for index, (asset, t) in enumerate(assets_with_translations):
        if asset.label_id:
            try:
                registry.bind(asset.label_id, asset.name)
            except ValueError:
                pass  # same label reused by several parts
        parts.append(ScenePart(asset=asset, translation=vec3(*t),
                               class_id=asset.label_id or 0, part_index=index))
    return Scene(name=name, parts=parts, labels=registry)


def box_triangles(center, size, part=0):
    """12 triangles of an axis-aligned box (edge length `size`)."""
    from synthscan.geometry import Triangle, vec3

    cx, cy, cz = center
    h = size / 2.0
    lo = (cx - h, cy - h, cz - h)
    hi = (cx + h, cy + h, cz + h)
    corners = [
        vec3(lo[0], lo[1], lo[2]), vec3(hi[0], lo[1], lo[2]),
        vec3(hi[0], hi[1], lo[2]), vec3(lo[0], hi[1], lo[2]),
        vec3(lo[0], lo[1], hi[2]), vec3(hi[0], lo[1], hi[2]),
        vec3(hi[0], hi[1], hi[2]), vec3(lo[0], hi[1], hi[2]),
    ]
    faces = [
        (0, 2, 1), (0, 3, 2),  # bottom
        (4, 5, 6), (4, 6, 7),  # top
        (0, 1, 5), (0, 5, 4),  # y lo
        (3, 6, 2), (3, 7, 6),  # y hi
        (0, 7, 3), (0, 4, 7),  # x lo
        (1, 2, 6), (1, 6, 5),  # x hi
    ]
    return [Triangle(corners[i], corners[j], corners[k], part) for i, j, k in faces]
