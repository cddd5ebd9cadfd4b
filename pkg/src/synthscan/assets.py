"""Wavefront OBJ ingestion and the class-label registry.

Class labels are derived from file names (an OBJ carries no semantics):
the stem is lowercased and trailing digits/separators are stripped, so
"Elbow_03.obj" and "elbow-7.obj" both map to class "elbow". Label id 0 is
reserved for the ground plane.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedObj, MissingFile
from .geometry import Aabb

# Distinct, stable part colors; indexed by label id modulo the table length.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (128, 128, 128),  # 0: ground
    (228, 26, 28),
    (55, 126, 184),
    (77, 175, 74),
    (152, 78, 163),
    (255, 127, 0),
    (255, 255, 51),
    (166, 86, 40),
    (247, 129, 191),
    (0, 139, 139),
    (102, 205, 170),
    (218, 112, 214),
    (70, 130, 180),
    (189, 183, 107),
    (205, 92, 92),
    (154, 205, 50),
)

_TRAILING = re.compile(r"[\d\s_\-.]+$")


def color_for_label(label_id: int) -> tuple[int, int, int]:
    return PALETTE[label_id % len(PALETTE)]


@dataclass(frozen=True)
class ClassLabel:
    id: int
    name: str


GROUND_LABEL = ClassLabel(0, "ground")


class LabelRegistry:
    """Bidirectional id<->name map; id 0 is always "ground"."""

    def __init__(self):
        self._by_name: dict[str, int] = {GROUND_LABEL.name: GROUND_LABEL.id}
        self._by_id: dict[int, str] = {GROUND_LABEL.id: GROUND_LABEL.name}

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, label_id: int) -> bool:
        return label_id in self._by_id

    def get_or_assign(self, name: str) -> ClassLabel:
        if name in self._by_name:
            return ClassLabel(self._by_name[name], name)
        new_id = max(self._by_id) + 1
        self._by_name[name] = new_id
        self._by_id[new_id] = name
        return ClassLabel(new_id, name)

    def bind(self, label_id: int, name: str) -> ClassLabel:
        """Register an explicit (id, name) pair, e.g. from a scene file."""
        if label_id in self._by_id:
            if self._by_id[label_id] != name:
                raise ValueError(
                    f"label id {label_id} already bound to "
                    f"{self._by_id[label_id]!r}, not {name!r}")
            return ClassLabel(label_id, name)
        if name in self._by_name:
            raise ValueError(f"label name {name!r} already has id {self._by_name[name]}")
        self._by_name[name] = label_id
        self._by_id[label_id] = name
        return ClassLabel(label_id, name)

    def name_of(self, label_id: int) -> str:
        return self._by_id[label_id]

    def labels(self) -> list[ClassLabel]:
        return [ClassLabel(i, self._by_id[i]) for i in sorted(self._by_id)]


def normalize_label_name(filename: str) -> str:
    stem = Path(filename).stem.lower()
    stripped = _TRAILING.sub("", stem)
    return stripped or stem


def label_for_asset(filename: str, registry: LabelRegistry) -> ClassLabel:
    """Label for an asset file; assigns the next free id on first sight."""
    return registry.get_or_assign(normalize_label_name(filename))


@dataclass
class MeshAsset:
    name: str
    vertices: np.ndarray                      # (n, 3) float64, meters
    triangles: np.ndarray                     # (m, 3) int32 vertex indices
    normals: np.ndarray | None = None         # (k, 3) parsed vn records
    triangle_normals: np.ndarray | None = None  # (m, 3) vn indices, or None
    color: tuple[int, int, int] = (200, 200, 200)
    source: str | None = None                 # originating file, if any
    label_id: int | None = None

    def aabb(self) -> Aabb:
        return Aabb(self.vertices.min(axis=0), self.vertices.max(axis=0))

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def corner_arrays(self):
        """Triangle corners as three (m, 3) arrays."""
        v = self.vertices
        t = self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]


def _parse_floats(tokens: list[str], want: int, line_no: int) -> list[float]:
    if len(tokens) < want:
        raise MalformedObj(line_no, f"expected {want} coordinates, got {len(tokens)}")
    try:
        return [float(v) for v in tokens[:want]]
    except ValueError as exc:
        raise MalformedObj(line_no, f"non-numeric coordinate: {exc}") from None


def _resolve_index(raw: str, n: int, line_no: int, what: str) -> int:
    try:
        idx = int(raw)
    except ValueError:
        raise MalformedObj(line_no, f"non-numeric {what} index {raw!r}") from None
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += n
    else:
        raise MalformedObj(line_no, f"{what} index 0 is not valid (OBJ is 1-based)")
    if not 0 <= idx < n:
        raise MalformedObj(line_no, f"{what} index {raw} out of range (have {n})")
    return idx


def parse_obj(data: bytes | str, name: str = "mesh") -> MeshAsset:
    """Parse OBJ text into a triangle asset.

    Supports v, vn and f records (v, v/vt, v//vn, v/vt/vn forms; 1-based and
    negative indices). o/g groups are concatenated into the single returned
    asset; polygons with more than 3 vertices are fan-triangulated from their
    first vertex. Unknown directives and comments are skipped.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    vertices: list[list[float]] = []
    normals: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    tri_normals: list[tuple[int, int, int]] = []
    any_face_normals = False
    named = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "v":
            vertices.append(_parse_floats(tokens[1:], 3, line_no))
        elif key == "vn":
            normals.append(_parse_floats(tokens[1:], 3, line_no))
        elif key == "f":
            if len(tokens) < 4:
                raise MalformedObj(line_no, "face needs at least 3 vertices")
            corners: list[int] = []
            corner_normals: list[int] = []
            for part in tokens[1:]:
                fields = part.split("/")
                corners.append(_resolve_index(fields[0], len(vertices), line_no, "vertex"))
                if len(fields) >= 3 and fields[2]:
                    corner_normals.append(
                        _resolve_index(fields[2], len(normals), line_no, "normal"))
                else:
                    corner_normals.append(-1)
            for k in range(1, len(corners) - 1):
                tris.append((corners[0], corners[k], corners[k + 1]))
                tri_normals.append(
                    (corner_normals[0], corner_normals[k], corner_normals[k + 1]))
                if corner_normals[0] >= 0:
                    any_face_normals = True
        elif key in ("o", "g") and len(tokens) > 1 and named is None:
            named = tokens[1]
        # everything else (vt, s, mtllib, usemtl, ...) is skipped

    if not tris:
        raise MalformedObj(0, "no faces found")
    return MeshAsset(
        name=named or name,
        vertices=np.asarray(vertices, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int32),
        normals=np.asarray(normals, dtype=np.float64) if normals else None,
        triangle_normals=(np.asarray(tri_normals, dtype=np.int32)
                          if any_face_normals else None),
    )


def write_obj(asset: MeshAsset) -> bytes:
    """Serialize back to OBJ text; reparsing yields identical triangles."""
    out = [f"o {asset.name}"]
    for v in asset.vertices:
        out.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    if asset.normals is not None:
        for n in asset.normals:
            out.append(f"vn {float(n[0])!r} {float(n[1])!r} {float(n[2])!r}")
    has_nrm = asset.triangle_normals is not None
    for m, tri in enumerate(asset.triangles):
        if has_nrm and asset.triangle_normals[m][0] >= 0:
            nrm = asset.triangle_normals[m]
            out.append("f " + " ".join(f"{tri[k] + 1}//{nrm[k] + 1}" for k in range(3)))
        else:
            out.append("f " + " ".join(str(tri[k] + 1) for k in range(3)))
    return ("\n".join(out) + "\n").encode("utf-8")


def load_asset(path: str | Path, registry: LabelRegistry) -> MeshAsset:
    """Parse one OBJ file and tag it with its class label and palette color."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    asset = parse_obj(path.read_bytes(), name=path.stem)
    label = label_for_asset(path.name, registry)
    asset.label_id = label.id
    asset.color = color_for_label(label.id)
    asset.source = str(path)
    return asset


def load_ground_plane(path: str | Path) -> MeshAsset:
    """Load the ground mesh; always the reserved label 0."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    asset = parse_obj(path.read_bytes(), name=path.stem)
    asset.label_id = GROUND_LABEL.id
    asset.color = color_for_label(GROUND_LABEL.id)
    asset.source = str(path)
    return asset


def load_assets_dir(directory: str | Path, registry: LabelRegistry) -> list[MeshAsset]:
    """Parse every *.obj in the directory, sorted by filename for stable ids."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFile(str(directory))
    paths = sorted(directory.glob("*.obj"))
    if not paths:
        raise MissingFile(f"no .obj files in {directory}")
    return [load_asset(p, registry) for p in paths]
