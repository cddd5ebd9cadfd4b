"""Scene assembly and the scene XML format.

A scene is an ordered list of labeled parts: the ground plane (part 0) plus
objects dropped onto it on a square grid. Parts carry translation only; any
rotation in an input file is rejected so objects always lie flat.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from xml.etree import ElementTree as ET

import numpy as np

from .assets import LabelRegistry, MeshAsset, color_for_label, normalize_label_name
from .errors import (
    EmptyScene,
    GroundTooSmall,
    MalformedSceneXml,
    MissingAsset,
    MissingFile,
    RotationUnsupported,
)
from .geometry import DEGENERATE_AREA, Aabb, Bvh, vec3

log = logging.getLogger(__name__)

XML_DECLARATION = b'<?xml version="1.0"?>\n'
DEFAULT_SCANNER_HEIGHT = 1.7  # m, tripod height above scene center


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class ScenePart:
    asset: MeshAsset
    translation: np.ndarray  # (3,) float64, meters
    class_id: int
    part_index: int

    def aabb(self) -> Aabb:
        box = self.asset.aabb()
        return Aabb(box.min + self.translation, box.max + self.translation)


@dataclass
class Scene:
    name: str
    parts: list[ScenePart]
    labels: LabelRegistry

    @property
    def center(self) -> np.ndarray:
        """Centroid of the non-ground parts' bounding-box centers."""
        boxes = [p.aabb().center for p in self.parts if p.part_index != 0]
        if not boxes:
            return self.parts[0].aabb().center
        return np.mean(boxes, axis=0)

    def part_labels(self) -> np.ndarray:
        return np.asarray([p.class_id for p in self.parts], dtype=np.int32)

    def part_colors(self) -> np.ndarray:
        return np.asarray([p.asset.color for p in self.parts], dtype=np.uint8)

    def triangle_arrays(self):
        """World-space triangle soup (v0, v1, v2, part_index arrays).

        Degenerate triangles (area <= 1e-12 m^2) are dropped here, with a
        warning, so they never reach the BVH.
        """
        if not self.parts:
            raise EmptyScene(f"scene {self.name!r} has no parts")
        chunks_v0, chunks_v1, chunks_v2, chunks_part = [], [], [], []
        dropped = 0
        for part in self.parts:
            a, b, c = part.asset.corner_arrays()
            a = a + part.translation
            b = b + part.translation
            c = c + part.translation
            cross = np.cross(b - a, c - a)
            area = 0.5 * np.linalg.norm(cross, axis=1)
            keep = area > DEGENERATE_AREA
            dropped += int((~keep).sum())
            chunks_v0.append(a[keep])
            chunks_v1.append(b[keep])
            chunks_v2.append(c[keep])
            chunks_part.append(np.full(int(keep.sum()), part.part_index, dtype=np.int32))
        if dropped:
            log.warning("dropped %d degenerate triangle(s) at scene assembly", dropped)
        return (np.concatenate(chunks_v0), np.concatenate(chunks_v1),
                np.concatenate(chunks_v2), np.concatenate(chunks_part))

    def build_bvh(self, leaf_size: int = 8) -> Bvh:
        v0, v1, v2, part = self.triangle_arrays()
        if v0.shape[0] == 0:
            raise EmptyScene(f"scene {self.name!r} has no usable triangles")
        return Bvh.from_arrays(v0, v1, v2, part, leaf_size=leaf_size)


@dataclass(frozen=True)
class ScanPosition:
    position: np.ndarray
    index: int


def build_scene(assets: list[MeshAsset], ground: MeshAsset, num_objects: int,
                spacing: float, name: str, registry: LabelRegistry,
                scatter_seed: int | None = None) -> Scene:
    """Place objects on the ground plane.

    Default layout is a square grid of pitch `spacing`, filled in row-major
    order and centered on the ground plane; assets are reused round-robin
    when num_objects exceeds the asset list. With `scatter_seed` set, object
    centers are drawn uniformly over the ground footprint instead (seeded,
    reproducible). Either way each object is dropped so its bounding-box
    bottom sits exactly on the ground level, with no rotation.
    """
    if num_objects < 1:
        raise ValueError("num_objects must be >= 1")
    if not assets:
        raise EmptyScene("no assets to place")
    gbox = ground.aabb()
    ground_z = float(gbox.min[2])
    gcx, gcy = float(gbox.center[0]), float(gbox.center[1])

    cols = math.ceil(math.sqrt(num_objects))
    rows = math.ceil(num_objects / cols)
    rng = np.random.default_rng(scatter_seed) if scatter_seed is not None else None

    parts = [ScenePart(asset=ground, translation=vec3(0, 0, 0),
                       class_id=ground.label_id or 0, part_index=0)]
    for k in range(num_objects):
        asset = assets[k % len(assets)]
        abox = asset.aabb()
        half = abox.extent * 0.5
        if rng is not None:
            lo_x, hi_x = gbox.min[0] + half[0], gbox.max[0] - half[0]
            lo_y, hi_y = gbox.min[1] + half[1], gbox.max[1] - half[1]
            if lo_x > hi_x or lo_y > hi_y:
                raise GroundTooSmall(
                    f"object {k} ({asset.name!r}) does not fit on the ground plane")
            cell_x = float(rng.uniform(lo_x, hi_x))
            cell_y = float(rng.uniform(lo_y, hi_y))
        else:
            row, col = divmod(k, cols)
            cell_x = gcx + (col - (cols - 1) / 2.0) * spacing
            cell_y = gcy + (row - (rows - 1) / 2.0) * spacing
        t = vec3(cell_x - float(abox.center[0]),
                 cell_y - float(abox.center[1]),
                 ground_z - float(abox.min[2]))
        placed = Aabb(abox.min + t, abox.max + t)
        if (placed.min[0] < gbox.min[0] or placed.max[0] > gbox.max[0]
                or placed.min[1] < gbox.min[1] or placed.max[1] > gbox.max[1]):
            raise GroundTooSmall(
                f"object {k} ({asset.name!r}) extends beyond the ground plane; "
                f"reduce --spacing or --num-objects, or enlarge the ground")
        if asset.label_id is None:
            raise ValueError(f"asset {asset.name!r} has no class label")
        parts.append(ScenePart(asset=asset, translation=t,
                               class_id=asset.label_id, part_index=k + 1))
    return Scene(name=name, parts=parts, labels=registry)


def generate_scan_positions(center: np.ndarray, radius: float, segments: int,
                            height: float = DEFAULT_SCANNER_HEIGHT) -> list[ScanPosition]:
    """Scanner positions on a circle of `radius` around the scene center,
    one per circular segment, at `height` above the center."""
    if segments < 1:
        raise ValueError("segments must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    out = []
    for i in range(segments):
        theta = 2.0 * math.pi * i / segments
        pos = vec3(center[0] + radius * math.cos(theta),
                   center[1] + radius * math.sin(theta),
                   center[2] + height)
        out.append(ScanPosition(position=pos, index=i))
    return out


# -- scene XML ----------------------------------------------------------------


def write_scene_xml(scene: Scene) -> bytes:
    """Serialize to the two-file scene format (see README for the schema)."""
    root = ET.Element("document")
    sc = ET.SubElement(root, "scene", id=scene.name, name=scene.name)
    for part in scene.parts:
        if part.asset.source is None:
            raise ValueError(f"part {part.part_index} asset has no source path")
        pe = ET.SubElement(sc, "part", id=str(part.part_index),
                           classId=str(part.class_id))
        loader = ET.SubElement(pe, "filter", type="objloader")
        ET.SubElement(loader, "param", key="filepath", value=part.asset.source)
        trans = ET.SubElement(pe, "filter", type="translate")
        offset = ";".join(_fmt(v) for v in part.translation)
        ET.SubElement(trans, "param", key="offset", value=offset)
    ET.indent(root)
    return XML_DECLARATION + ET.tostring(root) + b"\n"


def _param_value(filt: ET.Element, key: str, element: str) -> str:
    for param in filt.iter("param"):
        if param.get("key") == key:
            value = param.get("value")
            if value is None:
                raise MalformedSceneXml(element, f"param {key!r} has no value")
            return value
    raise MalformedSceneXml(element, f"missing param {key!r}")


def parse_scene_xml(data: bytes, asset_loader: Callable[[str], MeshAsset]) -> Scene:
    """Parse scene XML, loading each part's mesh through `asset_loader`.

    The loader receives the objloader filepath verbatim and returns a
    MeshAsset; FileNotFoundError/MissingFile from it surface as MissingAsset.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedSceneXml("document", f"not well-formed: {exc}") from None
    if root.tag != "document":
        raise MalformedSceneXml(root.tag, "root element must be <document>")
    sc = root.find("scene")
    if sc is None:
        raise MalformedSceneXml("document", "no <scene> element")
    name = sc.get("id") or sc.get("name")
    if not name:
        raise MalformedSceneXml("scene", "missing id attribute")

    registry = LabelRegistry()
    parts: list[ScenePart] = []
    for index, pe in enumerate(sc.findall("part")):
        filepath = None
        translation = vec3(0, 0, 0)
        for filt in pe.findall("filter"):
            ftype = filt.get("type", "")
            if ftype == "objloader":
                filepath = _param_value(filt, "filepath", "part")
            elif ftype == "translate":
                raw = _param_value(filt, "offset", "part")
                fields = raw.split(";")
                if len(fields) != 3:
                    raise MalformedSceneXml("part", f"offset needs x;y;z, got {raw!r}")
                try:
                    translation = vec3(*(float(f) for f in fields))
                except ValueError:
                    raise MalformedSceneXml("part", f"non-numeric offset {raw!r}") from None
            elif ftype in ("rotate", "rotation"):
                raise RotationUnsupported(
                    "rotation filters are not supported; objects must lie flat")
            else:
                raise MalformedSceneXml("filter", f"unknown filter type {ftype!r}")
        if filepath is None:
            raise MalformedSceneXml("part", "missing objloader filter")
        raw_class = pe.get("classId")
        if raw_class is None:
            raise MalformedSceneXml("part", "missing classId attribute")
        try:
            class_id = int(raw_class)
        except ValueError:
            raise MalformedSceneXml("part", f"classId {raw_class!r} not an integer") from None
        if class_id < 0:
            raise MalformedSceneXml("part", f"classId {class_id} is negative")

        try:
            asset = asset_loader(filepath)
        except (FileNotFoundError, MissingFile):
            raise MissingAsset(filepath) from None

        if class_id != 0:
            label_name = normalize_label_name(Path(filepath).name)
            try:
                registry.bind(class_id, label_name)
            except ValueError as exc:
                raise MalformedSceneXml("part", str(exc)) from None
        asset.label_id = class_id
        asset.color = color_for_label(class_id)
        parts.append(ScenePart(asset=asset, translation=translation,
                               class_id=class_id, part_index=index))
    if not parts:
        raise MalformedSceneXml("scene", "scene has no parts")
    return Scene(name=name, parts=parts, labels=registry)


def file_asset_loader(base_dir: str | Path) -> Callable[[str], MeshAsset]:
    """Loader resolving relative filepaths against the scene file's directory."""
    from .assets import parse_obj

    base = Path(base_dir)

    def load(filepath: str) -> MeshAsset:
        path = Path(filepath)
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise MissingFile(str(path))
        asset = parse_obj(path.read_bytes(), name=path.stem)
        asset.source = filepath
        return asset

    return load
