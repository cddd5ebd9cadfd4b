"""Labeled point clouds: data model, ASCII formats, merging and comparison.

The interchange format is the 10-field ASCII `.xyz` line
``x y z nx ny nz label r g b`` (floats at 9 significant digits, LF endings);
training exports keep only ``x y z label``. Clouds are stored column-wise in
numpy arrays; `LabeledPoint` is the per-point record view.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud, MalformedXyz
from .geometry import Aabb

FLOAT_FMT = "%.9g"
_XYZ_FMT = [FLOAT_FMT] * 6 + ["%d"] * 4
_TXT_FMT = [FLOAT_FMT] * 3 + ["%d"]


@dataclass(frozen=True)
class LabeledPoint:
    x: float
    y: float
    z: float
    nx: float
    ny: float
    nz: float
    label: int
    r: int
    g: int
    b: int


@dataclass
class PointCloud:
    xyz: np.ndarray                 # (n, 3) float64, meters
    normals: np.ndarray             # (n, 3) float64, unit
    labels: np.ndarray              # (n,) int32
    colors: np.ndarray              # (n, 3) uint8
    provenance: str | None = None   # e.g. "survey:pipes leg:2"

    def __post_init__(self):
        n = self.xyz.shape[0]
        if self.xyz.shape != (n, 3) or self.normals.shape != (n, 3):
            raise ValueError("xyz and normals must be (n, 3)")
        if self.labels.shape != (n,) or self.colors.shape != (n, 3):
            raise ValueError("labels must be (n,), colors (n, 3)")

    @classmethod
    def empty(cls, provenance: str | None = None) -> "PointCloud":
        return cls(xyz=np.empty((0, 3)), normals=np.empty((0, 3)),
                   labels=np.empty(0, dtype=np.int32),
                   colors=np.empty((0, 3), dtype=np.uint8),
                   provenance=provenance)

    @classmethod
    def from_points(cls, points: list[LabeledPoint],
                    provenance: str | None = None) -> "PointCloud":
        if not points:
            return cls.empty(provenance)
        return cls(
            xyz=np.array([[p.x, p.y, p.z] for p in points], dtype=np.float64),
            normals=np.array([[p.nx, p.ny, p.nz] for p in points], dtype=np.float64),
            labels=np.array([p.label for p in points], dtype=np.int32),
            colors=np.array([[p.r, p.g, p.b] for p in points], dtype=np.uint8),
            provenance=provenance)

    def __len__(self) -> int:
        return int(self.xyz.shape[0])

    def __getitem__(self, i: int) -> LabeledPoint:
        return LabeledPoint(
            float(self.xyz[i, 0]), float(self.xyz[i, 1]), float(self.xyz[i, 2]),
            float(self.normals[i, 0]), float(self.normals[i, 1]), float(self.normals[i, 2]),
            int(self.labels[i]),
            int(self.colors[i, 0]), int(self.colors[i, 1]), int(self.colors[i, 2]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def take(self, idx: np.ndarray) -> "PointCloud":
        return PointCloud(xyz=self.xyz[idx], normals=self.normals[idx],
                          labels=self.labels[idx], colors=self.colors[idx],
                          provenance=self.provenance)

    def aabb(self) -> Aabb:
        if len(self) == 0:
            raise EmptyCloud("empty cloud has no bounding box")
        return Aabb(self.xyz.min(axis=0), self.xyz.max(axis=0))


# -- ASCII formats ------------------------------------------------------------


def write_xyz(cloud: PointCloud) -> bytes:
    if len(cloud) == 0:
        return b""
    table = np.column_stack([cloud.xyz, cloud.normals,
                             cloud.labels.astype(np.float64),
                             cloud.colors.astype(np.float64)])
    buf = io.BytesIO()
    np.savetxt(buf, table, fmt=_XYZ_FMT, newline="\n")
    return buf.getvalue()


def _diagnose_lines(text: str, n_fields: int) -> None:
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != n_fields:
            raise MalformedXyz(line_no, f"expected {n_fields} fields, got {len(fields)}")
        for f in fields:
            try:
                float(f)
            except ValueError:
                raise MalformedXyz(line_no, f"non-numeric field {f!r}") from None


def read_xyz(data: bytes) -> PointCloud:
    """Parse 10-field labeled XYZ text. Inverse of write_xyz up to the
    9-significant-digit float representation."""
    text = data.decode("utf-8")
    if not text.strip():
        return PointCloud.empty()
    try:
        table = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=2)
    except ValueError:
        _diagnose_lines(text, 10)
        raise MalformedXyz(0, "unreadable numeric data") from None
    if table.shape[1] != 10:
        _diagnose_lines(text, 10)
        raise MalformedXyz(0, f"expected 10 columns, got {table.shape[1]}")
    labels = table[:, 6]
    if not np.all(labels == np.floor(labels)):
        bad = int(np.nonzero(labels != np.floor(labels))[0][0]) + 1
        raise MalformedXyz(bad, "label must be an integer")
    rgb = table[:, 7:10]
    if not np.all((rgb == np.floor(rgb)) & (rgb >= 0) & (rgb <= 255)):
        bad = int(np.nonzero(~np.all((rgb == np.floor(rgb)) & (rgb >= 0) & (rgb <= 255),
                                     axis=1))[0][0]) + 1
        raise MalformedXyz(bad, "r g b must be integers in 0..255")
    return PointCloud(xyz=np.ascontiguousarray(table[:, 0:3]),
                      normals=np.ascontiguousarray(table[:, 3:6]),
                      labels=labels.astype(np.int32),
                      colors=rgb.astype(np.uint8))


def to_training_txt(cloud: PointCloud) -> bytes:
    """4-field export (x y z label), point order preserved; the normal and
    color columns are exactly what gets dropped."""
    if len(cloud) == 0:
        return b""
    table = np.column_stack([cloud.xyz, cloud.labels.astype(np.float64)])
    buf = io.BytesIO()
    np.savetxt(buf, table, fmt=_TXT_FMT, newline="\n")
    return buf.getvalue()


def read_training_txt(data: bytes) -> PointCloud:
    """Parse a 4-field training file back into a cloud (normals zeroed,
    colors white)."""
    text = data.decode("utf-8")
    if not text.strip():
        return PointCloud.empty()
    try:
        table = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=2)
    except ValueError:
        _diagnose_lines(text, 4)
        raise MalformedXyz(0, "unreadable numeric data") from None
    if table.shape[1] != 4:
        _diagnose_lines(text, 4)
        raise MalformedXyz(0, f"expected 4 columns, got {table.shape[1]}")
    n = table.shape[0]
    normals = np.zeros((n, 3))
    colors = np.full((n, 3), 255, dtype=np.uint8)
    return PointCloud(xyz=np.ascontiguousarray(table[:, 0:3]), normals=normals,
                      labels=table[:, 3].astype(np.int32), colors=colors)


# -- operations ---------------------------------------------------------------


def merge(clouds: list[PointCloud]) -> PointCloud:
    """Concatenate clouds in the given (leg) order. Overlapping returns from
    different legs are kept; nothing is deduplicated."""
    if not clouds:
        return PointCloud.empty()
    return PointCloud(
        xyz=np.concatenate([c.xyz for c in clouds]),
        normals=np.concatenate([c.normals for c in clouds]),
        labels=np.concatenate([c.labels for c in clouds]),
        colors=np.concatenate([c.colors for c in clouds]))


@dataclass
class CloudStats:
    count: int
    bbox: Aabb | None
    label_counts: dict[int, int]
    mean_nn_spacing: float
    nn_spacing_defined: bool


def stats(cloud: PointCloud) -> CloudStats:
    """Counts, bounds and mean nearest-neighbor spacing (0 and flagged
    undefined for clouds of fewer than two points)."""
    from scipy.spatial import cKDTree

    n = len(cloud)
    values, counts = np.unique(cloud.labels, return_counts=True)
    label_counts = {int(v): int(c) for v, c in zip(values, counts)}
    if n < 2:
        return CloudStats(count=n, bbox=cloud.aabb() if n else None,
                          label_counts=label_counts,
                          mean_nn_spacing=0.0, nn_spacing_defined=False)
    tree = cKDTree(cloud.xyz)
    dist, _ = tree.query(cloud.xyz, k=2)
    return CloudStats(count=n, bbox=cloud.aabb(), label_counts=label_counts,
                      mean_nn_spacing=float(dist[:, 1].mean()),
                      nn_spacing_defined=True)


@dataclass
class LabelDistance:
    count: int
    mean: float
    rms: float
    max: float


@dataclass
class CloudComparison:
    mean: float
    rms: float
    max: float
    per_label: dict[int, LabelDistance]


def compare(cloud_a: PointCloud, cloud_b: PointCloud) -> CloudComparison:
    """Nearest-neighbor distance from every point of a to the cloud b,
    aggregated overall and per class label of a."""
    from scipy.spatial import cKDTree

    if len(cloud_a) == 0 or len(cloud_b) == 0:
        raise EmptyCloud("compare needs two non-empty clouds")
    dist, _ = cKDTree(cloud_b.xyz).query(cloud_a.xyz)
    dist = np.atleast_1d(dist)
    per_label = {}
    for label in np.unique(cloud_a.labels):
        d = dist[cloud_a.labels == label]
        per_label[int(label)] = LabelDistance(
            count=int(d.size), mean=float(d.mean()),
            rms=float(np.sqrt(np.mean(d * d))), max=float(d.max()))
    return CloudComparison(mean=float(dist.mean()),
                           rms=float(np.sqrt(np.mean(dist * dist))),
                           max=float(dist.max()), per_label=per_label)
