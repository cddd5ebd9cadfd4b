"""Sliding-window partition of labeled clouds into training blocks.

Windows slide in x-y only; each block keeps the full z column. Anchoring is
at the cloud's bounding-box minimum with half-open membership
[x0, x0 + window), so stride == window partitions the cloud exactly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyCloud
from .pointcloud import PointCloud, to_training_txt
from .rng import pulse_keys

DEFAULT_WINDOW = 1.0     # m
DEFAULT_STRIDE = 1.0     # m
DEFAULT_MIN_POINTS = 100


@dataclass(frozen=True)
class BlockSpec:
    window_x: float = DEFAULT_WINDOW
    window_y: float = DEFAULT_WINDOW
    stride_x: float = DEFAULT_STRIDE
    stride_y: float = DEFAULT_STRIDE
    min_points: int = DEFAULT_MIN_POINTS
    sample_to: int | None = None  # per-block resample (with replacement)

    def __post_init__(self):
        if self.window_x <= 0 or self.window_y <= 0:
            raise ValueError("window sizes must be > 0")
        if not 0 < self.stride_x <= self.window_x:
            raise ValueError("stride_x must satisfy 0 < stride <= window")
        if not 0 < self.stride_y <= self.window_y:
            raise ValueError("stride_y must satisfy 0 < stride <= window")
        if self.min_points < 1:
            raise ValueError("min_points must be >= 1")
        if self.sample_to is not None and self.sample_to < 1:
            raise ValueError("sample_to must be >= 1")


@dataclass
class Block:
    origin: tuple[float, float]  # (x0, y0) window corner
    index: tuple[int, int]       # (i, j) window grid cell
    cloud: PointCloud

    def __len__(self) -> int:
        return len(self.cloud)


def _axis_window_count(lo: float, hi: float, stride: float) -> int:
    n = int(math.floor((hi - lo) / stride)) + 1
    # float guard: the max coordinate must land inside the last window
    while lo + n * stride <= hi:
        n += 1
    return n


def _axis_membership(vals: np.ndarray, lo: float, stride: float,
                     window: float, n: int) -> list[np.ndarray]:
    order = np.argsort(vals, kind="stable")
    ranked = vals[order]
    members = []
    for i in range(n):
        x0 = lo + i * stride
        a = np.searchsorted(ranked, x0, side="left")
        b = np.searchsorted(ranked, x0 + window, side="left")
        members.append(order[a:b])
    return members


def partition_blocks(cloud: PointCloud, spec: BlockSpec,
                     seed: int = 42) -> list[Block]:
    """Cut the cloud into window blocks, row-major over (i, j).

    Blocks under min_points are dropped. With sample_to set, every surviving
    block is resampled (with replacement) to exactly that many points using a
    per-block stream keyed on (seed, i, j).
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot partition an empty cloud")
    box = cloud.aabb()
    x_lo, y_lo = float(box.min[0]), float(box.min[1])
    nx = _axis_window_count(x_lo, float(box.max[0]), spec.stride_x)
    ny = _axis_window_count(y_lo, float(box.max[1]), spec.stride_y)
    x_members = _axis_membership(cloud.xyz[:, 0], x_lo, spec.stride_x,
                                 spec.window_x, nx)
    y_members = _axis_membership(cloud.xyz[:, 1], y_lo, spec.stride_y,
                                 spec.window_y, ny)
    blocks = []
    for i in range(nx):
        if x_members[i].size == 0:
            continue
        for j in range(ny):
            idx = np.intersect1d(x_members[i], y_members[j], assume_unique=True)
            if idx.size < spec.min_points:
                continue
            if spec.sample_to is not None:
                key = int(pulse_keys(seed, 0, i, j))
                rng = np.random.default_rng(key)
                idx = idx[rng.integers(0, idx.size, size=spec.sample_to)]
            blocks.append(Block(
                origin=(x_lo + i * spec.stride_x, y_lo + j * spec.stride_y),
                index=(i, j),
                cloud=cloud.take(idx)))
    return blocks


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    origin_x: float
    origin_y: float
    count: int


def write_blocks(blocks: list[Block], directory: str | Path,
                 base_name: str) -> list[ManifestEntry]:
    """Write one 4-field .txt per block plus `{base}_manifest.csv`.

    Files are named `{base}_{i}_{j}.txt`; rows keep the blocks' row-major
    order, so re-running on identical input reproduces identical bytes.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for block in blocks:
        i, j = block.index
        fname = f"{base_name}_{i}_{j}.txt"
        (directory / fname).write_bytes(to_training_txt(block.cloud))
        entries.append(ManifestEntry(file=fname,
                                     origin_x=block.origin[0],
                                     origin_y=block.origin[1],
                                     count=len(block)))
    with open(directory / f"{base_name}_manifest.csv", "w",
              encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", "origin_x", "origin_y", "count"])
        for e in entries:
            writer.writerow([e.file, repr(e.origin_x), repr(e.origin_y), e.count])
    return entries
