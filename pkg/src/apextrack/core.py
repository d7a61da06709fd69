"""Domain types and grid/image coordinate arithmetic.

Coordinates follow the pixel-center convention: pixel ``(x, y)`` covers
``[x - 0.5, x + 0.5)``. A heatmap cell ``(col, row)`` at down-sampling factor
``R`` covers ``R x R`` image pixels and its center sits at
``((col + 0.5) * R - 0.5, (row + 0.5) * R - 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import RangeError, ShapeError, ValidationError

__all__ = [
    "GridSpec",
    "Heatmap",
    "SizeMap",
    "DisplacementField",
    "Detection",
    "TrackPoint",
    "Tracklet",
    "TrackTable",
    "grid_to_image",
    "image_to_grid",
]


@dataclass(frozen=True)
class GridSpec:
    width_px: int
    height_px: int
    downsample: int = 4
    classes: int = 1

    def __post_init__(self):
        for name in ("width_px", "height_px", "downsample", "classes"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValidationError("image dimensions must be positive")
        if self.downsample < 1:
            raise ValidationError("downsample must be >= 1")
        if self.width_px % self.downsample or self.height_px % self.downsample:
            raise ValidationError(
                f"image size {self.width_px}x{self.height_px} is not divisible "
                f"by downsample {self.downsample}"
            )
        if self.classes < 1:
            raise ValidationError("classes must be >= 1")

    @property
    def cols(self) -> int:
        return self.width_px // self.downsample

    @property
    def rows(self) -> int:
        return self.height_px // self.downsample

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x < self.width_px and 0 <= y < self.height_px


def _as_tensor(values, grid: GridSpec, channels: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float32, copy=True)
    if arr.ndim == 2 and channels == 1:
        arr = arr[:, :, None]
    expected = (grid.rows, grid.cols, channels)
    if arr.shape != expected:
        raise ShapeError(f"{what} has shape {arr.shape}, grid expects {expected}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Per-cell center confidence, shape ``(H/R, W/R, C)``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = _as_tensor(self.values, self.grid, self.grid.classes, "heatmap")
        if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0 or arr.max(initial=0.0) > 1:
            raise ValidationError("heatmap values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        return (
            isinstance(other, Heatmap)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class SizeMap:
    """Per-cell box (width, height) in image pixels, shape ``(H/R, W/R, 2)``."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = _as_tensor(self.values, self.grid, 2, "size map")
        if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0:
            raise ValidationError("size map values must be finite and non-negative")
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        return (
            isinstance(other, SizeMap)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Per-cell motion (dx, dy) in image pixels from the previous frame to this one."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = _as_tensor(self.values, self.grid, 2, "displacement field")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("displacement values must be finite")
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: GridSpec) -> DisplacementField:
        return cls(grid, np.zeros((grid.rows, grid.cols, 2), dtype=np.float32))

    def at(self, x: float, y: float) -> tuple[float, float]:
        col, row = image_to_grid((x, y), self.grid)
        dx, dy = self.values[row, col]
        return float(dx), float(dy)

    def __eq__(self, other):
        return (
            isinstance(other, DisplacementField)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class Detection:
    center: tuple[float, float]
    size: tuple[float, float]
    confidence: float
    class_id: int = 0

    def __post_init__(self):
        cx, cy = (float(v) for v in self.center)
        w, h = (float(v) for v in self.size)
        conf = float(self.confidence)
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValidationError(f"detection center must be finite, got {self.center}")
        if cx < 0 or cy < 0:
            raise RangeError(f"detection center {self.center} is negative")
        if not (w >= 0 and h >= 0):
            raise ValidationError(f"detection size must be non-negative, got {self.size}")
        if not 0.0 <= conf <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {conf}")
        object.__setattr__(self, "center", (cx, cy))
        object.__setattr__(self, "size", (w, h))
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "class_id", int(self.class_id))

    def check_inside(self, grid: GridSpec) -> None:
        if not grid.contains(*self.center):
            raise RangeError(
                f"detection center {self.center} outside {grid.width_px}x{grid.height_px} image"
            )


class TrackPoint(NamedTuple):
    frame: int
    x: float
    y: float
    confidence: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Tracklet:
    id: int
    last_detection: Detection
    last_frame: int
    history: tuple[TrackPoint, ...]

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"tracklet id must be >= 1, got {self.id}")
        history = tuple(TrackPoint(*p) for p in self.history)
        if not history:
            raise ValidationError("tracklet history cannot be empty")
        frames = [p.frame for p in history]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError(f"tracklet {self.id} history frames are not strictly increasing")
        if frames[-1] != self.last_frame:
            raise ValidationError(f"tracklet {self.id} history does not end at last_frame")
        object.__setattr__(self, "history", history)

    @classmethod
    def start(cls, track_id: int, detection: Detection, frame: int) -> Tracklet:
        point = TrackPoint(frame, *detection.center, detection.confidence)
        return cls(track_id, detection, frame, (point,))

    def extend(self, detection: Detection, frame: int) -> Tracklet:
        point = TrackPoint(frame, *detection.center, detection.confidence)
        return Tracklet(self.id, detection, frame, self.history + (point,))

    @property
    def last_center(self) -> tuple[float, float]:
        return self.last_detection.center

    @property
    def class_id(self) -> int:
        return self.last_detection.class_id


@dataclass
class TrackTable:
    active: list[Tracklet] = field(default_factory=list)
    retired: list[Tracklet] = field(default_factory=list)
    next_id: int = 1

    def __post_init__(self):
        ids = [t.id for t in self.all_tracklets()]
        if len(ids) != len(set(ids)):
            raise ValidationError("tracklet ids must be distinct")
        if self.next_id < 1 or any(i >= self.next_id for i in ids):
            raise ValidationError("next_id must exceed every allocated id")

    def all_tracklets(self) -> list[Tracklet]:
        return sorted([*self.active, *self.retired], key=lambda t: t.id)

    def __len__(self):
        return len(self.active) + len(self.retired)

    def points_by_frame(self) -> dict[int, list[tuple[int, TrackPoint]]]:
        """Map frame index to ``(track_id, point)`` pairs observed in that frame."""
        out: dict[int, list[tuple[int, TrackPoint]]] = {}
        for t in self.all_tracklets():
            for p in t.history:
                out.setdefault(p.frame, []).append((t.id, p))
        return out


def grid_to_image(cell, grid: GridSpec) -> tuple[float, float]:
    col, row = cell
    if not (0 <= col < grid.cols and 0 <= row < grid.rows):
        raise RangeError(f"cell {tuple(cell)} outside {grid.cols}x{grid.rows} grid")
    r = grid.downsample
    return ((col + 0.5) * r - 0.5, (row + 0.5) * r - 0.5)


def image_to_grid(point, grid: GridSpec) -> tuple[int, int]:
    x, y = point
    if not grid.contains(x, y):
        raise RangeError(f"point {tuple(point)} outside {grid.width_px}x{grid.height_px} image")
    r = grid.downsample
    # nearest cell center: round((x + 0.5) / r - 0.5) == floor((x + 0.5) / r)
    col = min(int(math.floor((x + 0.5) / r)), grid.cols - 1)
    row = min(int(math.floor((y + 0.5) / r)), grid.rows - 1)
    return col, row
