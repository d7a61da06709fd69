"""Scripted apex trajectories rendered as network-output tensors.

Gives closed-loop test data without a trained network: a trajectory is
rendered frame by frame into the heatmap, size map and displacement field a
perfect detector would emit, then fed through decode, tracking and scoring.
Randomness comes from numpy's ``PCG64`` bit generator seeded explicitly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import Detection, DisplacementField, GridSpec, Heatmap, SizeMap, Tracklet, image_to_grid
from .dataset.annotations import AnnotationSet, BoxRecord, ImageRecord, _num
from .exceptions import SizeError, TrajectoryBoundsError, ValidationError
from .tracker import gate_radius, predict_prior

__all__ = [
    "PRNG_NAME",
    "KINDS",
    "TrajectorySpec",
    "TrajectoryPoint",
    "RenderObject",
    "gen_trajectory",
    "default_sigma",
    "render_objects",
    "render_frame",
    "render_sequence",
    "gt_annotations",
    "brute_force_assign",
    "spurious_scenario",
    "random_stream",
]

log = logging.getLogger(__name__)

PRNG_NAME = "numpy.random.PCG64"
KINDS = ("stationary", "linear", "circumnutation", "random_walk")
MAX_BRUTE_FORCE = 6


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "circumnutation"
    start: tuple[float, float] = (128.0, 128.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 0.0
    period: float = 60.0
    growth_rate: float = 0.0
    seed: int = 0
    frames: int = 100
    object_size: tuple[float, float] = (24.0, 24.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown trajectory kind {self.kind!r}; expected one of {KINDS}")
        if int(self.frames) != self.frames or self.frames <= 0:
            raise ValidationError(f"frames must be a positive integer, got {self.frames}")
        if self.kind == "circumnutation" and self.period < 2:
            raise ValidationError("circumnutation period must be >= 2 frames")
        if self.amplitude < 0:
            raise ValidationError("amplitude must be >= 0")
        if min(self.object_size) < 0:
            raise ValidationError("object size must be non-negative")


class TrajectoryPoint(NamedTuple):
    frame: int
    center: tuple[float, float]
    size: tuple[float, float]


def _center_bounds(size, grid: GridSpec):
    # whole box inside the image, and center on a valid pixel
    w, h = size
    lo = (w / 2, h / 2)
    hi = (min(grid.width_px - 1, grid.width_px - w / 2), min(grid.height_px - 1, grid.height_px - h / 2))
    if lo[0] > hi[0] or lo[1] > hi[1]:
        raise TrajectoryBoundsError(f"object {w}x{h} does not fit a {grid.width_px}x{grid.height_px} image")
    return lo, hi


def _raw_path(spec: TrajectorySpec) -> np.ndarray:
    t = np.arange(spec.frames, dtype=np.float64)
    x0, y0 = spec.start
    vx, vy = spec.velocity
    if spec.kind == "stationary":
        xs, ys = np.full_like(t, x0), np.full_like(t, y0)
    elif spec.kind == "linear":
        xs, ys = x0 + vx * t, y0 + vy * t
    elif spec.kind == "circumnutation":
        phase = 2 * np.pi * t / spec.period
        xs = x0 + spec.amplitude * np.cos(phase)
        ys = y0 + spec.amplitude * np.sin(phase) - spec.growth_rate * t
    else:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        steps = rng.normal(0.0, spec.amplitude, size=(spec.frames, 2))
        steps[0] = 0.0
        steps[1:] += (vx, vy - spec.growth_rate)
        walk = np.cumsum(steps, axis=0)
        xs, ys = x0 + walk[:, 0], y0 + walk[:, 1]
    return np.stack([xs, ys], axis=1)


def gen_trajectory(spec: TrajectorySpec, grid: GridSpec, clamp: bool = True) -> list[TrajectoryPoint]:
    """Per-frame centers and sizes for ``spec``.

    Centers are kept where the whole box fits inside the image. With
    ``clamp=False`` a center outside that region raises
    :class:`TrajectoryBoundsError`; otherwise it is clamped and a warning is
    logged with the number of affected frames.
    """
    size = (float(spec.object_size[0]), float(spec.object_size[1]))
    lo, hi = _center_bounds(size, grid)
    path = _raw_path(spec)
    clipped = np.clip(path, lo, hi)
    n_clamped = int(np.any(clipped != path, axis=1).sum())
    if n_clamped:
        if not clamp:
            first = int(np.argmax(np.any(clipped != path, axis=1)))
            raise TrajectoryBoundsError(
                f"trajectory leaves the image at frame {first} "
                f"({path[first, 0]:.2f}, {path[first, 1]:.2f}); {n_clamped} frames out of bounds"
            )
        log.warning("clamped %d of %d trajectory frames to image bounds", n_clamped, spec.frames)
    return [TrajectoryPoint(i, (float(x), float(y)), size) for i, (x, y) in enumerate(clipped)]


def default_sigma(size, grid: GridSpec) -> float:
    return max(1.0, min(size) / (6 * grid.downsample))


class RenderObject(NamedTuple):
    prev_center: tuple[float, float]
    cur_center: tuple[float, float]
    size: tuple[float, float]
    peak: float = 1.0
    class_id: int = 0


def render_objects(
    objects: Sequence[RenderObject], grid: GridSpec, sigma_cells: float | None = None
) -> tuple[Heatmap, SizeMap, DisplacementField]:
    """Splat each object as a Gaussian; overlapping splats combine by maximum.

    Size and displacement regressions are written within 3 sigma of each
    peak, owned by whichever object is brightest at that cell.
    """
    rows, cols = grid.shape
    heat = np.zeros((rows, cols, grid.classes), dtype=np.float32)
    sizes = np.zeros((rows, cols, 2), dtype=np.float32)
    disp = np.zeros((rows, cols, 2), dtype=np.float32)
    owner_val = np.full((rows, cols), -1.0)
    rr, cc = np.mgrid[0:rows, 0:cols]
    for obj in objects:
        sigma = default_sigma(obj.size, grid) if sigma_cells is None else sigma_cells
        if not sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {sigma}")
        if not 0.0 <= obj.peak <= 1.0:
            raise ValidationError(f"peak must lie in [0, 1], got {obj.peak}")
        pc, pr = image_to_grid(obj.cur_center, grid)
        image_to_grid(obj.prev_center, grid)
        d2 = (cc - pc) ** 2 + (rr - pr) ** 2
        g = obj.peak * np.exp(-d2 / (2 * sigma**2))
        heat[:, :, obj.class_id] = np.maximum(heat[:, :, obj.class_id], g.astype(np.float32))
        region = (d2 <= (3 * sigma) ** 2) & (g > owner_val)
        owner_val[region] = g[region]
        sizes[region] = obj.size
        disp[region] = (
            obj.cur_center[0] - obj.prev_center[0],
            obj.cur_center[1] - obj.prev_center[1],
        )
    return Heatmap(grid, heat), SizeMap(grid, sizes), DisplacementField(grid, disp)


def render_frame(prev_center, cur_center, size, grid: GridSpec, sigma_cells: float | None = None):
    """Tensors for a single object moving from ``prev_center`` to ``cur_center``."""
    return render_objects([RenderObject(prev_center, cur_center, size)], grid, sigma_cells)


def render_sequence(trajectory: Sequence[TrajectoryPoint], grid: GridSpec, sigma_cells: float | None = None):
    frames = []
    prev = trajectory[0].center if trajectory else None
    for point in trajectory:
        frames.append(render_frame(prev, point.center, point.size, grid, sigma_cells))
        prev = point.center
    return frames


def gt_annotations(
    trajectory: Sequence[TrajectoryPoint],
    grid: GridSpec,
    video_id: str = "synth",
    name_pattern: str = "frame_{:06d}.png",
) -> AnnotationSet:
    images, boxes = [], []
    for i, point in enumerate(trajectory):
        (cx, cy), (w, h) = point.center, point.size
        images.append(
            ImageRecord(i + 1, name_pattern.format(point.frame), grid.width_px, grid.height_px, point.frame, video_id)
        )
        boxes.append(BoxRecord(i + 1, i + 1, 1, (_num(cx - w / 2), _num(cy - h / 2), _num(w), _num(h))))
    return AnnotationSet(tuple(images), tuple(boxes))


def brute_force_assign(
    detections: Sequence[Detection],
    tracklets: Sequence[Tracklet],
    displacement: DisplacementField,
    gating_scale: float = 1.0,
) -> list[tuple[int, int]]:
    """Best gate-respecting matching by exhaustive enumeration.

    Among all partial matchings that pair a detection with a same-class
    tracklet inside its gate, pick the one with the most pairs, then the
    smallest total prior-to-tracklet distance, then the lexicographically
    smallest ``(detection index, tracklet id)`` list.
    """
    if len(detections) > MAX_BRUTE_FORCE or len(tracklets) > MAX_BRUTE_FORCE:
        raise SizeError(
            f"exhaustive assignment supports at most {MAX_BRUTE_FORCE} detections and tracklets, "
            f"got {len(detections)} and {len(tracklets)}"
        )
    options = []
    for det in detections:
        px, py = predict_prior(det, displacement)
        radius = gate_radius(det, gating_scale)
        row = []
        for t in tracklets:
            dist = math.hypot(t.last_center[0] - px, t.last_center[1] - py)
            if t.class_id == det.class_id and dist <= radius:
                row.append((t.id, dist))
        options.append(row)

    best_key, best = None, []

    def search(i, used, pairs, total):
        nonlocal best_key, best
        if i == len(detections):
            key = (-len(pairs), total, pairs)
            if best_key is None or key < best_key:
                best_key, best = key, list(pairs)
            return
        search(i + 1, used, pairs, total)
        for tid, dist in options[i]:
            if tid not in used:
                search(i + 1, used | {tid}, pairs + ((i, tid),), total + dist)

    search(0, frozenset(), (), 0.0)
    return best


def spurious_scenario(
    frames: int = 120,
    grid: GridSpec | None = None,
    spurious_peak: float = 0.35,
    weak_peak: float = 0.35,
    weak_every: int = 10,
):
    """Apex sequence plus a fixed low-confidence false positive.

    A stationary blob of confidence ``spurious_peak`` sits in a corner in
    every frame (think of a label card mistaken for an apex), and every
    ``weak_every``-th frame the real apex fades to ``weak_peak``. Returns
    ``(stream, annotations)``.
    """
    grid = grid or GridSpec(256, 256, 4)
    spec = TrajectorySpec(
        kind="circumnutation", start=(150.0, 150.0), amplitude=20.0, period=40.0,
        growth_rate=0.1, frames=frames, object_size=(24.0, 32.0),
    )
    traj = gen_trajectory(spec, grid)
    corner = (30.0, 30.0)
    stream = []
    prev = traj[0].center
    for p in traj:
        peak = weak_peak if weak_every and p.frame % weak_every == weak_every - 1 else 1.0
        stream.append(
            render_objects(
                [
                    RenderObject(prev, p.center, p.size, peak),
                    RenderObject(corner, corner, (20.0, 20.0), spurious_peak),
                ],
                grid,
            )
        )
        prev = p.center
    return stream, gt_annotations(traj, grid, video_id="spurious")


def random_stream(rng: np.random.Generator, grid: GridSpec, frames: int, max_objects: int = 4):
    """Frames with 0..max_objects blobs of random position, size and confidence."""
    stream = []
    for _ in range(frames):
        objects = []
        for _ in range(int(rng.integers(0, max_objects + 1))):
            size = (float(rng.uniform(8, 32)), float(rng.uniform(8, 32)))
            lo, hi = _center_bounds(size, grid)
            cur = (float(rng.uniform(lo[0], hi[0])), float(rng.uniform(lo[1], hi[1])))
            prev = (
                float(np.clip(cur[0] + rng.normal(0, 3), 0, grid.width_px - 1)),
                float(np.clip(cur[1] + rng.normal(0, 3), 0, grid.height_px - 1)),
            )
            objects.append(RenderObject(prev, cur, size, float(rng.uniform(0.05, 1.0))))
        stream.append(render_objects(objects, grid))
    return stream
