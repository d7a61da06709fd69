"""Greedy, displacement-guided association of detections into tracklets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Detection, DisplacementField, Tracklet, TrackTable
from .exceptions import OrderingError, ValidationError

__all__ = [
    "TrackerConfig",
    "predict_prior",
    "gate_radius",
    "detection_order",
    "greedy_match",
    "associate_frame",
    "run_sequence",
]


@dataclass(frozen=True)
class TrackerConfig:
    gating_scale: float = 1.0
    memory_frames: int = 1

    def __post_init__(self):
        if not self.gating_scale > 0:
            raise ValidationError(f"gating_scale must be > 0, got {self.gating_scale}")
        if int(self.memory_frames) != self.memory_frames or self.memory_frames < 1:
            raise ValidationError(f"memory_frames must be an integer >= 1, got {self.memory_frames}")


def predict_prior(detection: Detection, displacement: DisplacementField) -> tuple[float, float]:
    """Where the detected object sat in the previous frame."""
    x, y = detection.center
    dx, dy = displacement.at(x, y)
    return (x - dx, y - dy)


def gate_radius(detection: Detection, gating_scale: float = 1.0) -> float:
    w, h = detection.size
    return gating_scale * math.sqrt(w * h)


def detection_order(detections: Sequence[Detection]) -> list[int]:
    """Indices in processing order: confidence descending, then row-major center."""

    def key(i):
        d = detections[i]
        return (-d.confidence, d.center[1], d.center[0], d.class_id, d.size[1], d.size[0])

    return sorted(range(len(detections)), key=key)


def greedy_match(
    detections: Sequence[Detection],
    tracklets: Sequence[Tracklet],
    displacement: DisplacementField,
    gating_scale: float = 1.0,
) -> list[tuple[int, int]]:
    """Greedy assignment as ``(detection index, tracklet id)`` pairs.

    Each detection, strongest first, takes the nearest still-free tracklet of
    its class whose last center lies within the gate around the detection's
    predicted prior position.
    """
    free = {t.id: t for t in tracklets}
    pairs = []
    for i in detection_order(detections):
        det = detections[i]
        px, py = predict_prior(det, displacement)
        radius = gate_radius(det, gating_scale)
        best = None
        for t in free.values():
            if t.class_id != det.class_id:
                continue
            tx, ty = t.last_center
            dist = math.hypot(tx - px, ty - py)
            if dist <= radius and (best is None or (dist, t.id) < best):
                best = (dist, t.id)
        if best is not None:
            pairs.append((i, best[1]))
            del free[best[1]]
    return pairs


def associate_frame(
    detections: Sequence[Detection],
    table: TrackTable,
    displacement: DisplacementField,
    frame: int,
    config: TrackerConfig | None = None,
) -> TrackTable:
    """Fold one frame of detections into ``table`` and return the new table.

    The input table is left untouched.
    """
    config = config or TrackerConfig()
    for t in table.active:
        if frame <= t.last_frame:
            raise OrderingError(
                f"frame {frame} is not after tracklet {t.id}'s last frame {t.last_frame}"
            )
    for det in detections:
        det.check_inside(displacement.grid)

    active, retired = [], list(table.retired)
    for t in table.active:
        # unmatched for more than memory_frames frames once this one is counted
        (retired if frame - t.last_frame > config.memory_frames else active).append(t)

    pairs = dict(greedy_match(detections, active, displacement, config.gating_scale))
    by_id = {t.id: t for t in active}
    for i, track_id in pairs.items():
        by_id[track_id] = by_id[track_id].extend(detections[i], frame)

    next_id = table.next_id
    for i in detection_order(detections):
        if i in pairs:
            continue
        by_id[next_id] = Tracklet.start(next_id, detections[i], frame)
        next_id += 1

    return TrackTable(
        active=sorted(by_id.values(), key=lambda t: t.id),
        retired=sorted(retired, key=lambda t: t.id),
        next_id=next_id,
    )


def run_sequence(
    frames: Iterable[tuple[Sequence[Detection], DisplacementField]],
    config: TrackerConfig | None = None,
) -> TrackTable:
    """Track a whole sequence; frame indices are list positions starting at 0."""
    table = TrackTable()
    for index, (detections, displacement) in enumerate(frames):
        table = associate_frame(detections, table, displacement, index, config)
    return table
