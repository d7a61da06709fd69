"""Decode + track composition over a stream of per-frame network outputs."""

from __future__ import annotations

from typing import Sequence

from .core import Detection, DisplacementField, Heatmap, SizeMap, TrackTable
from .decoder import DecodeConfig, decode
from .exceptions import ShapeError
from .tracker import TrackerConfig, run_sequence

Frame = tuple[Heatmap, SizeMap, DisplacementField]

__all__ = ["Frame", "check_frame", "decode_stream", "track_stream"]


def check_frame(frame: Frame, index: int | None = None) -> None:
    hm, sz, dp = frame
    grids = {hm.grid.shape, sz.grid.shape, dp.grid.shape}
    downs = {hm.grid.downsample, sz.grid.downsample, dp.grid.downsample}
    if len(grids) != 1 or len(downs) != 1:
        where = "" if index is None else f"frame {index}: "
        raise ShapeError(f"{where}heatmap, size and displacement grids disagree")


def decode_stream(stream: Sequence[Frame], config: DecodeConfig | None = None) -> list[list[Detection]]:
    out = []
    for i, frame in enumerate(stream):
        check_frame(frame, i)
        out.append(decode(frame[0], frame[1], config))
    return out


def track_stream(
    stream: Sequence[Frame],
    decode_config: DecodeConfig | None = None,
    tracker_config: TrackerConfig | None = None,
) -> TrackTable:
    detections = decode_stream(stream, decode_config)
    return run_sequence(zip(detections, (f[2] for f in stream)), tracker_config)
