"""Peak extraction from center heatmaps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import Detection, Heatmap, SizeMap, grid_to_image
from .exceptions import ShapeError, ValidationError

__all__ = ["DecodeConfig", "Peak", "find_peaks", "decode"]

DEFAULT_THRESHOLD = 0.3
DEFAULT_TOP_K = 100

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class DecodeConfig:
    top_k: int = DEFAULT_TOP_K
    confidence_threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ValidationError(f"top_k must be a positive integer, got {self.top_k}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValidationError(
                f"confidence_threshold must lie in [0, 1], got {self.confidence_threshold}"
            )


class Peak(NamedTuple):
    cell: tuple[int, int]
    confidence: float
    class_id: int = 0


def _channel_peaks(values: np.ndarray) -> np.ndarray:
    """Flat row-major indices of the peaks of one ``(rows, cols)`` channel."""
    neighborhood_max = ndimage.maximum_filter(
        values, footprint=_EIGHT_CONNECTED, mode="constant", cval=-np.inf
    )
    candidates = values >= neighborhood_max
    # two adjacent candidates are each >= the other, hence equal: connected
    # components of the candidate mask are exactly the equal-valued plateaus
    labels, n = ndimage.label(candidates, structure=_EIGHT_CONNECTED)
    if n == 0:
        return np.empty(0, dtype=np.intp)
    flat = np.arange(values.size).reshape(values.shape)
    return np.asarray(
        ndimage.minimum(flat, labels=labels, index=np.arange(1, n + 1)), dtype=np.intp
    )


def find_peaks(heatmap: Heatmap) -> list[Peak]:
    """Local maxima of each class channel, one per plateau.

    A cell is a peak candidate when it is >= all eight neighbours (cells off
    the grid count as -inf). Each 8-connected group of candidates keeps only
    its lowest row-major cell. Output is sorted by confidence descending, then
    row-major index, then class.
    """
    grid = heatmap.grid
    found = []
    for c in range(grid.classes):
        channel = heatmap.values[:, :, c]
        for idx in _channel_peaks(channel):
            row, col = divmod(int(idx), grid.cols)
            found.append((-float(channel[row, col]), int(idx), c, (col, row)))
    found.sort()
    return [Peak(cell, -neg, c) for neg, _, c, cell in found]


def decode(heatmap: Heatmap, sizes: SizeMap, config: DecodeConfig | None = None) -> list[Detection]:
    config = config or DecodeConfig()
    if heatmap.grid.shape != sizes.grid.shape or heatmap.grid.downsample != sizes.grid.downsample:
        raise ShapeError(f"heatmap grid {heatmap.grid} does not match size grid {sizes.grid}")
    # compare in float32 so a stored 0.35 passes a 0.35 threshold
    threshold = np.float32(config.confidence_threshold)
    out = []
    for peak in find_peaks(heatmap):
        if np.float32(peak.confidence) < threshold:
            # peaks are sorted, nothing further can pass
            break
        col, row = peak.cell
        w, h = sizes.values[row, col]
        out.append(
            Detection(
                center=grid_to_image(peak.cell, heatmap.grid),
                size=(float(w), float(h)),
                confidence=peak.confidence,
                class_id=peak.class_id,
            )
        )
        if len(out) == config.top_k:
            break
    return out
