"""Center-point decoding, greedy tracking and evaluation for plant apex videos."""

from .core import (
    Detection,
    DisplacementField,
    GridSpec,
    Heatmap,
    SizeMap,
    TrackPoint,
    Tracklet,
    TrackTable,
    grid_to_image,
    image_to_grid,
)
from .decoder import DecodeConfig, decode, find_peaks
from .estimators import ApexTracker, GreedyTracker, PeakDecoder
from .evaluation import EvalReport, compute_metrics, render_trace, sweep_thresholds
from .tracker import TrackerConfig, associate_frame, predict_prior, run_sequence

__version__ = "0.1.0"

__all__ = [
    "Detection",
    "DisplacementField",
    "GridSpec",
    "Heatmap",
    "SizeMap",
    "TrackPoint",
    "Tracklet",
    "TrackTable",
    "grid_to_image",
    "image_to_grid",
    "DecodeConfig",
    "decode",
    "find_peaks",
    "ApexTracker",
    "GreedyTracker",
    "PeakDecoder",
    "EvalReport",
    "compute_metrics",
    "render_trace",
    "sweep_thresholds",
    "TrackerConfig",
    "associate_frame",
    "predict_prior",
    "run_sequence",
]
