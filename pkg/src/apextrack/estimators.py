"""scikit-learn compatible wrappers around the decode and tracking functions.

``X`` is always a sequence of frames. For :class:`PeakDecoder` a frame is a
``(Heatmap, SizeMap)`` pair or a full ``(Heatmap, SizeMap,
DisplacementField)`` triple; for :class:`GreedyTracker` it is a
``(detections, DisplacementField)`` pair; :class:`ApexTracker` takes the
triples. Hyper-parameters live in ``__init__`` only, so ``get_params``,
``set_params``, ``clone`` and grid search work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import Detection, DisplacementField, Heatmap, SizeMap
from .dataset.annotations import GroundTruthTrack
from .decoder import DEFAULT_THRESHOLD, DEFAULT_TOP_K, DecodeConfig, decode
from .evaluation import compute_metrics
from .exceptions import ValidationError
from .pipeline import check_frame, track_stream
from .tracker import TrackerConfig, run_sequence

__all__ = ["PeakDecoder", "GreedyTracker", "ApexTracker", "check_stream", "check_detection_frames"]


def check_stream(X, require_displacement=True):
    """Validate a sequence of per-frame tensors and return it as a list."""
    if isinstance(X, (Heatmap, SizeMap, DisplacementField)):
        raise ValidationError("expected a sequence of frames, got a single tensor")
    frames = list(X)
    n = 3 if require_displacement else 2
    for i, frame in enumerate(frames):
        if not isinstance(frame, tuple) or len(frame) < n:
            raise ValidationError(f"frame {i}: expected a tuple of {n} tensors")
        hm, sz = frame[0], frame[1]
        if not isinstance(hm, Heatmap) or not isinstance(sz, SizeMap):
            raise ValidationError(f"frame {i}: expected (Heatmap, SizeMap, ...)")
        if require_displacement:
            if not isinstance(frame[2], DisplacementField):
                raise ValidationError(f"frame {i}: third element must be a DisplacementField")
            check_frame(frame[:3], i)
    return frames


def check_detection_frames(X):
    frames = list(X)
    for i, frame in enumerate(frames):
        if not isinstance(frame, tuple) or len(frame) != 2:
            raise ValidationError(f"frame {i}: expected (detections, DisplacementField)")
        dets, dp = frame
        if not isinstance(dp, DisplacementField):
            raise ValidationError(f"frame {i}: second element must be a DisplacementField")
        if not all(isinstance(d, Detection) for d in dets):
            raise ValidationError(f"frame {i}: detections must be Detection instances")
    return frames


class PeakDecoder(TransformerMixin, BaseEstimator):
    """Turn heatmap/size frames into per-frame detection lists."""

    def __init__(self, threshold=DEFAULT_THRESHOLD, top_k=DEFAULT_TOP_K):
        self.threshold = threshold
        self.top_k = top_k

    def fit(self, X, y=None):
        self.config_ = DecodeConfig(top_k=self.top_k, confidence_threshold=self.threshold)
        check_stream(X, require_displacement=False)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        frames = check_stream(X, require_displacement=False)
        return [decode(f[0], f[1], self.config_) for f in frames]


class GreedyTracker(BaseEstimator):
    """Associate per-frame detections into tracklets.

    ``fit`` runs the whole sequence and stores the resulting table in
    ``table_``; ``predict`` returns, for every frame, the track ids observed
    there.
    """

    def __init__(self, gating_scale=1.0, memory_frames=1):
        self.gating_scale = gating_scale
        self.memory_frames = memory_frames

    def fit(self, X, y=None):
        frames = check_detection_frames(X)
        config = TrackerConfig(self.gating_scale, self.memory_frames)
        self.table_ = run_sequence(frames, config)
        self.n_frames_ = len(frames)
        return self

    def predict(self, X=None):
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "table_")
        ids = [[] for _ in range(self.n_frames_)]
        for t in self.table_.all_tracklets():
            for p in t.history:
                ids[p.frame].append(t.id)
        return ids

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()


class ApexTracker(BaseEstimator):
    """Decode + track + score in one estimator.

    ``predict`` gives an ``(n_frames, 2)`` array of the most confident tracked
    center per frame, NaN where nothing was detected. ``score`` is the
    negated center MSE so that larger is better, as scikit-learn expects.
    """

    def __init__(self, threshold=DEFAULT_THRESHOLD, top_k=DEFAULT_TOP_K, gating_scale=1.0, memory_frames=1):
        self.threshold = threshold
        self.top_k = top_k
        self.gating_scale = gating_scale
        self.memory_frames = memory_frames

    def _configs(self):
        return (
            DecodeConfig(top_k=self.top_k, confidence_threshold=self.threshold),
            TrackerConfig(self.gating_scale, self.memory_frames),
        )

    def fit(self, X, y=None):
        frames = check_stream(X)
        self.table_ = track_stream(frames, *self._configs())
        self.n_frames_ = len(frames)
        return self

    def predict(self, X=None):
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "table_")
        out = np.full((self.n_frames_, 2), np.nan)
        conf = np.full(self.n_frames_, -np.inf)
        # ids ascend, so strict > keeps the lowest id on confidence ties
        for t in self.table_.all_tracklets():
            for p in t.history:
                if p.confidence > conf[p.frame]:
                    conf[p.frame] = p.confidence
                    out[p.frame] = p.center
        return out

    def evaluate(self, X, gt: GroundTruthTrack):
        frames = check_stream(X)
        table = track_stream(frames, *self._configs())
        return compute_metrics(table, gt, len(frames), self.threshold)

    def score(self, X, y):
        report = self.evaluate(X, y)
        return -report.center_mse
