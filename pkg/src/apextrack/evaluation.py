"""Per-video metrics, threshold sweeps and trace output.

Center MSE is the mean, over frames that have both a ground-truth center and
at least one tracked detection, of the squared Euclidean distance between
the predicted and true centers, in full-resolution pixels. On frames with
several detections the most confident one is scored.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .core import Detection, GridSpec, TrackPoint, Tracklet, TrackTable
from .dataset.annotations import GroundTruthTrack
from .decoder import DEFAULT_TOP_K, DecodeConfig
from .exceptions import ValidationError
from .pipeline import Frame, track_stream
from .tracker import TrackerConfig

__all__ = [
    "EvalReport",
    "compute_metrics",
    "sweep_thresholds",
    "render_trace",
    "trace_csv",
    "trace_svg",
    "read_trace_csv",
    "table_from_trace",
    "format_report_table",
    "reports_to_jsonl",
    "reports_from_jsonl",
    "CSV_HEADER",
    "TABLE_COLUMNS",
]

CSV_HEADER = ("frame", "track_id", "x", "y", "confidence")
TABLE_COLUMNS = ("Video", "Center MSE", "Failed", "More Object", "Total Frames")
SWEEP_COLUMN = "Tracking Threshold"

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class EvalReport:
    video_id: str | int
    center_mse: float
    failed_frames: int
    more_object_frames: int
    total_frames: int
    threshold: float
    # frames that contributed to the MSE; center_mse is NaN when this is 0
    evaluated_frames: int = 0

    def __post_init__(self):
        if self.total_frames < 1:
            raise ValidationError("total_frames must be >= 1")
        if not 0 <= self.failed_frames <= self.total_frames:
            raise ValidationError("failed_frames out of range")
        if not 0 <= self.more_object_frames <= self.total_frames:
            raise ValidationError("more_object_frames out of range")
        if not (math.isnan(self.center_mse) or self.center_mse >= 0):
            raise ValidationError("center_mse must be >= 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError("threshold must lie in [0, 1]")

    def to_json(self) -> str:
        d = asdict(self)
        if math.isnan(d["center_mse"]):
            d["center_mse"] = None
        return json.dumps(d, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> EvalReport:
        d = json.loads(line)
        if d.get("center_mse") is None:
            d["center_mse"] = math.nan
        return cls(**d)


def compute_metrics(
    predicted: TrackTable,
    gt: GroundTruthTrack,
    total_frames: int,
    threshold: float,
) -> EvalReport:
    if total_frames <= 0:
        raise ValidationError(f"total_frames must be positive, got {total_frames}")
    by_frame = predicted.points_by_frame()
    late = [f for f in by_frame if not 0 <= f < total_frames]
    if late:
        raise ValidationError(
            f"predictions reference frame {min(late) if min(late) < 0 else max(late)} "
            f"outside 0..{total_frames - 1}"
        )
    truth = gt.by_frame()

    failed = more = evaluated = 0
    sq_sum = 0.0
    for frame in range(total_frames):
        points = by_frame.get(frame, [])
        if len(points) >= 2:
            more += 1
        if frame not in truth:
            continue
        if not points:
            failed += 1
            continue
        _, best = min(points, key=lambda tp: (-tp[1].confidence, tp[0]))
        gx, gy = truth[frame]
        sq_sum += (best.x - gx) ** 2 + (best.y - gy) ** 2
        evaluated += 1

    mse = sq_sum / evaluated if evaluated else math.nan
    return EvalReport(gt.video_id, mse, failed, more, total_frames, float(threshold), evaluated)


def sweep_thresholds(
    detection_stream: Sequence[Frame],
    gt: GroundTruthTrack,
    thresholds: Sequence[float],
    top_k: int = DEFAULT_TOP_K,
    tracker_config: TrackerConfig | None = None,
) -> list[EvalReport]:
    """Re-run decode, tracking and scoring once per threshold, in the given order."""
    if not thresholds:
        raise ValidationError("thresholds must not be empty")
    configs = [DecodeConfig(top_k=top_k, confidence_threshold=t) for t in thresholds]
    reports = []
    for cfg in configs:
        table = track_stream(detection_stream, cfg, tracker_config)
        reports.append(
            compute_metrics(table, gt, len(detection_stream), cfg.confidence_threshold)
        )
    return reports


def trace_csv(table: TrackTable) -> str:
    rows = []
    for t in table.all_tracklets():
        for p in t.history:
            rows.append((p.frame, t.id, p.x, p.y, p.confidence))
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for frame, tid, x, y, conf in rows:
        writer.writerow((frame, tid, repr(x), repr(y), repr(conf)))
    return buf.getvalue()


def _points_attr(points) -> str:
    return " ".join(f"{x!r},{y!r}" for x, y in points)


def trace_svg(table: TrackTable, gt: GroundTruthTrack | None, canvas: GridSpec) -> str:
    w, h = canvas.width_px, canvas.height_px
    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'  <rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
    ]
    if gt is not None and len(gt):
        lines.append(
            f'  <polyline id="gt" points="{_points_attr(e.center for e in gt.entries)}" '
            'fill="none" stroke="black" stroke-width="1" stroke-dasharray="4 2"/>'
        )
    for t in table.all_tracklets():
        color = _PALETTE[(t.id - 1) % len(_PALETTE)]
        lines.append(
            f'  <polyline id="track-{t.id}" points="{_points_attr(p.center for p in t.history)}" '
            f'fill="none" stroke="{color}" stroke-width="1"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_trace(
    table: TrackTable, gt: GroundTruthTrack | None, canvas: GridSpec
) -> tuple[str, str]:
    """Return ``(svg, csv)`` text for a tracked sequence."""
    return trace_svg(table, gt, canvas), trace_csv(table)


def read_trace_csv(text: str) -> list[tuple[int, int, float, float, float]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValidationError(f"trace CSV header must be {','.join(CSV_HEADER)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ValidationError(f"trace CSV line {lineno}: expected 5 fields")
        try:
            rows.append((int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4])))
        except ValueError:
            raise ValidationError(f"trace CSV line {lineno}: bad number") from None
    return rows


def table_from_trace(rows) -> TrackTable:
    """Rebuild a table (sizes unknown, all tracklets retired) from trace rows."""
    per_track: dict[int, list] = {}
    for frame, tid, x, y, conf in rows:
        per_track.setdefault(tid, []).append(TrackPoint(frame, x, y, conf))
    tracklets = []
    for tid, points in per_track.items():
        points.sort(key=lambda p: p.frame)
        last = points[-1]
        det = Detection((last.x, last.y), (0.0, 0.0), last.confidence)
        tracklets.append(Tracklet(tid, det, last.frame, tuple(points)))
    next_id = max(per_track, default=0) + 1
    return TrackTable(active=[], retired=sorted(tracklets, key=lambda t: t.id), next_id=next_id)


def _fmt_mse(value: float) -> str:
    return "n/a" if math.isnan(value) else f"{value:.9f}"


def format_report_table(reports: Sequence[EvalReport], with_threshold: bool = False) -> str:
    header = list(TABLE_COLUMNS) + ([SWEEP_COLUMN] if with_threshold else [])
    body = []
    for r in reports:
        row = [str(r.video_id), _fmt_mse(r.center_mse), str(r.failed_frames),
               str(r.more_object_frames), str(r.total_frames)]
        if with_threshold:
            row.append(f"{r.threshold:g}")
        body.append(row)
    widths = [max(len(c), *(len(row[i]) for row in body)) if body else len(c) for i, c in enumerate(header)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(header)).rstrip()]
    for row in body:
        lines.append("  ".join(v.rjust(widths[i]) if i else v.ljust(widths[i]) for i, v in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def reports_to_jsonl(reports: Sequence[EvalReport]) -> str:
    return "".join(r.to_json() + "\n" for r in reports)


def reports_from_jsonl(text: str) -> list[EvalReport]:
    return [EvalReport.from_json(line) for line in text.splitlines() if line.strip()]
