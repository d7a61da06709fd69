"""Instance generators shared by unit and acceptance tests."""

import math

import numpy as np

from apextrack.core import Detection, DisplacementField, GridSpec, Tracklet, image_to_grid


def _far_from(p, others, dist):
    return all(math.hypot(p[0] - q[0], p[1] - q[1]) > dist for q in others)


def well_separated_instance(rng, grid=None, max_objects=4, max_motion=4.0, prior_noise=0.0):
    """Tracklets, shuffled detections and a displacement field.

    Tracklet centers are more than ``2 * kappa + 2 * max_motion`` apart, so
    every detection's prior has at most one tracklet inside its gate. Some
    tracklets get no detection and some detections are new objects.
    ``prior_noise`` (a fraction of kappa, < 0.5) perturbs the displacement
    so priors no longer coincide exactly with tracklet centers.
    """
    grid = grid or GridSpec(256, 256, 4)
    size = (float(rng.uniform(8, 24)), float(rng.uniform(8, 24)))
    kappa = math.sqrt(size[0] * size[1])
    sep = 2 * kappa + 2 * max_motion + 1
    pad = kappa + max_motion + 1
    n_tracks = int(rng.integers(0, max_objects + 1))
    n_new = int(rng.integers(0, max_objects - n_tracks + 1))
    points = []
    while len(points) < n_tracks + n_new:
        p = (float(rng.uniform(pad, grid.width_px - pad)), float(rng.uniform(pad, grid.height_px - pad)))
        if _far_from(p, points, sep):
            points.append(p)
    track_pts, new_pts = points[:n_tracks], points[n_tracks:]

    tracklets = [
        Tracklet.start(i + 1, Detection(p, size, float(rng.uniform(0.3, 1.0))), 0)
        for i, p in enumerate(track_pts)
    ]
    field = np.zeros((grid.rows, grid.cols, 2), dtype=np.float32)
    dets = []
    for t in tracklets:
        if rng.random() < 0.25:
            continue
        motion = rng.uniform(-max_motion, max_motion, size=2)
        center = (t.last_center[0] + motion[0], t.last_center[1] + motion[1])
        # exact field value recovers the previous center up to float32 rounding
        d = np.float32(motion)
        if prior_noise:
            ang = rng.uniform(0, 2 * np.pi)
            d = d + np.float32(prior_noise * kappa * np.array([np.cos(ang), np.sin(ang)]))
        col, row = image_to_grid(center, grid)
        field[row, col] = d
        dets.append(Detection(center, size, float(rng.uniform(0.3, 1.0))))
    for p in new_pts:
        dets.append(Detection(p, size, float(rng.uniform(0.3, 1.0))))
    order = rng.permutation(len(dets))
    dets = [dets[i] for i in order]
    return dets, tracklets, DisplacementField(grid, field)


def naive_metrics(rows, gt_centers, total_frames):
    """Reference metric loop over raw ``(frame, track_id, x, y, conf)`` rows.

    Returns ``(mse, failed, more, evaluated)``; mse is NaN with nothing evaluated.
    """
    failed = more = evaluated = 0
    total = 0.0
    for f in range(total_frames):
        here = [r for r in rows if r[0] == f]
        if len(here) > 1:
            more += 1
        if f not in gt_centers:
            continue
        if len(here) == 0:
            failed += 1
            continue
        best = here[0]
        for r in here[1:]:
            if r[4] > best[4] or (r[4] == best[4] and r[1] < best[1]):
                best = r
        dx = best[2] - gt_centers[f][0]
        dy = best[3] - gt_centers[f][1]
        total += dx * dx + dy * dy
        evaluated += 1
    return (total / evaluated if evaluated else float("nan")), failed, more, evaluated


def random_trace_and_gt(rng, total_frames=None):
    """Random trace rows (with gaps and multi-object frames) and a GT track with holes."""
    from apextrack.dataset.annotations import GroundTruthTrack, GTEntry

    total_frames = total_frames or int(rng.integers(1, 60))
    n_tracks = int(rng.integers(0, 4))
    rows = []
    for tid in range(1, n_tracks + 1):
        start = int(rng.integers(0, total_frames))
        stop = int(rng.integers(start, total_frames)) + 1
        for f in range(start, stop):
            if rng.random() < 0.8:
                rows.append((f, tid, float(rng.uniform(0, 640)), float(rng.uniform(0, 480)),
                             float(rng.choice([0.5, 0.75, rng.uniform(0.3, 1.0)]))))
    entries = [
        GTEntry(f, (float(rng.uniform(0, 640)), float(rng.uniform(0, 480))), (20.0, 20.0))
        for f in range(total_frames)
        if rng.random() < 0.9
    ]
    return rows, GroundTruthTrack("rand", tuple(entries), frame_count=total_frames), total_frames
