"""Batch command line front end.

    apextrack convert VOC_DIR --out annotations.json
    apextrack synth --kind circumnutation --frames 200 --out synth/
    apextrack track synth/ --threshold 0.3 --out run/
    apextrack eval run/trace.csv synth/gt.json --threshold 0.3
    apextrack sweep synth/ synth/gt.json --thresholds 0.3,0.4

Every command computes all of its outputs before writing any of them and
exits non-zero on failure without touching the output paths. Each output
set comes with a JSON manifest recording the configuration and input digests.
Log verbosity is read from the ``ATRK_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
import tempfile
from pathlib import Path

from . import __version__
from .core import GridSpec, TrackTable
from .dataset import annotations as ann
from .dataset.tensorfile import read_tensor_file, write_tensor_file
from .decoder import DEFAULT_THRESHOLD, DEFAULT_TOP_K, DecodeConfig, decode
from .evaluation import (
    compute_metrics,
    format_report_table,
    read_trace_csv,
    render_trace,
    reports_to_jsonl,
    sweep_thresholds,
    table_from_trace,
)
from .exceptions import ApexTrackError, ShapeError
from .pipeline import check_frame
from .synth import PRNG_NAME, KINDS, TrajectorySpec, gen_trajectory, gt_annotations, render_sequence
from .tracker import TrackerConfig, associate_frame

log = logging.getLogger("apextrack")

FRAME_FILE = re.compile(r"^frame_(\d{6})\.(hm|sz|dp)\.atrk$")
TENSOR_SUFFIX = {"hm": 0, "sz": 1, "dp": 2}


class CommandError(ApexTrackError):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _manifest(command: str, config: dict, inputs: dict[str, bytes], outputs: dict[str, bytes]) -> bytes:
    doc = {
        "tool": "apextrack",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": [{"path": k, "sha256": _sha256(v)} for k, v in sorted(inputs.items())],
        "outputs": [{"path": k, "sha256": _sha256(v)} for k, v in sorted(outputs.items())],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def _write_all(files: dict[Path, bytes]) -> None:
    """Write each file through a temporary sibling and an atomic rename."""
    for path in files:
        path.parent.mkdir(parents=True, exist_ok=True)
    for path, data in files.items():
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


def _pair(text: str, sep: str = ","):
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two values separated by {sep!r}, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number pair: {text!r}") from None


def _dims(text: str):
    w, h = _pair(text, "x")
    if not (w.is_integer() and h.is_integer()):
        raise argparse.ArgumentTypeError(f"dimensions must be integers: {text!r}")
    return int(w), int(h)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _unit(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _unit_list(text: str) -> list[float]:
    values = [_unit(t) for t in text.split(",") if t.strip()]
    if not values:
        raise argparse.ArgumentTypeError("need at least one threshold")
    return values


# ---------------------------------------------------------------- convert

def cmd_convert(args) -> int:
    voc_dir = Path(args.voc_dir)
    if not voc_dir.is_dir():
        raise CommandError(f"{voc_dir} is not a directory")
    paths = sorted(p for p in voc_dir.iterdir() if p.suffix.lower() == ".xml")
    if not paths:
        raise CommandError(f"no .xml files in {voc_dir}")
    raw = {p.name: p.read_bytes() for p in paths}
    result = ann.parse_voc([raw[p.name] for p in paths], sources=[str(p) for p in paths])
    coco = ann.emit_coco(result).encode()
    out = Path(args.out)
    manifest = _manifest("convert", {}, raw, {out.name: coco})
    _write_all({out: coco, out.with_name(out.name + ".manifest.json"): manifest})
    print(f"wrote {out} ({len(result.images)} images, {len(result.boxes)} boxes)")
    return 0


# ---------------------------------------------------------------- tensors

def load_tensor_dir(tensor_dir: Path):
    """Read ``frame_%06d.{hm,sz,dp}.atrk`` triplets as ``(frame, (hm, sz, dp))`` pairs."""
    if not tensor_dir.is_dir():
        raise CommandError(f"{tensor_dir} is not a directory")
    found: dict[int, dict[str, Path]] = {}
    for p in tensor_dir.iterdir():
        m = FRAME_FILE.match(p.name)
        if m:
            found.setdefault(int(m.group(1)), {})[m.group(2)] = p
    if not found:
        raise CommandError(f"no frames in {tensor_dir}")
    frames, raw = [], {}
    for index in sorted(found):
        members = found[index]
        missing = sorted(set(TENSOR_SUFFIX) - set(members))
        if missing:
            raise CommandError(f"frame {index}: missing {', '.join(missing)} tensor")
        tensors = []
        for suffix in sorted(TENSOR_SUFFIX, key=TENSOR_SUFFIX.get):
            path = members[suffix]
            data = path.read_bytes()
            raw[path.name] = data
            try:
                tensors.append(read_tensor_file(data))
            except ApexTrackError as exc:
                raise CommandError(f"frame {index}: {path.name}: {exc}") from None
        try:
            check_frame(tuple(tensors), index)
        except ShapeError as exc:
            raise CommandError(str(exc)) from None
        frames.append((index, tuple(tensors)))
    grids = {f[1][0].grid for f in frames}
    if len(grids) > 1:
        first = frames[0][1][0].grid
        bad = next(i for i, f in frames if f[0].grid != first)
        raise CommandError(f"frame {bad}: grid differs from frame {frames[0][0]}")
    return frames, raw


def _decode_config(args):
    return DecodeConfig(top_k=args.top_k, confidence_threshold=args.threshold)


def _tracker_config(args):
    return TrackerConfig(gating_scale=args.gating_scale, memory_frames=args.memory_frames)


def _load_gt(path: Path, video=None):
    data = path.read_bytes()
    annotations = ann.parse_coco(data)
    tracks = ann.gt_tracks(annotations)
    videos = annotations.videos()
    if video is None:
        if len(videos) != 1:
            raise CommandError(f"{path} holds videos {videos}; choose one with --video")
        video = videos[0]
    matches = [t for t in tracks if str(t.video_id) == str(video)]
    if not matches:
        if str(video) not in map(str, videos):
            raise CommandError(f"video {video!r} not found in {path}")
        vid = next(v for v in videos if str(v) == str(video))
        matches = [ann.GroundTruthTrack(vid, (), frame_count=annotations.frame_count(vid))]
    if len(matches) > 1:
        raise CommandError(f"video {video!r} has boxes of several classes")
    return matches[0], data


def cmd_track(args) -> int:
    frames, raw = load_tensor_dir(Path(args.tensor_dir))
    dcfg, tcfg = _decode_config(args), _tracker_config(args)
    table = TrackTable()
    for index, (hm, sz, dp) in frames:
        table = associate_frame(decode(hm, sz, dcfg), table, dp, index, tcfg)
    gt = None
    if args.gt:
        gt, raw["gt:" + Path(args.gt).name] = _load_gt(Path(args.gt), args.video)
    svg, csv_text = render_trace(table, gt, frames[0][1][0].grid)
    out = Path(args.out)
    outputs = {"trace.csv": csv_text.encode(), "trace.svg": svg.encode()}
    config = {
        "threshold": dcfg.confidence_threshold,
        "top_k": dcfg.top_k,
        "gating_scale": tcfg.gating_scale,
        "memory_frames": tcfg.memory_frames,
    }
    outputs["manifest.json"] = _manifest("track", config, raw, outputs)
    _write_all({out / k: v for k, v in outputs.items()})
    print(f"tracked {len(frames)} frames into {len(table)} tracklets; wrote {out}")
    return 0


# ---------------------------------------------------------------- eval / sweep

def cmd_eval(args) -> int:
    trace_path = Path(args.trace_csv)
    trace_bytes = trace_path.read_bytes()
    rows = read_trace_csv(trace_bytes.decode())
    gt, gt_bytes = _load_gt(Path(args.gt_coco), args.video)
    total = gt.frame_count
    beyond = [r[0] for r in rows if not 0 <= r[0] < total]
    if beyond:
        raise CommandError(
            f"trace has frame {max(beyond)} but ground truth covers only {total} frames"
        )
    report = compute_metrics(table_from_trace(rows), gt, total, args.threshold)
    jsonl = reports_to_jsonl([report]).encode()
    out = Path(args.out)
    manifest = _manifest(
        "eval", {"threshold": args.threshold},
        {trace_path.name: trace_bytes, Path(args.gt_coco).name: gt_bytes}, {out.name: jsonl},
    )
    _write_all({out: jsonl, out.with_name(out.name + ".manifest.json"): manifest})
    sys.stdout.write(format_report_table([report]))
    return 0


def cmd_sweep(args) -> int:
    frames, raw = load_tensor_dir(Path(args.tensor_dir))
    indices = [i for i, _ in frames]
    if indices != list(range(len(frames))):
        raise CommandError("sweep needs contiguous frames numbered from 0")
    gt, gt_bytes = _load_gt(Path(args.gt_coco), args.video)
    if gt.frame_count != len(frames):
        raise CommandError(
            f"tensor directory has {len(frames)} frames but ground truth has {gt.frame_count}"
        )
    raw["gt:" + Path(args.gt_coco).name] = gt_bytes
    reports = sweep_thresholds(
        [f for _, f in frames], gt, args.thresholds, top_k=args.top_k, tracker_config=_tracker_config(args)
    )
    jsonl = reports_to_jsonl(reports).encode()
    out = Path(args.out)
    config = {
        "thresholds": args.thresholds,
        "top_k": args.top_k,
        "gating_scale": args.gating_scale,
        "memory_frames": args.memory_frames,
    }
    manifest = _manifest("sweep", config, raw, {out.name: jsonl})
    _write_all({out: jsonl, out.with_name(out.name + ".manifest.json"): manifest})
    sys.stdout.write(format_report_table(reports, with_threshold=True))
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    w, h = args.grid
    grid = GridSpec(w, h, args.downsample)
    spec = TrajectorySpec(
        kind=args.kind,
        start=args.start if args.start is not None else (w / 2, h / 2),
        velocity=args.velocity,
        amplitude=args.amplitude,
        period=args.period,
        growth_rate=args.growth_rate,
        seed=args.seed,
        frames=args.frames,
        object_size=args.size,
    )
    traj = gen_trajectory(spec, grid, clamp=args.clamp)
    stream = render_sequence(traj, grid, args.sigma)
    outputs = {}
    for point, (hm, sz, dp) in zip(traj, stream):
        for suffix, tensor in (("hm", hm), ("sz", sz), ("dp", dp)):
            outputs[f"frame_{point.frame:06d}.{suffix}.atrk"] = write_tensor_file(tensor)
    outputs["gt.json"] = ann.emit_coco(gt_annotations(traj, grid, video_id=args.video_id)).encode()
    config = {
        "kind": spec.kind,
        "start": list(spec.start),
        "velocity": list(spec.velocity),
        "amplitude": spec.amplitude,
        "period": spec.period,
        "growth_rate": spec.growth_rate,
        "seed": spec.seed,
        "prng": PRNG_NAME,
        "frames": spec.frames,
        "object_size": list(spec.object_size),
        "grid": [w, h],
        "downsample": args.downsample,
        "sigma": args.sigma,
        "clamp": args.clamp,
        "video_id": args.video_id,
    }
    outputs["manifest.json"] = _manifest("synth", config, {}, outputs)
    out = Path(args.out)
    _write_all({out / k: v for k, v in outputs.items()})
    print(f"wrote {spec.frames} frames to {out}")
    return 0


# ---------------------------------------------------------------- parser

def _add_decode_flags(p, with_threshold=True):
    if with_threshold:
        p.add_argument("--threshold", type=_unit, default=DEFAULT_THRESHOLD,
                       help="minimum detection confidence (default %(default)s)")
    p.add_argument("--top-k", type=_positive_int, default=DEFAULT_TOP_K)
    p.add_argument("--gating-scale", type=float, default=1.0)
    p.add_argument("--memory-frames", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apextrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="Pascal VOC XML directory to COCO JSON")
    p.add_argument("voc_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("track", help="decode and track a directory of ATRK frame triplets")
    p.add_argument("tensor_dir")
    _add_decode_flags(p)
    p.add_argument("--gt", help="COCO ground truth drawn as a dashed trace")
    p.add_argument("--video")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a trace CSV against COCO ground truth")
    p.add_argument("trace_csv")
    p.add_argument("gt_coco")
    p.add_argument("--threshold", type=_unit, default=DEFAULT_THRESHOLD,
                   help="threshold the trace was produced with, recorded in the report")
    p.add_argument("--video")
    p.add_argument("--out", default="report.jsonl")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="re-run decode/track/eval for several thresholds")
    p.add_argument("tensor_dir")
    p.add_argument("gt_coco")
    p.add_argument("--thresholds", type=_unit_list, default=[0.3, 0.4])
    _add_decode_flags(p, with_threshold=False)
    p.add_argument("--video")
    p.add_argument("--out", default="sweep.jsonl")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="render a synthetic trajectory to ATRK tensors and COCO GT")
    p.add_argument("--kind", choices=KINDS, default="circumnutation")
    p.add_argument("--start", type=_pair, help="X,Y start center (default image center)")
    p.add_argument("--velocity", type=_pair, default=(0.0, 0.0))
    p.add_argument("--amplitude", type=float, default=20.0)
    p.add_argument("--period", type=float, default=60.0)
    p.add_argument("--growth-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=_positive_int, default=100)
    p.add_argument("--size", type=_dims, default=(24, 32), help="object WxH in pixels")
    p.add_argument("--grid", type=_dims, default=(256, 256), help="image WxH in pixels")
    p.add_argument("--downsample", type=_positive_int, default=4)
    p.add_argument("--sigma", type=float, default=None, help="Gaussian sigma in grid cells")
    p.add_argument("--clamp", action="store_true", help="clamp out-of-bounds centers instead of failing")
    p.add_argument("--video-id", default="synth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ATRK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ApexTrackError, OSError) as exc:
        print(f"apextrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
