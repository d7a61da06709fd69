from .annotations import (
    AnnotationSet,
    BoxRecord,
    GroundTruthTrack,
    GTEntry,
    ImageRecord,
    assign_frame_indices,
    emit_coco,
    gt_tracks,
    parse_coco,
    parse_voc,
    render_voc,
)
from .tensorfile import load_tensor, read_tensor_file, save_tensor, write_tensor_file

__all__ = [
    "AnnotationSet",
    "BoxRecord",
    "GroundTruthTrack",
    "GTEntry",
    "ImageRecord",
    "assign_frame_indices",
    "emit_coco",
    "gt_tracks",
    "parse_coco",
    "parse_voc",
    "render_voc",
    "load_tensor",
    "read_tensor_file",
    "save_tensor",
    "write_tensor_file",
]
