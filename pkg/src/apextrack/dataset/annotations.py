"""Pascal VOC / COCO annotation conversion and ground-truth track extraction.

VOC boxes are 1-based and inclusive (``xmin=1`` is the first pixel column);
COCO boxes are 0-based ``[x, y, w, h]``. Converting ``(xmin, ymin, xmax, ymax)``
gives ``(xmin - 1, ymin - 1, xmax - xmin + 1, ymax - ymin + 1)``.

Frame order inside a video is taken from file names: when every name carries
a number, the last run of digits in the stem sorts the frames, otherwise the
names sort lexicographically. Frame indices are 0-based ranks in that order.
"""

from __future__ import annotations

import json
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import PurePath
from typing import NamedTuple, Sequence

from ..exceptions import AmbiguityError, AnnotationParseError, SchemaError, ValidationError

__all__ = [
    "ImageRecord",
    "BoxRecord",
    "AnnotationSet",
    "GroundTruthTrack",
    "GTEntry",
    "parse_voc",
    "render_voc",
    "emit_coco",
    "parse_coco",
    "gt_tracks",
    "assign_frame_indices",
]

CATEGORY = {"id": 1, "name": "apex"}
DEFAULT_VIDEO = "0"

_DIGITS = re.compile(r"(\d+)")


class ImageRecord(NamedTuple):
    image_id: int
    file_name: str
    width: int
    height: int
    frame_index: int
    video_id: str | int


class BoxRecord(NamedTuple):
    annotation_id: int
    image_id: int
    class_id: int
    bbox: tuple[float, float, float, float]


def _num(value):
    """Keep integral numbers as ``int`` so JSON output stays stable across round trips."""
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"non-finite coordinate {value}")
    return int(value) if value.is_integer() else value


@dataclass(frozen=True)
class AnnotationSet:
    images: tuple[ImageRecord, ...] = ()
    boxes: tuple[BoxRecord, ...] = ()

    def __post_init__(self):
        images = tuple(ImageRecord(*im) for im in self.images)
        boxes = tuple(
            BoxRecord(b[0], b[1], b[2], tuple(_num(v) for v in b[3])) for b in self.boxes
        )
        by_id = {}
        for im in images:
            if im.image_id in by_id:
                raise ValidationError(f"duplicate image id {im.image_id}")
            if im.width <= 0 or im.height <= 0:
                raise ValidationError(f"image {im.image_id} has non-positive size")
            by_id[im.image_id] = im
        seen = set()
        for b in boxes:
            if b.annotation_id in seen:
                raise ValidationError(f"duplicate annotation id {b.annotation_id}")
            seen.add(b.annotation_id)
            im = by_id.get(b.image_id)
            if im is None:
                raise ValidationError(
                    f"annotation {b.annotation_id} references missing image {b.image_id}"
                )
            x, y, w, h = b.bbox
            if w < 0 or h < 0:
                raise ValidationError(f"annotation {b.annotation_id} has negative extent")
            if x < 0 or y < 0 or x + w > im.width or y + h > im.height:
                raise ValidationError(
                    f"annotation {b.annotation_id} bbox {b.bbox} exceeds image "
                    f"{im.width}x{im.height}"
                )
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "boxes", boxes)

    def image(self, image_id: int) -> ImageRecord:
        for im in self.images:
            if im.image_id == image_id:
                return im
        raise KeyError(image_id)

    def videos(self) -> list:
        return sorted({im.video_id for im in self.images}, key=str)

    def frame_count(self, video_id) -> int:
        frames = [im.frame_index for im in self.images if im.video_id == video_id]
        if not frames:
            raise KeyError(video_id)
        return max(frames) + 1


def _frame_key_fn(names: Sequence[str]):
    stems = [PurePath(n).stem for n in names]
    if all(_DIGITS.search(s) for s in stems):
        return lambda name: (int(_DIGITS.findall(PurePath(name).stem)[-1]), name)
    return lambda name: (0, name)


def assign_frame_indices(file_names: Sequence[str]) -> list[int]:
    """0-based frame index of each name under the file-name ordering rule."""
    key = _frame_key_fn(file_names)
    order = sorted(range(len(file_names)), key=lambda i: (key(file_names[i]), i))
    ranks = [0] * len(file_names)
    for rank, i in enumerate(order):
        ranks[i] = rank
    return ranks


def _frames_per_video(entries) -> dict[int, int]:
    """Map position -> frame index given ``(position, file_name, video_id)`` entries."""
    groups: dict = {}
    for pos, name, video in entries:
        groups.setdefault(video, []).append((pos, name))
    out = {}
    for members in groups.values():
        ranks = assign_frame_indices([name for _, name in members])
        for (pos, _), rank in zip(members, ranks):
            out[pos] = rank
    return out


def _text(node, path, index, source, required=True):
    child = node.find(path)
    if child is None or child.text is None or not child.text.strip():
        if required:
            raise ValidationError(_where(index, source) + f"missing <{path}> element")
        return None
    return child.text.strip()


def _where(index, source):
    return f"{source}: " if source is not None else f"document {index}: "


def parse_voc(
    xml_documents: Sequence[str | bytes],
    sources: Sequence[str] | None = None,
    label_map: dict[str, int] | None = None,
) -> AnnotationSet:
    """Parse VOC XML documents into an :class:`AnnotationSet`.

    Image and annotation ids count up from 1 in input order. ``label_map``
    maps object names to class ids; when omitted every object is an apex
    (class 1). ``sources`` only feeds error messages.
    """
    parsed = []
    for index, doc in enumerate(xml_documents):
        source = sources[index] if sources is not None else None
        try:
            root = ET.fromstring(doc)
        except ET.ParseError as exc:
            raise AnnotationParseError(f"malformed XML ({exc})", index, source) from None
        if root.tag != "annotation":
            raise AnnotationParseError(f"root element is <{root.tag}>, expected <annotation>", index, source)
        size = root.find("size")
        if size is None:
            raise ValidationError(_where(index, source) + "missing <size> element")
        try:
            width = int(float(_text(size, "width", index, source)))
            height = int(float(_text(size, "height", index, source)))
        except ValueError:
            raise ValidationError(_where(index, source) + "non-numeric image size") from None
        file_name = _text(root, "filename", index, source, required=False) or f"{index:06d}.jpg"
        video = _text(root, "folder", index, source, required=False) or DEFAULT_VIDEO

        objects = []
        for obj in root.findall("object"):
            name = _text(obj, "name", index, source, required=False) or CATEGORY["name"]
            if label_map is None:
                class_id = CATEGORY["id"]
            elif name in label_map:
                class_id = label_map[name]
            else:
                raise ValidationError(_where(index, source) + f"unknown object label {name!r}")
            box = obj.find("bndbox")
            if box is None:
                raise ValidationError(_where(index, source) + "object without <bndbox>")
            try:
                xmin, ymin, xmax, ymax = (
                    _num(_text(box, k, index, source)) for k in ("xmin", "ymin", "xmax", "ymax")
                )
            except ValueError as exc:
                if isinstance(exc, ValidationError):
                    raise
                raise ValidationError(_where(index, source) + "non-numeric bndbox") from None
            if xmax < xmin or ymax < ymin:
                raise ValidationError(
                    _where(index, source)
                    + f"bndbox ({xmin}, {ymin}, {xmax}, {ymax}) has max < min"
                )
            objects.append((class_id, (xmin - 1, ymin - 1, xmax - xmin + 1, ymax - ymin + 1)))
        parsed.append((file_name, width, height, video, objects))

    frames = _frames_per_video((i, p[0], p[3]) for i, p in enumerate(parsed))
    images, boxes = [], []
    for i, (file_name, width, height, video, objects) in enumerate(parsed):
        image_id = i + 1
        images.append(ImageRecord(image_id, file_name, width, height, frames[i], video))
        for class_id, bbox in objects:
            boxes.append(BoxRecord(len(boxes) + 1, image_id, class_id, bbox))
    try:
        return AnnotationSet(tuple(images), tuple(boxes))
    except ValidationError as exc:
        raise ValidationError(f"invalid annotations: {exc}") from None


def render_voc(annotations: AnnotationSet, label_names: dict[int, str] | None = None) -> list[str]:
    """One VOC XML document per image, inverse of :func:`parse_voc`."""
    names = label_names or {CATEGORY["id"]: CATEGORY["name"]}
    docs = []
    for im in annotations.images:
        root = ET.Element("annotation")
        ET.SubElement(root, "folder").text = str(im.video_id)
        ET.SubElement(root, "filename").text = im.file_name
        size = ET.SubElement(root, "size")
        ET.SubElement(size, "width").text = str(im.width)
        ET.SubElement(size, "height").text = str(im.height)
        ET.SubElement(size, "depth").text = "3"
        for b in annotations.boxes:
            if b.image_id != im.image_id:
                continue
            obj = ET.SubElement(root, "object")
            ET.SubElement(obj, "name").text = names.get(b.class_id, str(b.class_id))
            box = ET.SubElement(obj, "bndbox")
            x, y, w, h = b.bbox
            for key, value in zip(("xmin", "ymin", "xmax", "ymax"), (x + 1, y + 1, x + w, y + h)):
                ET.SubElement(box, key).text = repr(_num(value))
        docs.append(ET.tostring(root, encoding="unicode"))
    return docs


def emit_coco(annotations: AnnotationSet) -> str:
    images = [
        {
            "id": im.image_id,
            "file_name": im.file_name,
            "width": im.width,
            "height": im.height,
            "frame_index": im.frame_index,
            "video_id": im.video_id,
        }
        for im in annotations.images
    ]
    anns = []
    for b in annotations.boxes:
        x, y, w, h = b.bbox
        anns.append(
            {
                "id": b.annotation_id,
                "image_id": b.image_id,
                "category_id": b.class_id,
                "bbox": [x, y, w, h],
                "area": _num(w * h),
                "iscrowd": 0,
            }
        )
    doc = {"images": images, "annotations": anns, "categories": [dict(CATEGORY)]}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _require(mapping, key, context):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(key, context)
    return mapping[key]


def parse_coco(text: str | bytes) -> AnnotationSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"invalid JSON ({exc})") from None
    raw_images = _require(doc, "images", "COCO document")
    raw_anns = _require(doc, "annotations", "COCO document")
    _require(doc, "categories", "COCO document")

    rows = []
    for n, im in enumerate(raw_images):
        ctx = f"images[{n}]"
        rows.append(
            (
                _require(im, "id", ctx),
                _require(im, "file_name", ctx),
                _require(im, "width", ctx),
                _require(im, "height", ctx),
                im.get("frame_index"),
                im.get("video_id", DEFAULT_VIDEO),
            )
        )
    derived = _frames_per_video((i, r[1], r[5]) for i, r in enumerate(rows))
    images = [
        ImageRecord(r[0], r[1], int(r[2]), int(r[3]), derived[i] if r[4] is None else int(r[4]), r[5])
        for i, r in enumerate(rows)
    ]
    boxes = []
    for n, a in enumerate(raw_anns):
        ctx = f"annotations[{n}]"
        bbox = _require(a, "bbox", ctx)
        if len(bbox) != 4:
            raise ValidationError(f"{ctx}: bbox must have 4 numbers")
        boxes.append(
            BoxRecord(
                _require(a, "id", ctx),
                _require(a, "image_id", ctx),
                _require(a, "category_id", ctx),
                tuple(bbox),
            )
        )
    return AnnotationSet(tuple(images), tuple(boxes))


class GTEntry(NamedTuple):
    frame: int
    center: tuple[float, float]
    size: tuple[float, float]


@dataclass(frozen=True)
class GroundTruthTrack:
    video_id: str | int
    entries: tuple[GTEntry, ...]
    class_id: int = CATEGORY["id"]
    # number of frames in the video, annotated or not
    frame_count: int | None = None

    def __post_init__(self):
        entries = tuple(GTEntry(*e) for e in self.entries)
        frames = [e.frame for e in entries]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError(f"video {self.video_id}: GT frames are not strictly increasing")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def by_frame(self) -> dict[int, tuple[float, float]]:
        return {e.frame: e.center for e in self.entries}


def gt_tracks(annotations: AnnotationSet) -> list[GroundTruthTrack]:
    """One track of box centers per (video, class), ordered by frame."""
    images = {im.image_id: im for im in annotations.images}
    grouped: dict = {}
    for b in annotations.boxes:
        im = images[b.image_id]
        per_image = grouped.setdefault((im.video_id, b.class_id), {})
        if im.image_id in per_image:
            raise AmbiguityError(im.image_id)
        x, y, w, h = b.bbox
        per_image[im.image_id] = GTEntry(im.frame_index, (x + w / 2, y + h / 2), (float(w), float(h)))
    tracks = []
    for (video, class_id), per_image in sorted(grouped.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
        entries = sorted(per_image.values(), key=lambda e: e.frame)
        tracks.append(
            GroundTruthTrack(video, tuple(entries), class_id, annotations.frame_count(video))
        )
    return tracks
