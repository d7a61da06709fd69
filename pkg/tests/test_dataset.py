import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apextrack.dataset import (
    AnnotationSet,
    BoxRecord,
    ImageRecord,
    assign_frame_indices,
    emit_coco,
    gt_tracks,
    parse_coco,
    parse_voc,
    render_voc,
)
from apextrack.exceptions import AmbiguityError, AnnotationParseError, SchemaError, ValidationError


def voc(filename="frame_000001.jpg", boxes=((10, 20, 50, 80),), size=(640, 480), folder="video6"):
    objs = "".join(
        f"<object><name>apex</name><bndbox><xmin>{a}</xmin><ymin>{b}</ymin>"
        f"<xmax>{c}</xmax><ymax>{d}</ymax></bndbox></object>"
        for a, b, c, d in boxes
    )
    size_xml = "" if size is None else f"<size><width>{size[0]}</width><height>{size[1]}</height><depth>3</depth></size>"
    return f"<annotation><folder>{folder}</folder><filename>{filename}</filename>{size_xml}{objs}</annotation>"


def test_bbox_one_based_to_zero_based():
    result = parse_voc([voc()])
    assert result.boxes[0].bbox == (9, 19, 41, 61)


def test_zero_objects():
    result = parse_voc([voc(boxes=())])
    assert len(result.images) == 1 and result.boxes == ()


def test_ids_in_input_order():
    docs = [voc(f"f{i}.jpg", boxes=((i + 1, 1, i + 5, 5),)) for i in range(3)]
    result = parse_voc(docs)
    assert [im.image_id for im in result.images] == [1, 2, 3]
    assert [b.annotation_id for b in result.boxes] == [1, 2, 3]
    assert [b.image_id for b in result.boxes] == [1, 2, 3]
    again = parse_voc(render_voc(result))
    assert again == result


def test_malformed_xml_reports_index():
    with pytest.raises(AnnotationParseError, match="document 1"):
        parse_voc([voc(), "<annotation><size>"])


def test_inverted_box_and_missing_size():
    with pytest.raises(ValidationError, match="max < min"):
        parse_voc([voc(boxes=((50, 20, 10, 80),))])
    with pytest.raises(ValidationError, match="size"):
        parse_voc([voc(size=None)])


def test_box_outside_image():
    with pytest.raises(ValidationError):
        parse_voc([voc(boxes=((10, 20, 700, 80),))])


def test_frame_index_from_numeric_names():
    docs = [voc(n) for n in ("img_10.jpg", "img_9.jpg", "img_100.jpg")]
    assert [im.frame_index for im in parse_voc(docs).images] == [1, 0, 2]
    assert assign_frame_indices(["b.jpg", "a.jpg", "c.jpg"]) == [1, 0, 2]
    # frame numbering is per video
    docs = [voc("x_2.jpg", folder="A"), voc("x_1.jpg", folder="B"), voc("x_1.jpg", folder="A")]
    assert [im.frame_index for im in parse_voc(docs).images] == [1, 0, 0]


def test_label_map():
    doc = voc().replace("apex", "leaf")
    with pytest.raises(ValidationError, match="leaf"):
        parse_voc([doc], label_map={"apex": 1})
    assert parse_voc([doc], label_map={"leaf": 2}).boxes[0].class_id == 2


def test_emit_empty():
    doc = json.loads(emit_coco(AnnotationSet()))
    assert doc == {"images": [], "annotations": [], "categories": [{"id": 1, "name": "apex"}]}


def test_emit_area_and_fields():
    doc = json.loads(emit_coco(parse_voc([voc()])))
    (a,) = doc["annotations"]
    assert a["bbox"] == [9, 19, 41, 61]
    assert a["area"] == 2501
    assert a["iscrowd"] == 0
    assert list(doc) == ["images", "annotations", "categories"]
    assert doc["images"][0]["frame_index"] == 0
    assert doc["images"][0]["video_id"] == "video6"


def test_emit_parse_emit_byte_identical():
    docs = [voc(f"frame_{i:04d}.jpg", boxes=((i + 1, 2, i + 30, 40),)) for i in range(5)]
    text = emit_coco(parse_voc(docs))
    assert emit_coco(parse_coco(text)) == text
    assert parse_coco(text) == parse_voc(docs)


def test_float_boxes_round_trip():
    s = AnnotationSet(
        (ImageRecord(1, "a.png", 100, 80, 0, "v"),),
        (BoxRecord(1, 1, 1, (10.25, 3.5, 20.125, 7.0)),),
    )
    text = emit_coco(s)
    assert parse_coco(text) == s
    assert emit_coco(parse_coco(text)) == text


@pytest.mark.parametrize("drop", ["images", "annotations", "categories"])
def test_parse_coco_missing_top_level(drop):
    doc = json.loads(emit_coco(parse_voc([voc()])))
    del doc[drop]
    with pytest.raises(SchemaError, match=drop):
        parse_coco(json.dumps(doc))


def test_parse_coco_missing_nested_key():
    doc = json.loads(emit_coco(parse_voc([voc()])))
    del doc["annotations"][0]["bbox"]
    with pytest.raises(SchemaError, match="bbox"):
        parse_coco(json.dumps(doc))


def test_gt_center_and_order():
    docs = [voc("f_3.jpg", boxes=((11, 1, 20, 10),)), voc("f_1.jpg", boxes=((10, 20, 50, 80),))]
    (track,) = gt_tracks(parse_voc(docs))
    assert [e.frame for e in track.entries] == [0, 1]
    assert track.entries[0].center == (29.5, 49.5)
    assert track.entries[1].center == (15.0, 5.0)
    assert track.frame_count == 2


def test_gt_ambiguity():
    with pytest.raises(AmbiguityError) as err:
        gt_tracks(parse_voc([voc(boxes=((1, 1, 5, 5), (10, 10, 20, 20)))]))
    assert err.value.image_id == 1


def test_gt_track_has_one_entry_per_frame():
    docs = [voc(f"frame_{i:05d}.jpg", boxes=((100, 100, 124, 132),)) for i in range(1042)]
    (track,) = gt_tracks(parse_voc(docs))
    assert len(track) == 1042


def test_gt_centers_inside_bounds():
    rng = np.random.default_rng(0)
    images, boxes = [], []
    for i in range(200):
        w, h = int(rng.integers(1, 50)), int(rng.integers(1, 50))
        x, y = int(rng.integers(0, 640 - w + 1)), int(rng.integers(0, 480 - h + 1))
        images.append(ImageRecord(i + 1, f"{i}.png", 640, 480, i, "v"))
        boxes.append(BoxRecord(i + 1, i + 1, 1, (x, y, w, h)))
    (track,) = gt_tracks(AnnotationSet(tuple(images), tuple(boxes)))
    assert all(0 <= e.center[0] < 640 and 0 <= e.center[1] < 480 for e in track.entries)


box_st = st.tuples(st.integers(1, 300), st.integers(1, 200), st.integers(0, 300), st.integers(0, 200)).map(
    lambda t: (t[0], t[1], min(t[0] + t[2], 320), min(t[1] + t[3], 240))
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(box_st, max_size=3), min_size=1, max_size=6))
def test_voc_render_parse_identity(per_image):
    docs = [voc(f"frame_{i}.jpg", boxes=boxes, size=(320, 240)) for i, boxes in enumerate(per_image)]
    parsed = parse_voc(docs)
    assert parse_voc(render_voc(parsed)) == parsed
    assert parse_coco(emit_coco(parsed)) == parsed
