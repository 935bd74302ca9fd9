from __future__ import annotations

import numpy as np
import pytest

from heatquant.landmarks import LandmarkRecord, dump_landmarks, ingest_landmarks
from heatquant.errors import EmptyInputError, InconsistentCountError, ParseError, SchemaError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_csv_two_records(tmp_path):
    header = "image_id," + ",".join(f"x{i},y{i}" for i in range(5))
    rows = [f"img{j}," + ",".join(str(v) for v in range(10)) for j in range(2)]
    recs = ingest_landmarks(write(tmp_path, "a.csv", "\n".join([header, *rows]) + "\n"))
    assert len(recs) == 2 and recs[0].count == 5 and recs[1].landmarks[4].tolist() == [8, 9]


def test_csv_bbox_and_visibility(tmp_path):
    text = "image_id,x0,y0,x1,y1,bbox_x,bbox_y,bbox_w,bbox_h,v0,v1\na,1,2,3,4,0,0,10,20,1,0\n"
    rec = ingest_landmarks(write(tmp_path, "a.csv", text))[0]
    assert rec.bbox == (0, 0, 10, 20) and rec.visibility.tolist() == [True, False]


def test_nan_row_named(tmp_path):
    p = write(tmp_path, "a.csv", "image_id,x0,y0\na,1,2\nb,nan,3\n")
    with pytest.raises(SchemaError, match="row 3"):
        ingest_landmarks(p)


def test_negative_coordinate(tmp_path):
    with pytest.raises(SchemaError):
        ingest_landmarks(write(tmp_path, "a.csv", "image_id,x0,y0\na,-1,2\n"))


@pytest.mark.parametrize("name, text", [("a.csv", ""), ("a.json", ""), ("a.json", "[]"), ("a.csv", "image_id,x0,y0\n")])
def test_empty(tmp_path, name, text):
    with pytest.raises(EmptyInputError):
        ingest_landmarks(write(tmp_path, name, text))


@pytest.mark.parametrize(
    "name, text, err",
    [
        ("a.csv", "image_id,x0,y0\na,1\n", ParseError),
        ("a.csv", "image_id,x0,y0\na,one,2\n", ParseError),
        ("a.csv", "id,x0,y0\na,1,2\n", SchemaError),
        ("a.csv", "image_id,x0,y0,zz\na,1,2,3\n", SchemaError),
        ("a.json", "{", ParseError),
        ("a.json", '{"a": 1}', SchemaError),
        ("a.json", '[{"image_id": "a", "landmarks": [[1, 2]], "extra": 1}]', SchemaError),
        ("a.json", '[{"image_id": "a", "landmarks": [1, 2]}]', SchemaError),
        ("a.json", '[{"image_id": "a", "landmarks": [[1, 2]], "visibility": [1, 1]}]', SchemaError),
        ("a.txt", "x", ParseError),
    ],
)
def test_malformed(tmp_path, name, text, err):
    with pytest.raises(err):
        ingest_landmarks(write(tmp_path, name, text))


def test_inconsistent_count(tmp_path):
    text = '[{"image_id": "a", "landmarks": [[1, 2]]}, {"image_id": "b", "landmarks": [[1, 2], [3, 4]]}]'
    with pytest.raises(InconsistentCountError):
        ingest_landmarks(write(tmp_path, "a.json", text))


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    recs = [
        LandmarkRecord("a", np.array([[1.5, 2.25], [3.0, 4.0]]), (0.0, 0.0, 5.0, 6.0), np.array([True, False])),
        LandmarkRecord("b", np.array([[0.1, 0.2], [7.0, 8.0]])),
    ]
    back = ingest_landmarks(write(tmp_path, f"r.{fmt}", dump_landmarks(recs, fmt)))
    assert [r.image_id for r in back] == ["a", "b"]
    for r, b in zip(recs, back):
        assert np.array_equal(r.landmarks, b.landmarks)
    assert back[0].bbox == (0, 0, 5, 6) and back[0].visibility.tolist() == [True, False]
