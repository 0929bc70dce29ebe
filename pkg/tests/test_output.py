import json
import os

import pytest

from psf_lab.output import atomic_write_text, format_value, read_csv, write_csv, write_json


def test_format_value_round_trip_floats():
    assert format_value(0.1) == "0.1"
    assert float(format_value(1.0 / 3.0)) == 1.0 / 3.0
    assert format_value(True) == "1"
    assert format_value(False) == "0"
    assert format_value(42) == "42"
    assert format_value("name") == "name"


def test_atomic_write_replaces_and_leaves_no_temps(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write_text(path, "first")
    atomic_write_text(path, "second")
    assert path.read_text() == "second"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_write_csv_deterministic_bytes(tmp_path):
    rows = [(1, 0.5, "a"), (2, 1.0 / 3.0, "b")]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, ["i", "x", "tag"], rows)
    write_csv(p2, ["i", "x", "tag"], rows)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0] == "i,x,tag"


def test_write_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", ["a", "b"], [(1, 2), (3,)])


def test_read_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["x", "y"], [(0.25, -1.5), (2.0, 3.0)])
    header, rows = read_csv(path)
    assert header == ["x", "y"]
    assert [[float(c) for c in r] for r in rows] == [[0.25, -1.5], [2.0, 3.0]]


def test_read_csv_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("\n\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_write_json_sorted_and_newline_terminated(tmp_path):
    path = tmp_path / "o.json"
    write_json(path, {"b": 1, "a": [1, 2]})
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1, 2], "b": 1}
