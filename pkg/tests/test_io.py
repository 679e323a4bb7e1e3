import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpmpc.io import (
    SchemaError,
    canonical_json,
    config_digest,
    from_iso,
    read_table,
    to_iso,
    write_table,
)


def test_table_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    cols = {"timestamp": [to_iso(0), to_iso(3600)], "x": [1.5, np.nan], "n": np.array([3, 4]),
            "flag": [True, False]}
    write_table(path, cols, "demo", digest="abc", seed=7)
    first = path.read_text().splitlines()[0]
    assert first == "# hpmpc-table version=1.0 kind=demo digest=abc seed=7"
    t = read_table(path, required=("x",), kind="demo")
    assert t.meta == {"version": "1.0", "kind": "demo", "digest": "abc", "seed": "7"}
    assert t["timestamp"] == ["2023-01-02T00:00:00", "2023-01-02T01:00:00"]
    assert t["x"][0] == 1.5 and np.isnan(t["x"][1])
    assert list(t["n"]) == [3.0, 4.0] and list(t["flag"]) == [1.0, 0.0]


@given(st.lists(st.floats(-1e300, 1e300), min_size=1, max_size=20))
def test_floats_survive_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "v.csv"
    write_table(path, {"v": values}, "demo")
    back = read_table(path)["v"]
    assert np.allclose(back, values, rtol=1e-9, atol=0)


def test_unknown_major_version_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# hpmpc-table version=2.0 kind=demo digest=- seed=-\nx\n1\n")
    with pytest.raises(SchemaError, match="version"):
        read_table(path)
    path.write_text("# hpmpc-table version=1.7 kind=demo digest=- seed=-\nx\n1\n")
    assert read_table(path)["x"][0] == 1.0


def test_raw_export_without_metadata(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text("a,b\n1,2\n3,\n")
    t = read_table(path)
    assert t.meta == {} and np.isnan(t["b"][1])


def test_diagnostics_name_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# hpmpc-table version=1.0 kind=demo digest=- seed=-\na,b\n1,2\n3,oops\n")
    with pytest.raises(SchemaError, match=r"line 4, column 'b'.*oops"):
        read_table(path)
    path.write_text("a,b\n1,2,3\n")
    with pytest.raises(SchemaError, match="line 2"):
        read_table(path)
    with pytest.raises(SchemaError, match="missing column"):
        read_table(tmp_path / "bad.csv", required=("c",))
    with pytest.raises(SchemaError, match="cannot read"):
        read_table(tmp_path / "absent.csv")


def test_kind_mismatch(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, {"x": [1]}, "hp-fit")
    with pytest.raises(SchemaError, match="expected"):
        read_table(path, kind="trace-hourly")


def test_ragged_columns_refused(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.csv", {"a": [1, 2], "b": [1]}, "demo")


def test_json_is_canonical():
    a = canonical_json({"b": np.float64(1.0), "a": [np.int64(2), float("inf")], "c": np.arange(2)})
    assert a == '{\n  "a": [\n    2,\n    "inf"\n  ],\n  "b": 1.0,\n  "c": [\n    0,\n    1\n  ]\n}\n'
    assert config_digest({"x": 1, "y": 2}) == config_digest({"y": 2, "x": 1})
    assert config_digest({"x": 1}) != config_digest({"x": 2})


@given(st.floats(0, 1e8))
def test_iso_round_trip(seconds):
    seconds = round(seconds, 3)
    assert from_iso(to_iso(seconds)) == pytest.approx(seconds, abs=1e-6)
