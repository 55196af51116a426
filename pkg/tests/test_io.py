import json
import math
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from slrimat.errors import MatrixParseError, NonFiniteError
from slrimat.io import (
    BINARY_MAGIC,
    read_matrix,
    read_matrix_binary,
    read_matrix_csv,
    write_json,
    write_matrix,
    write_matrix_csv,
)

values = st.floats(allow_nan=False, allow_infinity=False, width=64)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=values))


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(matrices)
def test_csv_round_trip_is_exact(tmp_path, x):
    path = tmp_path / "x.csv"
    write_matrix_csv(path, x)
    y = read_matrix_csv(path)
    # Zero ulp drift: 17 significant digits always round-trip a double.
    np.testing.assert_array_equal(y, x)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(matrices)
def test_binary_round_trip_is_exact(tmp_path, x):
    path = tmp_path / "x.slrm"
    write_matrix(path, x)
    np.testing.assert_array_equal(read_matrix(path), x)


def test_csv_layout(tmp_path):
    path = tmp_path / "x.csv"
    write_matrix_csv(path, np.array([[1.0, 0.1], [-2.5, 1e-300]]))
    assert path.read_text() == "1,0.10000000000000001\n-2.5,1e-300\n"


@pytest.mark.parametrize("text, line, column", [
    ("1,2\n3,x\n", 2, 2),
    ("1,2\n3\n", 2, None),
    ("1,2\n\n3,nan\n", 3, 2),
    ("1,inf\n", 1, 2),
])
def test_csv_errors_name_location(tmp_path, text, line, column):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(MatrixParseError) as info:
        read_matrix_csv(path)
    assert info.value.line == line and info.value.column == column
    assert f"line {line}" in str(info.value)


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("\n")
    with pytest.raises(MatrixParseError):
        read_matrix_csv(path)


def test_binary_layout(tmp_path):
    path = tmp_path / "x.slrm"
    write_matrix(path, np.array([[1.0, 2.0, 3.0]]))
    data = path.read_bytes()
    assert data[:8] == BINARY_MAGIC
    assert struct.unpack("<QQ", data[8:24]) == (1, 3)
    assert struct.unpack("<3d", data[24:]) == (1.0, 2.0, 3.0)


def test_binary_errors(tmp_path):
    bad = tmp_path / "bad.slrm"
    bad.write_bytes(b"NOTMAGIC" + b"\0" * 16)
    with pytest.raises(MatrixParseError):
        read_matrix_binary(bad)
    short = tmp_path / "short.slrm"
    short.write_bytes(BINARY_MAGIC + struct.pack("<QQ", 2, 2) + b"\0" * 8)
    with pytest.raises(MatrixParseError, match="expected 56 bytes"):
        read_matrix_binary(short)
    nan = tmp_path / "nan.slrm"
    nan.write_bytes(BINARY_MAGIC + struct.pack("<QQd", 1, 1, math.nan))
    with pytest.raises(NonFiniteError):
        read_matrix_binary(nan)


def test_json_infinities(tmp_path):
    path = tmp_path / "r.json"
    write_json(path, {"a": math.inf, "b": [np.float64(-math.inf), np.int64(3)], "c": math.nan})
    assert json.loads(path.read_text()) == {"a": "inf", "b": ["-inf", 3], "c": "nan"}
