"""Matrix file formats.

CSV: one matrix row per line, comma separated, no header, values written
with 17 significant digits so a write/read round trip is exact.

Binary (``.slrm``): 8-byte magic ``b"SLRMAT01"``, then rows and cols as
little-endian uint64, then ``rows * cols`` little-endian float64 values in
row-major order.
"""

import json
import math
from pathlib import Path
import struct

import numpy as np

from .errors import MatrixParseError
from .linalg import as_matrix

BINARY_MAGIC = b"SLRMAT01"
BINARY_SUFFIX = ".slrm"


def read_matrix_csv(path):
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            fields = text.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixParseError(f"expected {width} values, found {len(fields)}", line=lineno)
            row = []
            for col, field in enumerate(fields, start=1):
                try:
                    value = float(field)
                except ValueError:
                    raise MatrixParseError(f"cannot parse {field.strip()!r} as a number",
                                           line=lineno, column=col) from None
                if not math.isfinite(value):
                    raise MatrixParseError(f"non-finite value {field.strip()!r}",
                                           line=lineno, column=col)
                row.append(value)
            rows.append(row)
    if not rows:
        raise MatrixParseError(f"{path}: no data")
    return np.array(rows, dtype=np.float64)


def write_matrix_csv(path, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in x:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_matrix_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:8] != BINARY_MAGIC:
        raise MatrixParseError(f"{path}: not a {BINARY_SUFFIX} matrix file")
    rows, cols = struct.unpack("<QQ", data[8:24])
    expected = 24 + 8 * rows * cols
    if len(data) != expected:
        raise MatrixParseError(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(data)}")
    x = np.frombuffer(data, dtype="<f8", offset=24).reshape(rows, cols).astype(np.float64)
    return as_matrix(x, str(path))


def write_matrix_binary(path, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<QQ", *x.shape))
        fh.write(np.ascontiguousarray(x, dtype="<f8").tobytes())


def read_matrix(path):
    """Read a matrix, choosing the format from the file suffix."""
    if Path(path).suffix == BINARY_SUFFIX:
        return read_matrix_binary(path)
    return read_matrix_csv(path)


def write_matrix(path, x):
    if Path(path).suffix == BINARY_SUFFIX:
        write_matrix_binary(path, x)
    else:
        write_matrix_csv(path, x)


def _jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, float) and math.isnan(obj):
        return "nan"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _jsonable(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
