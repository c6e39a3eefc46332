"""
Binary embedding files.

Layout, all little-endian:

    magic    4 bytes  b"FEMB"
    version  u32      1
    rows     u64
    dims     u64
    payload  rows * dims float32, row-major

The file length must equal header + payload exactly.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from fusecal.core.errors import FormatError, IoError
from fusecal.models.embeddings import EmbeddingMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MAGIC = b"FEMB"
VERSION = 1
HEADER = struct.Struct("<4sIQQ")
DTYPE = np.dtype("<f4")


def read_embedding_file(path: PathLike) -> EmbeddingMatrix:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("magic", f"{path} does not start with {MAGIC!r}")
    if len(data) < HEADER.size:
        raise FormatError("length", f"{path} is shorter than the {HEADER.size}-byte header")
    _, version, rows, dims = HEADER.unpack_from(data)
    if version != VERSION:
        raise FormatError("version", f"unsupported embedding file version {version}")
    expected = HEADER.size + rows * dims * DTYPE.itemsize
    if len(data) != expected:
        raise FormatError("length", f"header declares {rows}x{dims} values ({expected} bytes), file has {len(data)} bytes")

    values = np.frombuffer(data, dtype=DTYPE, offset=HEADER.size).reshape(rows, dims)
    matrix = EmbeddingMatrix(values.astype(np.float64), catalog_ref=Path(path).name)
    logger.info(f"Loaded {rows}x{dims} embeddings from {path}")
    return matrix


def write_embedding_file(path: PathLike, matrix: EmbeddingMatrix) -> None:
    """Write the matrix as float32; float64 values not representable in float32 are rounded."""
    payload = np.ascontiguousarray(matrix.values, dtype=DTYPE)
    try:
        with open(path, "wb") as f:
            f.write(HEADER.pack(MAGIC, VERSION, matrix.rows, matrix.dims))
            f.write(payload.tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
