"""Minimal MetaImage (.mha / .mhd + raw) reader/writer.

Handles the common scalar 3D case: ASCII key = value header, optional zlib
compression, LOCAL or external raw payload. Voxels come back (slice, row,
column) since MetaImage stores x fastest.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

from ..errors import UnreadableFile

_ELEMENT_TYPES = {
    "MET_UCHAR": np.uint8,
    "MET_CHAR": np.int8,
    "MET_USHORT": np.uint16,
    "MET_SHORT": np.int16,
    "MET_UINT": np.uint32,
    "MET_INT": np.int32,
    "MET_FLOAT": np.float32,
    "MET_DOUBLE": np.float64,
}


def _parse_header(buf: bytes, path: Path) -> tuple[dict[str, str], int]:
    """Return (header fields, byte offset of the payload within buf)."""
    fields: dict[str, str] = {}
    pos = 0
    while pos < len(buf):
        end = buf.find(b"\n", pos)
        if end < 0:
            raise UnreadableFile(f"{path}: header has no ElementDataFile line")
        line = buf[pos:end].decode("ascii", errors="replace").strip()
        pos = end + 1
        if not line:
            continue
        if "=" not in line:
            raise UnreadableFile(f"{path}: malformed header line {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
        if key == "ElementDataFile":
            return fields, pos
    raise UnreadableFile(f"{path}: header has no ElementDataFile line")


def read_metaimage(path: str | Path) -> np.ndarray:
    """Read a .mha or .mhd volume into a float32 (depth, height, width) array."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc

    fields, payload_offset = _parse_header(buf, path)

    try:
        dims = [int(x) for x in fields["DimSize"].split()]
        element_type = fields["ElementType"]
        data_file = fields["ElementDataFile"]
    except KeyError as exc:
        raise UnreadableFile(f"{path}: missing header field {exc}") from exc
    if len(dims) != 3:
        raise UnreadableFile(f"{path}: expected 3 dimensions, got {dims}")
    if element_type not in _ELEMENT_TYPES:
        raise UnreadableFile(f"{path}: unsupported ElementType {element_type}")

    if data_file.upper() == "LOCAL":
        payload = buf[payload_offset:]
    else:
        raw_path = path.parent / data_file
        try:
            payload = raw_path.read_bytes()
        except OSError as exc:
            raise UnreadableFile(f"cannot read {raw_path}: {exc}") from exc

    if fields.get("CompressedData", "False").lower() == "true":
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise UnreadableFile(f"{path}: bad compressed payload") from exc

    dtype = np.dtype(_ELEMENT_TYPES[element_type])
    if fields.get("BinaryDataByteOrderMSB", "False").lower() == "true":
        dtype = dtype.newbyteorder(">")

    nx, ny, nz = dims
    count = nx * ny * nz
    if len(payload) < count * dtype.itemsize:
        raise UnreadableFile(f"{path}: pixel data truncated")
    flat = np.frombuffer(payload, dtype=dtype, count=count)
    return flat.reshape(nz, ny, nx).astype(np.float32)


def write_metaimage(path: str | Path, voxels: np.ndarray) -> None:
    """Write a (depth, height, width) array as an uncompressed .mha file."""
    path = Path(path)
    voxels = np.asarray(voxels, dtype=np.float32)
    if voxels.ndim != 3:
        raise ValueError(f"expected a 3D array, got shape {voxels.shape}")
    nz, ny, nx = voxels.shape
    header = (
        "ObjectType = Image\n"
        "NDims = 3\n"
        "BinaryData = True\n"
        "BinaryDataByteOrderMSB = False\n"
        f"DimSize = {nx} {ny} {nz}\n"
        "ElementType = MET_FLOAT\n"
        "ElementDataFile = LOCAL\n"
    )
    path.write_bytes(header.encode("ascii") + voxels.tobytes())
