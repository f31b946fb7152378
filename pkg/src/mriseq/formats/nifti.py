"""Minimal NIfTI-1 reader/writer (single-frame, uncompressed or gzipped).

Covers the subset of NIfTI actually produced by common brain-MRI tooling:
scalar voxel data, optional scl_slope/scl_inter rescaling, both endiannesses.
Voxels are returned as (slice, row, column), i.e. the stored z axis first.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import UnreadableFile

HEADER_SIZE = 348

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}


def _read_bytes(path: Path) -> bytes:
    if path.name.endswith(".gz"):
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def read_nifti(path: str | Path) -> np.ndarray:
    """Read a .nii or .nii.gz file into a float32 (depth, height, width) array."""
    path = Path(path)
    try:
        buf = _read_bytes(path)
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    if len(buf) < HEADER_SIZE:
        raise UnreadableFile(f"{path}: truncated NIfTI header")

    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", buf, 0)
    if sizeof_hdr != HEADER_SIZE:
        endian = ">"
        (sizeof_hdr,) = struct.unpack_from(">i", buf, 0)
        if sizeof_hdr != HEADER_SIZE:
            raise UnreadableFile(f"{path}: not a NIfTI-1 file")

    dim = struct.unpack_from(endian + "8h", buf, 40)
    (datatype,) = struct.unpack_from(endian + "h", buf, 70)
    (vox_offset,) = struct.unpack_from(endian + "f", buf, 108)
    scl_slope, scl_inter = struct.unpack_from(endian + "2f", buf, 112)

    if dim[0] < 3 or dim[0] > 7:
        raise UnreadableFile(f"{path}: unsupported dimensionality {dim[0]}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if min(nx, ny, nz) < 1:
        raise UnreadableFile(f"{path}: degenerate shape {nx}x{ny}x{nz}")
    if datatype not in _DTYPES:
        raise UnreadableFile(f"{path}: unsupported datatype code {datatype}")

    dtype = np.dtype(_DTYPES[datatype]).newbyteorder(endian)
    count = nx * ny * nz
    offset = int(vox_offset) if vox_offset >= HEADER_SIZE else HEADER_SIZE
    try:
        flat = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    except ValueError as exc:
        raise UnreadableFile(f"{path}: pixel data truncated") from exc

    # Stored order is x fastest, so a C reshape gives (z, y, x).
    voxels = flat.reshape(nz, ny, nx).astype(np.float32)
    if scl_slope not in (0.0, 1.0) and np.isfinite(scl_slope):
        voxels = voxels * scl_slope + scl_inter
    elif scl_slope == 1.0 and scl_inter not in (0.0,) and np.isfinite(scl_inter):
        voxels = voxels + scl_inter
    return voxels


def write_nifti(path: str | Path, voxels: np.ndarray) -> None:
    """Write a (depth, height, width) array as a float32 .nii / .nii.gz file."""
    path = Path(path)
    voxels = np.asarray(voxels, dtype=np.float32)
    if voxels.ndim != 3:
        raise ValueError(f"expected a 3D array, got shape {voxels.shape}")
    nz, ny, nx = voxels.shape

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, 16, 32)  # float32, 32 bits
    struct.pack_into("<8f", header, 76, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", header, 108, 352.0)
    struct.pack_into("<2f", header, 112, 1.0, 0.0)
    header[344:348] = b"n+1\x00"

    payload = bytes(header) + b"\x00" * 4 + voxels.tobytes()
    if path.name.endswith(".gz"):
        with gzip.open(path, "wb") as f:
            f.write(payload)
    else:
        path.write_bytes(payload)
