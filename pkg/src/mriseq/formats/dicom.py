"""Minimal DICOM slice reader/writer for uncompressed little-endian files.

Only the tags needed to assemble and order a volumetric series are parsed:
pixel geometry, pixel data, rescale, instance number, and spatial position/
orientation. Encapsulated (compressed) transfer syntaxes are rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import UnreadableFile

IMPLICIT_VR_LE = "1.2.840.10008.1.2"
EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"

_LONG_VRS = {b"OB", b"OW", b"OF", b"OD", b"OL", b"SQ", b"UC", b"UR", b"UT", b"UN"}

TAG_ROWS = (0x0028, 0x0010)
TAG_COLS = (0x0028, 0x0011)
TAG_SAMPLES = (0x0028, 0x0002)
TAG_BITS_ALLOC = (0x0028, 0x0100)
TAG_PIXEL_REP = (0x0028, 0x0103)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_POSITION = (0x0020, 0x0032)
TAG_ORIENTATION = (0x0020, 0x0037)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)


@dataclass
class DicomSlice:
    """One decoded slice plus the metadata needed for series ordering."""

    pixels: np.ndarray  # (rows, cols) float32, rescale applied
    instance_number: int | None = None
    position: tuple[float, float, float] | None = None
    orientation: tuple[float, ...] | None = None
    source_path: str = ""

    def normal_coordinate(self) -> float | None:
        """Projection of the slice position onto the slice normal, if known."""
        if self.position is None or self.orientation is None:
            return None
        if len(self.orientation) != 6:
            return None
        row = np.array(self.orientation[:3])
        col = np.array(self.orientation[3:])
        normal = np.cross(row, col)
        return float(np.dot(normal, np.array(self.position)))


@dataclass
class _Reader:
    buf: bytes
    pos: int
    explicit: bool
    path: Path
    tags: dict[tuple[int, int], bytes] = field(default_factory=dict)

    def _fail(self, msg: str) -> UnreadableFile:
        return UnreadableFile(f"{self.path}: {msg}")

    def _read_element_header(self) -> tuple[tuple[int, int], int]:
        if self.pos + 8 > len(self.buf):
            raise self._fail("truncated element header")
        group, elem = struct.unpack_from("<HH", self.buf, self.pos)
        self.pos += 4
        if self.explicit and group != 0xFFFE:
            vr = self.buf[self.pos : self.pos + 2]
            if vr in _LONG_VRS:
                (length,) = struct.unpack_from("<I", self.buf, self.pos + 4)
                self.pos += 8
            else:
                (length,) = struct.unpack_from("<H", self.buf, self.pos + 2)
                self.pos += 4
        else:
            (length,) = struct.unpack_from("<I", self.buf, self.pos)
            self.pos += 4
        return (group, elem), length

    def _skip_undefined_sequence(self) -> None:
        # Scan items until the sequence delimiter, recursing into
        # undefined-length items.
        while True:
            tag, length = self._read_element_header()
            if tag == (0xFFFE, 0xE0DD):
                return
            if tag != (0xFFFE, 0xE000):
                raise self._fail(f"unexpected tag {tag} inside sequence")
            if length == 0xFFFFFFFF:
                # Undefined-length item: skip nested elements until the
                # item delimiter.
                while True:
                    inner, inner_len = self._read_element_header()
                    if inner == (0xFFFE, 0xE00D):
                        break
                    if inner_len == 0xFFFFFFFF:
                        self._skip_undefined_sequence()
                    else:
                        self.pos += inner_len
            else:
                self.pos += length

    def parse(self) -> dict[tuple[int, int], bytes]:
        while self.pos < len(self.buf):
            tag, length = self._read_element_header()
            if length == 0xFFFFFFFF:
                if tag == TAG_PIXEL_DATA:
                    raise self._fail("encapsulated pixel data is not supported")
                self._skip_undefined_sequence()
                continue
            if self.pos + length > len(self.buf):
                raise self._fail(f"element {tag} overruns file")
            value = self.buf[self.pos : self.pos + length]
            self.pos += length
            self.tags[tag] = value
            if tag == TAG_PIXEL_DATA:
                break
        return self.tags


def _parse_meta(buf: bytes, path: Path) -> tuple[str, int]:
    """Parse the group-0002 file meta; return (transfer syntax, dataset offset)."""
    if len(buf) < 140 or buf[128:132] != b"DICM":
        raise UnreadableFile(f"{path}: missing DICM marker")
    reader = _Reader(buf, 132, explicit=True, path=path)
    transfer_syntax = EXPLICIT_VR_LE
    while reader.pos < len(buf):
        start = reader.pos
        tag, length = reader._read_element_header()
        if tag[0] != 0x0002:
            reader.pos = start
            break
        value = buf[reader.pos : reader.pos + length]
        reader.pos += length
        if tag == (0x0002, 0x0010):
            transfer_syntax = value.decode("ascii", errors="replace").rstrip("\x00 ")
    return transfer_syntax, reader.pos


def _decode_number(raw: bytes, default: float = 0.0) -> float:
    text = raw.decode("ascii", errors="replace").strip("\x00 ")
    try:
        return float(text)
    except ValueError:
        return default


def _decode_numbers(raw: bytes) -> tuple[float, ...]:
    parts = raw.decode("ascii", errors="replace").strip("\x00 ").split("\\")
    out = []
    for part in parts:
        try:
            out.append(float(part))
        except ValueError:
            return ()
    return tuple(out)


def read_dicom_slice(path: str | Path) -> DicomSlice:
    """Read a single uncompressed little-endian DICOM slice file."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc

    transfer_syntax, offset = _parse_meta(buf, path)
    if transfer_syntax == IMPLICIT_VR_LE:
        explicit = False
    elif transfer_syntax == EXPLICIT_VR_LE:
        explicit = True
    else:
        raise UnreadableFile(f"{path}: unsupported transfer syntax {transfer_syntax}")

    tags = _Reader(buf, offset, explicit=explicit, path=path).parse()

    for required in (TAG_ROWS, TAG_COLS, TAG_PIXEL_DATA):
        if required not in tags:
            raise UnreadableFile(f"{path}: missing required tag {required}")
    (rows,) = struct.unpack("<H", tags[TAG_ROWS][:2])
    (cols,) = struct.unpack("<H", tags[TAG_COLS][:2])
    bits = 16
    if TAG_BITS_ALLOC in tags:
        (bits,) = struct.unpack("<H", tags[TAG_BITS_ALLOC][:2])
    signed = False
    if TAG_PIXEL_REP in tags:
        signed = struct.unpack("<H", tags[TAG_PIXEL_REP][:2])[0] == 1
    samples = 1
    if TAG_SAMPLES in tags:
        (samples,) = struct.unpack("<H", tags[TAG_SAMPLES][:2])
    if samples != 1:
        raise UnreadableFile(f"{path}: only monochrome pixel data is supported")
    if bits == 8:
        dtype = np.int8 if signed else np.uint8
    elif bits == 16:
        dtype = np.int16 if signed else np.uint16
    else:
        raise UnreadableFile(f"{path}: unsupported bits allocated {bits}")

    pixel_bytes = tags[TAG_PIXEL_DATA]
    count = rows * cols
    if len(pixel_bytes) < count * np.dtype(dtype).itemsize:
        raise UnreadableFile(f"{path}: pixel data truncated")
    pixels = np.frombuffer(pixel_bytes, dtype=dtype, count=count).reshape(rows, cols)
    pixels = pixels.astype(np.float32)

    slope = _decode_number(tags[TAG_RESCALE_SLOPE], 1.0) if TAG_RESCALE_SLOPE in tags else 1.0
    intercept = _decode_number(tags[TAG_RESCALE_INTERCEPT], 0.0) if TAG_RESCALE_INTERCEPT in tags else 0.0
    if (slope, intercept) != (1.0, 0.0):
        pixels = pixels * slope + intercept

    instance = None
    if TAG_INSTANCE_NUMBER in tags:
        text = tags[TAG_INSTANCE_NUMBER].decode("ascii", errors="replace").strip("\x00 ")
        if text:
            try:
                instance = int(text)
            except ValueError:
                instance = None
    position = None
    if TAG_POSITION in tags:
        values = _decode_numbers(tags[TAG_POSITION])
        if len(values) == 3:
            position = values  # type: ignore[assignment]
    orientation = None
    if TAG_ORIENTATION in tags:
        values = _decode_numbers(tags[TAG_ORIENTATION])
        if len(values) == 6:
            orientation = values

    return DicomSlice(
        pixels=pixels,
        instance_number=instance,
        position=position,
        orientation=orientation,
        source_path=str(path),
    )


def _text_element(group: int, elem: int, vr: bytes, text: str) -> bytes:
    raw = text.encode("ascii")
    if len(raw) % 2:
        raw += b" "
    return struct.pack("<HH2sH", group, elem, vr, len(raw)) + raw


def _us_element(group: int, elem: int, value: int) -> bytes:
    return struct.pack("<HH2sH", group, elem, b"US", 2) + struct.pack("<H", value)


def write_dicom_slice(
    path: str | Path,
    pixels: np.ndarray,
    instance_number: int | None = None,
    position: tuple[float, float, float] | None = None,
    orientation: tuple[float, ...] = (1, 0, 0, 0, 1, 0),
) -> None:
    """Write a single explicit-VR little-endian DICOM slice (uint16 pixels)."""
    path = Path(path)
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2D slice, got shape {pixels.shape}")
    pixels = np.clip(np.round(pixels), 0, 65535).astype("<u2")
    rows, cols = pixels.shape

    meta = _text_element(0x0002, 0x0010, b"UI", EXPLICIT_VR_LE)
    meta_len = struct.pack("<HH2sH", 0x0002, 0x0000, b"UL", 4) + struct.pack("<I", len(meta))

    body = b""
    if instance_number is not None:
        body += _text_element(0x0020, 0x0013, b"IS", str(instance_number))
    if position is not None:
        body += _text_element(0x0020, 0x0032, b"DS", "\\".join(f"{v:g}" for v in position))
        body += _text_element(0x0020, 0x0037, b"DS", "\\".join(f"{v:g}" for v in orientation))
    body += _us_element(0x0028, 0x0002, 1)
    body += _us_element(0x0028, 0x0010, rows)
    body += _us_element(0x0028, 0x0011, cols)
    body += _us_element(0x0028, 0x0100, 16)
    body += _us_element(0x0028, 0x0101, 16)
    body += _us_element(0x0028, 0x0102, 15)
    body += _us_element(0x0028, 0x0103, 0)
    payload = pixels.tobytes()
    body += struct.pack("<HH2s2sI", 0x7FE0, 0x0010, b"OW", b"\x00\x00", len(payload)) + payload

    path.write_bytes(b"\x00" * 128 + b"DICM" + meta_len + meta + body)
