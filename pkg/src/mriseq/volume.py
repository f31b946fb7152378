"""Volume loading and canonicalization.

Every input volume, regardless of its on-disk format, is reduced to the
pipeline's common currency: a 16-slice stack of 200x200 intensities in
[0, 255]. The chain is load -> normalize -> extract 16 central slices ->
aspect-preserving resize.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import MixedSliceDimensions, UnreadableFile
from .formats import read_dicom_slice, read_metaimage, read_nifti
from .labels import SequenceType

CANONICAL_DEPTH = 16
CANONICAL_SIZE = 200

NIFTI = "NIFTI"
METAIMAGE = "METAIMAGE"
DICOM_SERIES = "DICOM_SERIES"

_DICOM_EXTENSIONS = {".dcm", ".dicom", ".ima", ""}


@dataclass
class RawVolume:
    """A loaded volume before canonicalization, voxels (slice, row, column)."""

    voxels: np.ndarray
    source_format: str
    source_path: str

    @property
    def depth(self) -> int:
        return self.voxels.shape[0]

    @property
    def height(self) -> int:
        return self.voxels.shape[1]

    @property
    def width(self) -> int:
        return self.voxels.shape[2]


@dataclass(frozen=True)
class ResizePlan:
    """Aspect-preserving resize parameters for a non-square slice."""

    min_dim: int
    max_dim: int

    @property
    def scale_factor(self) -> float:
        return self.min_dim / self.max_dim


@dataclass
class CanonicalVolume:
    """16x200x200 stack in [0, 255], plus its provenance."""

    voxels: np.ndarray
    source_path: str
    base_dataset: str | None = None
    label: SequenceType | None = None


def detect_format(path: str | Path) -> str:
    """Infer the on-disk format of a volume path from its extension."""
    path = Path(path)
    if path.is_dir():
        return DICOM_SERIES
    name = path.name.lower()
    if name.endswith((".nii", ".nii.gz")):
        return NIFTI
    if name.endswith((".mha", ".mhd")):
        return METAIMAGE
    raise UnreadableFile(f"{path}: unrecognized volume format")


def _dicom_sort_key(slices):
    """Order slices by position along the normal, then instance, then name."""
    coords = [s.normal_coordinate() for s in slices]
    if all(c is not None for c in coords) and len(set(coords)) == len(coords):
        return sorted(range(len(slices)), key=lambda i: coords[i])
    instances = [s.instance_number for s in slices]
    if all(i is not None for i in instances) and len(set(instances)) == len(instances):
        return sorted(range(len(slices)), key=lambda i: instances[i])
    return sorted(range(len(slices)), key=lambda i: slices[i].source_path)


def _load_dicom_series(path: Path) -> np.ndarray:
    files = sorted(
        p
        for p in path.iterdir()
        if p.is_file() and p.suffix.lower() in _DICOM_EXTENSIONS
    )
    if not files:
        raise UnreadableFile(f"{path}: directory contains no slice files")
    slices = [read_dicom_slice(p) for p in files]
    shapes = {s.pixels.shape for s in slices}
    if len(shapes) > 1:
        raise MixedSliceDimensions(
            f"{path}: slice dimensions disagree ({sorted(shapes)})"
        )
    order = _dicom_sort_key(slices)
    return np.stack([slices[i].pixels for i in order])


def load_volume(path: str | Path) -> RawVolume:
    """Load a volume from a single file or a directory of per-slice files."""
    path = Path(path)
    if not path.exists():
        raise UnreadableFile(f"{path}: no such file or directory")
    fmt = detect_format(path)
    if fmt == NIFTI:
        voxels = read_nifti(path)
    elif fmt == METAIMAGE:
        voxels = read_metaimage(path)
    else:
        voxels = _load_dicom_series(path)
    return RawVolume(voxels=voxels, source_format=fmt, source_path=str(path))


def normalize_intensities(v: RawVolume) -> RawVolume:
    """Linearly map the volume's intensity range onto [0, 255].

    Constant volumes map to all-zero (the min-max denominator would vanish).
    """
    voxels = v.voxels.astype(np.float32)
    lo = float(voxels.min())
    hi = float(voxels.max())
    if hi > lo:
        voxels = (voxels - lo) * (255.0 / (hi - lo))
    else:
        voxels = np.zeros_like(voxels)
    return RawVolume(voxels=voxels, source_format=v.source_format, source_path=v.source_path)


def extract_central_16(v: RawVolume) -> RawVolume:
    """Keep the 16 central slices, replicating extreme slices on shallow volumes.

    For depth < 16 the first slice is replicated upward and the last slice
    downward; an odd surplus replica goes at the end.
    """
    depth = v.depth
    if depth >= CANONICAL_DEPTH:
        start = (depth - CANONICAL_DEPTH) // 2
        voxels = v.voxels[start : start + CANONICAL_DEPTH]
    else:
        missing = CANONICAL_DEPTH - depth
        front = missing // 2
        back = missing - front
        voxels = np.concatenate(
            [
                np.repeat(v.voxels[:1], front, axis=0),
                v.voxels,
                np.repeat(v.voxels[-1:], back, axis=0),
            ]
        )
    return RawVolume(voxels=voxels, source_format=v.source_format, source_path=v.source_path)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def plan_resize(height: int, width: int) -> ResizePlan:
    return ResizePlan(min_dim=min(height, width), max_dim=max(height, width))


def scaled_dims(height: int, width: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Intermediate shapes for a non-square resize: (scaled h/w, padded h/w)."""
    plan = plan_resize(height, width)
    r = plan.scale_factor
    scaled = (_round_half_up(height * r), _round_half_up(width * r))
    return scaled, (plan.min_dim, plan.min_dim)


def canonical_resize(v: RawVolume) -> CanonicalVolume:
    """Resize a 16-slice stack to 200x200 without deforming non-square slices.

    Square slices resize directly. Non-square ones are scaled by
    min(h, w) / max(h, w) so the larger side shrinks to the smaller one's
    length, zero-padded to a square, then resized to 200x200 (bilinear).
    """
    if v.depth != CANONICAL_DEPTH:
        raise ValueError(f"expected depth {CANONICAL_DEPTH}, got {v.depth}")
    height, width = v.height, v.width
    stack = v.voxels.astype(np.float32)

    if height != width:
        plan = plan_resize(height, width)
        (new_h, new_w), _ = scaled_dims(height, width)
        scaled = np.empty((CANONICAL_DEPTH, new_h, new_w), dtype=np.float32)
        for i in range(CANONICAL_DEPTH):
            scaled[i] = cv2.resize(stack[i], (new_w, new_h), interpolation=cv2.INTER_LINEAR)
        pad_h = plan.min_dim - new_h
        pad_w = plan.min_dim - new_w
        stack = np.pad(
            scaled,
            (
                (0, 0),
                (pad_h // 2, pad_h - pad_h // 2),
                (pad_w // 2, pad_w - pad_w // 2),
            ),
        )

    out = np.empty((CANONICAL_DEPTH, CANONICAL_SIZE, CANONICAL_SIZE), dtype=np.float32)
    for i in range(CANONICAL_DEPTH):
        out[i] = cv2.resize(
            stack[i], (CANONICAL_SIZE, CANONICAL_SIZE), interpolation=cv2.INTER_LINEAR
        )
    np.clip(out, 0.0, 255.0, out=out)
    return CanonicalVolume(voxels=out, source_path=v.source_path)


def canonicalize(path: str | Path, base_dataset: str | None = None,
                 label: SequenceType | None = None) -> CanonicalVolume:
    """Run the full load -> normalize -> central-16 -> resize chain on a path."""
    raw = extract_central_16(normalize_intensities(load_volume(path)))
    canonical = canonical_resize(raw)
    canonical.base_dataset = base_dataset
    canonical.label = label
    return canonical


@dataclass
class VolumeStore:
    """Eagerly loaded, read-only mapping from volume_ref to CanonicalVolume."""

    volumes: dict[str, CanonicalVolume] = field(default_factory=dict)

    def __getitem__(self, ref: str) -> CanonicalVolume:
        return self.volumes[ref]

    def __contains__(self, ref: str) -> bool:
        return ref in self.volumes

    def __len__(self) -> int:
        return len(self.volumes)

    def add(self, ref: str, volume: CanonicalVolume) -> None:
        self.volumes[ref] = volume

    @classmethod
    def from_records(cls, records) -> "VolumeStore":
        """Load every distinct volume_ref referenced by a record sequence."""
        store = cls()
        for record in records:
            if record.volume_ref not in store.volumes:
                store.add(
                    record.volume_ref,
                    canonicalize(
                        record.volume_ref,
                        base_dataset=getattr(record.base_dataset, "name", str(record.base_dataset)),
                        label=record.label,
                    ),
                )
        return store
