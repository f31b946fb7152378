"""Per-epoch training input preparation: subgroup sampling, the six-stage
augmentation, and per-slice standardization.

Geometric parameters (both rotations and the translation) are drawn once per
subgroup so the n slices stay aligned; noise is drawn per voxel. Intensities
are clipped back to [0, 255] before standardization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidDepth
from .volume import CANONICAL_DEPTH, CanonicalVolume

STD_EPS = 1e-7


@dataclass(frozen=True)
class AugmentationRanges:
    """Sampling ranges for one augmentation draw; defaults are the protocol's."""

    max_rotation_deg: float = 25.0
    translation_fraction: float = 0.1
    max_noise_sigma: float = 0.05 * 255.0
    brightness_min: float = 0.1
    brightness_max: float = 2.0
    max_blur_sigma: float = 1.0
    blur_probability: float = 0.5

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentationRanges":
        return cls(**data)


DEFAULT_RANGES = AugmentationRanges()


@dataclass(frozen=True)
class AugmentationDraw:
    alpha: float
    quarter_turns: int
    dy: int
    dx: int
    noise_sigma: float
    brightness: float
    blur_sigma: float
    blur_applied: bool

    @classmethod
    def sample(
        cls,
        rng: np.random.Generator,
        height: int = 200,
        width: int = 200,
        ranges: AugmentationRanges = DEFAULT_RANGES,
    ) -> "AugmentationDraw":
        max_dy = int(height * ranges.translation_fraction)
        max_dx = int(width * ranges.translation_fraction)
        return cls(
            alpha=float(rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg)),
            quarter_turns=int(rng.integers(0, 4)),
            dy=int(rng.integers(-max_dy, max_dy + 1)),
            dx=int(rng.integers(-max_dx, max_dx + 1)),
            noise_sigma=float(rng.uniform(0.0, ranges.max_noise_sigma)),
            brightness=float(rng.uniform(ranges.brightness_min, ranges.brightness_max)),
            blur_sigma=float(rng.uniform(0.0, ranges.max_blur_sigma)),
            blur_applied=bool(rng.random() < ranges.blur_probability),
        )

    @classmethod
    def neutral(cls) -> "AugmentationDraw":
        return cls(
            alpha=0.0,
            quarter_turns=0,
            dy=0,
            dx=0,
            noise_sigma=0.0,
            brightness=1.0,
            blur_sigma=0.0,
            blur_applied=False,
        )


@dataclass
class SliceStack:
    """n contiguous slices from a canonical volume, plus where they started."""

    pixels: np.ndarray  # (n, 200, 200) float32
    start_index: int

    @property
    def n(self) -> int:
        return self.pixels.shape[0]


def _check_depth(n: int) -> None:
    if not 1 <= n <= CANONICAL_DEPTH:
        raise InvalidDepth(f"n must be in [1, {CANONICAL_DEPTH}], got {n}")


def _voxels(volume) -> np.ndarray:
    return volume.voxels if isinstance(volume, CanonicalVolume) else np.asarray(volume)


def sample_subgroup(volume, n: int, rng: np.random.Generator) -> SliceStack:
    """Draw a random contiguous n-slice subgroup from a 16-slice volume."""
    _check_depth(n)
    voxels = _voxels(volume)
    start = int(rng.integers(0, CANONICAL_DEPTH - n + 1))
    return SliceStack(pixels=voxels[start : start + n].copy(), start_index=start)


def central_subgroups(volume, n: int) -> list[SliceStack]:
    """The centered n-slice subgroup(s): one for even n, two candidates for odd n."""
    _check_depth(n)
    voxels = _voxels(volume)
    if (CANONICAL_DEPTH - n) % 2 == 0:
        starts = [(CANONICAL_DEPTH - n) // 2]
    else:
        starts = [(CANONICAL_DEPTH - n) // 2, (CANONICAL_DEPTH - n) // 2 + 1]
    return [
        SliceStack(pixels=voxels[s : s + n].copy(), start_index=s) for s in starts
    ]


def _translate(pixels: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(pixels)
    n, h, w = pixels.shape
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[:, ys, xs] = pixels[:, ys_src, xs_src]
    return out


def augment(
    stack: SliceStack,
    draw: AugmentationDraw,
    rng: np.random.Generator | None = None,
) -> SliceStack:
    """Apply the six augmentation stages in order with one shared draw.

    Stage order: free rotation, quarter-turn rotation, translation, additive
    Gaussian noise (per voxel; needs rng), brightness factor, optional blur.
    Neutral stages are skipped, so the neutral draw is an exact identity.
    """
    out = stack.pixels.astype(np.float32, copy=True)

    if draw.alpha != 0.0:
        out = ndimage.rotate(
            out, draw.alpha, axes=(1, 2), reshape=False, order=1, mode="constant", cval=0.0
        )
    if draw.quarter_turns % 4:
        out = np.rot90(out, k=draw.quarter_turns, axes=(1, 2)).copy()
    if draw.dy or draw.dx:
        out = _translate(out, draw.dy, draw.dx)
    if draw.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        out = out + rng.normal(0.0, draw.noise_sigma, size=out.shape).astype(np.float32)
    if draw.brightness != 1.0:
        out = out * draw.brightness
    np.clip(out, 0.0, 255.0, out=out)
    if draw.blur_applied and draw.blur_sigma > 0.0:
        out = ndimage.gaussian_filter(out, sigma=(0.0, draw.blur_sigma, draw.blur_sigma))

    return SliceStack(pixels=out.astype(np.float32), start_index=stack.start_index)


def standardize(stack: SliceStack) -> SliceStack:
    """Map each slice independently to zero mean and unit (population) std."""
    pixels = stack.pixels.astype(np.float64)
    mean = pixels.mean(axis=(1, 2), keepdims=True)
    std = pixels.std(axis=(1, 2), keepdims=True)
    out = (pixels - mean) / np.maximum(std, STD_EPS)
    return SliceStack(pixels=out.astype(np.float32), start_index=stack.start_index)
