"""Image decoding and the geometric/colorimetric preprocessing steps.

Images are plain numpy arrays throughout: an RGB image is (H, W, 3)
uint8, a luminance plane is (H, W) float64 kept unrounded in [0, 255].
All functions are pure; nothing here holds state.

Conventions pinned for reproducibility:
  * luminance is BT.601 full range, Y = 0.299 R + 0.587 G + 0.114 B;
  * resizing is cubic convolution with a = -0.5, border samples
    replicated (index clamping), pixel centers aligned between grids;
  * odd center-crop margins put the smaller margin on the top/left.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CropError, ImageDecodeError

_SUPPORTED_FORMATS = {"PNG", "JPEG", "TIFF"}
_16BIT_MODES = {"I;16", "I;16L", "I;16B", "I;16N"}


def _ensure_rgb(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected an (H, W, 3) uint8 RGB image, got shape {arr.shape} dtype {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image has no pixels")
    return arr


def _ensure_plane(plane) -> np.ndarray:
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D luminance plane, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("luminance plane contains non-finite samples")
    return arr


def load_image(path) -> np.ndarray:
    """Decode a PNG, JPEG, or TIFF file into an (H, W, 3) uint8 RGB array.

    16-bit samples are rescaled to 8 bits by an integer right shift
    (value >> 8). Grayscale inputs are replicated across the three
    channels. Anything unreadable raises ImageDecodeError naming the path.
    """
    path = os.fspath(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in _SUPPORTED_FORMATS:
                raise ImageDecodeError(f"unsupported image format {fmt!r} in '{path}'")
            if im.mode in _16BIT_MODES:
                arr16 = np.asarray(im, dtype=np.uint16)
                arr8 = (arr16 >> 8).astype(np.uint8)
                return np.repeat(arr8[:, :, None], 3, axis=2)
            if im.mode == "I":
                arr32 = np.asarray(im, dtype=np.int64)
                arr8 = (np.clip(arr32, 0, 65535) >> 8).astype(np.uint8)
                return np.repeat(arr8[:, :, None], 3, axis=2)
            rgb = im.convert("RGB")
            return np.asarray(rgb, dtype=np.uint8)
    except ImageDecodeError:
        raise
    except FileNotFoundError:
        raise ImageDecodeError(f"no such file: '{path}'")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image '{path}': {exc}")


def center_crop_square(img) -> np.ndarray:
    """Crop the centered s x s window, s = min(width, height).

    When the margin is odd, the extra pixel goes to the bottom/right
    (floor on top/left).
    """
    arr = np.asarray(img)
    if arr.ndim not in (2, 3):
        raise ValueError("expected a 2-D plane or (H, W, 3) image")
    h, w = arr.shape[0], arr.shape[1]
    if h < 1 or w < 1:
        raise ValueError("image has no pixels")
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    return arr[top : top + side, left : left + side].copy()


@dataclass(frozen=True)
class CropSpec:
    """Square crop window: `side` pixels starting at (top, left)."""

    top: int
    left: int
    side: int

    def __post_init__(self):
        if self.top < 0 or self.left < 0:
            raise ValueError("crop offsets must be non-negative")
        if self.side < 1:
            raise ValueError("crop side must be positive")


def aligned_crop(plane, spec: CropSpec) -> np.ndarray:
    """Cut a grid-aligned square window out of a luminance plane.

    Offsets must be multiples of 8 so every 8x8 block of the output is
    bit-identical to a block of the input.
    """
    arr = _ensure_plane(plane)
    if spec.top % 8 != 0 or spec.left % 8 != 0:
        raise CropError(f"crop offsets ({spec.top}, {spec.left}) are not multiples of 8")
    h, w = arr.shape
    if spec.top + spec.side > h or spec.left + spec.side > w:
        raise CropError(
            f"crop window {spec.side}x{spec.side} at ({spec.top}, {spec.left}) "
            f"exceeds plane {h}x{w}"
        )
    return arr[spec.top : spec.top + spec.side, spec.left : spec.left + spec.side].copy()


def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel with a = -0.5 (4-tap support)."""
    a = -0.5
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def cubic_interp_1d(values, positions) -> np.ndarray:
    """Evaluate the a = -0.5 cubic convolution of a 1-D sample list.

    `positions` are real coordinates in sample units (sample k sits at
    coordinate k); indices outside the list are clamped to the ends.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    pos = np.atleast_1d(np.asarray(positions, dtype=np.float64))
    base = np.floor(pos).astype(np.intp)
    frac = pos - base
    out = np.zeros_like(pos)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, v.size - 1)
        out += _cubic_kernel(frac - k) * v[idx]
    return out if np.ndim(positions) else float(out[0])


def _resize_axis(arr: np.ndarray, target: int) -> np.ndarray:
    """Resample axis 0 of a 2-D array to `target` rows (centers aligned)."""
    n = arr.shape[0]
    scale = n / target
    pos = (np.arange(target) + 0.5) * scale - 0.5
    base = np.floor(pos).astype(np.intp)
    frac = pos - base
    out = np.zeros((target, arr.shape[1]), dtype=np.float64)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n - 1)
        w = _cubic_kernel(frac - k)
        out += w[:, None] * np.take(arr, idx, axis=0)
    return out


def _resize_square(plane: np.ndarray, target: int) -> np.ndarray:
    """Rows pass then columns pass; trailing axes ride along as columns."""
    side = plane.shape[0]
    tail = plane.shape[2:]
    cols = int(np.prod(tail, dtype=np.intp)) if tail else 1
    out = _resize_axis(plane.reshape(side, side * cols), target)
    out = out.reshape(target, side, *tail)
    out = np.moveaxis(out, 1, 0).reshape(side, target * cols)
    out = _resize_axis(out, target)
    return np.moveaxis(out.reshape(target, target, *tail), 1, 0)


def bicubic_resize(img, target_side: int) -> np.ndarray:
    """Resize a square RGB image or luminance plane to target_side x target_side.

    Separable cubic convolution (a = -0.5), borders replicated, output
    clamped to [0, 255]. RGB inputs round back to uint8; planes stay
    float64 and unrounded.
    """
    if target_side < 1:
        raise ValueError("target_side must be positive")
    arr = np.asarray(img)
    if arr.ndim == 3:
        rgb = _ensure_rgb(arr)
        if rgb.shape[0] != rgb.shape[1]:
            raise ValueError(f"source must be square, got {rgb.shape[1]}x{rgb.shape[0]}")
        out = _resize_square(rgb.astype(np.float64), target_side)
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    plane = _ensure_plane(arr)
    if plane.shape[0] != plane.shape[1]:
        raise ValueError(f"source must be square, got {plane.shape[1]}x{plane.shape[0]}")
    return np.clip(_resize_square(plane, target_side), 0.0, 255.0)


def to_luminance(img) -> np.ndarray:
    """BT.601 full-range luminance, kept as real values (no rounding)."""
    rgb = _ensure_rgb(img).astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def write_pgm(plane, path) -> None:
    """Dump a luminance plane as binary PGM (P5, maxval 255, rounded)."""
    arr = _ensure_plane(plane)
    data = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
