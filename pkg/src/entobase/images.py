"""Deterministic pixel operations: decode, center-crop, bilinear resize, luma.

All resampling is done in float64 numpy with half-pixel-center source
coordinates, so results are bit-identical across platforms and runs. Backends
receive unscaled 8-bit pixels; any normalization is theirs.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyImage, UndecodableImage

TARGET_SIDE = 224


def decode_image(data: bytes) -> np.ndarray:
    """Decode compressed image bytes to an RGB uint8 array of shape HxWx3."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(str(exc)) from exc
    if arr.size == 0:
        raise EmptyImage("decoded image has zero pixels")
    return arr


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a HxW or HxWxC array with bilinear sampling (half-pixel centers).

    Returns float64. Identity-sized resizes reproduce the input exactly.
    """
    if img.ndim == 2:
        img = img[:, :, None]
        squeeze = True
    else:
        squeeze = False
    in_h, in_w = img.shape[:2]
    if in_h < 1 or in_w < 1:
        raise EmptyImage("cannot resize an empty image")

    src = img.astype(np.float64)

    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)

    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]

    row0, row1 = src[y0], src[y1]
    top = row0[:, x0] * (1.0 - wx) + row0[:, x1] * wx
    bottom = row1[:, x0] * (1.0 - wx) + row1[:, x1] * wx
    out = top * (1.0 - wy) + bottom * wy
    return out[:, :, 0] if squeeze else out


def center_crop_square(img: np.ndarray) -> np.ndarray:
    """Crop the centered square of side min(H, W); floor offsets for odd remainders."""
    h, w = img.shape[:2]
    if h < 1 or w < 1:
        raise EmptyImage("cannot crop an empty image")
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    return img[top : top + side, left : left + side]


def preprocess(img: np.ndarray) -> np.ndarray:
    """Center square crop then bilinear resize to 224x224x3 uint8.

    Channel order is preserved; idempotent on inputs already 224x224.
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise EmptyImage(f"expected HxWx3 pixels, got shape {img.shape}")
    cropped = center_crop_square(img)
    resized = bilinear_resize(cropped, TARGET_SIDE, TARGET_SIDE)
    return np.clip(np.floor(resized + 0.5), 0, 255).astype(np.uint8)


def luma(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma of an RGB array, kept in float64."""
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise EmptyImage(f"expected HxWx3 pixels, got shape {img.shape}")
    src = img.astype(np.float64)
    return 0.299 * src[:, :, 0] + 0.587 * src[:, :, 1] + 0.114 * src[:, :, 2]


def encode_png(img: np.ndarray) -> bytes:
    """Encode an RGB uint8 array as PNG bytes (fixtures and tests)."""
    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
