"""Raster primitives: PNG io, deterministic resampling and blending.

Everything here is fixed-point-reproducible: float64 math, round-half-up,
no library resamplers, so renders are bit-stable across platforms.
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np
from PIL import Image


def round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(round_half_up(values), 0, 255).astype(np.uint8)


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_rgba(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"), dtype=np.uint8)


def save_png(path: str | Path, pixels: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PNG")


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def rgb_from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def resize_bilinear(src: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resample ``src`` (H, W, C) to (height, width, C).

    Bilinear with half-pixel centers and clamped edges; channels are
    interpolated independently (straight, non-premultiplied alpha).
    """
    if width < 1 or height < 1:
        raise ValueError(f"target size must be positive, got {width}x{height}")
    src_h, src_w = src.shape[:2]
    if (src_w, src_h) == (width, height):
        return src.copy()

    xs = (np.arange(width, dtype=np.float64) + 0.5) * (src_w / width) - 0.5
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (src_h / height) - 0.5
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, src_w - 1)
    x1i = np.clip(x0.astype(np.int64) + 1, 0, src_w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, src_h - 1)
    y1i = np.clip(y0.astype(np.int64) + 1, 0, src_h - 1)

    # separable: interpolate along x for every source row, then along y;
    # per-pixel arithmetic order is identical to the naive four-tap form
    img = src.astype(np.float64)
    wx = fx[None, :, None]
    rows = img[:, x0i]
    rows *= 1.0 - wx
    right = img[:, x1i]
    right *= wx
    rows += right
    wy = fy[:, None, None]
    out = rows[y0i]
    out *= 1.0 - wy
    top = rows[y1i]
    top *= wy
    out += top
    out += 0.5
    np.floor(out, out=out)
    np.clip(out, 0, 255, out=out)
    return out.astype(np.uint8)


def blend_over(dst_rgb: np.ndarray, src_rgba: np.ndarray) -> np.ndarray:
    """Source-over blend of an RGBA raster onto an opaque RGB one.

    Integer form of round_half_up((src*a + dst*(255-a)) / 255); the rational
    value never sits on a .5 tie (255 is odd), so this matches the float64
    formula bit for bit.
    """
    if dst_rgb.shape[:2] != src_rgba.shape[:2]:
        raise ValueError(
            f"blend shapes differ: {dst_rgb.shape[:2]} vs {src_rgba.shape[:2]}"
        )
    alpha = src_rgba[..., 3:4].astype(np.int32)
    weighted = src_rgba[..., :3].astype(np.int32) * alpha
    weighted += dst_rgb.astype(np.int32) * (255 - alpha)
    weighted *= 2
    weighted += 255
    weighted //= 510
    return weighted.astype(np.uint8)


def byte_stream(n: int, *parts: bytes | str | int) -> bytes:
    """Deterministic pseudo-random bytes keyed by ``parts``.

    SHAKE-256 as an extendable-output function; stable across platforms and
    library versions, which the seeded mocks rely on.
    """
    xof = hashlib.shake_256()
    for part in parts:
        if isinstance(part, int):
            part = str(part)
        if isinstance(part, str):
            part = part.encode("utf-8")
        xof.update(len(part).to_bytes(8, "little"))
        xof.update(part)
    return xof.digest(n)
