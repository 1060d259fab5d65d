"""Netpbm image ingestion.

Supports binary PGM (P5) and binary PPM (P6) with maxval up to 255, which
covers everything the cropping pipeline needs.  Pixels are stored as float64
intensities in [0, 1], shape (height, width, channels).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

# Rec. 601 luma weights for grayscale conversion.
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Raised for files that are not valid binary PGM/PPM."""


@dataclass
class ImageRaster:
    """Decoded image: intensities in [0, 1], row-major (height, width, channels)."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray
    _gray: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height

    def gray(self) -> np.ndarray:
        """Luma plane of shape (height, width); cached after the first call."""
        if self._gray is None:
            if self.channels == 1:
                self._gray = self.pixels[:, :, 0]
            else:
                self._gray = self.pixels @ _LUMA
        return self._gray

    def crop(self, rect: tuple[int, int, int, int]) -> "ImageRaster":
        """Sub-image for an integer (left, top, width, height) pixel rect."""
        left, top, w, h = rect
        if w < 1 or h < 1 or left < 0 or top < 0 or left + w > self.width or top + h > self.height:
            raise ValueError(f"rect {rect} outside {self.width}x{self.height} image")
        return ImageRaster(w, h, self.channels, self.pixels[top : top + h, left : left + w])


def from_array(arr: np.ndarray) -> ImageRaster:
    """Wrap an (H, W) or (H, W, C) array of intensities in [0, 1]."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W) or (H, W, 1|3) array, got shape {arr.shape}")
    if a.size == 0:
        raise ValueError("empty image array")
    if a.min() < 0.0 or a.max() > 1.0:
        raise ValueError("intensities must lie in [0, 1]")
    return ImageRaster(a.shape[1], a.shape[0], a.shape[2], a)


def load_image(path: str | os.PathLike) -> ImageRaster:
    """Decode a binary PGM (P5) or PPM (P6) file.

    Raises ImageFormatError for anything that is not a well-formed single-byte
    P5/P6 file (wrong magic, maxval > 255, or a payload that does not match
    the declared dimensions).
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if len(data) < 2:
        raise ImageFormatError(f"{path}: truncated or empty file")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: unsupported magic {magic!r} (want P5 or P6)")
    channels = 1 if magic == b"P5" else 3

    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        pos = _skip_separators(data, pos, path)
        start = pos
        while pos < len(data) and not _is_space(data[pos]):
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise ImageFormatError(f"{path}: malformed header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: non-positive dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(data) or not _is_space(data[pos]):
        raise ImageFormatError(f"{path}: missing raster separator")
    pos += 1
    expected = width * height * channels
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise ImageFormatError(
            f"{path}: raster has {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / maxval
    pixels = values.reshape(height, width, channels)
    return ImageRaster(width, height, channels, pixels)


def save_image(path: str | os.PathLike, image: ImageRaster) -> None:
    """Write a raster as binary PGM (1 channel) or PPM (3 channels), maxval 255."""
    from .fileio import atomic_write_bytes

    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    quantized = np.clip(np.rint(image.pixels * 255.0), 0, 255).astype(np.uint8)
    atomic_write_bytes(path, header + quantized.tobytes())


def _is_space(byte: int) -> bool:
    return byte in (0x20, 0x09, 0x0A, 0x0D, 0x0B, 0x0C)


def _skip_separators(data: bytes, pos: int, path) -> int:
    """Advance past whitespace and '#' comment lines inside the header."""
    while pos < len(data):
        if _is_space(data[pos]):
            pos += 1
        elif data[pos] == 0x23:  # '#'
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            return pos
    raise ImageFormatError(f"{path}: truncated header")
