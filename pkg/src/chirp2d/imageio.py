"""8-bit grayscale images, binary PGM files and raw grid files.

Grids map to pixels through an affine :class:`ScaleMap`; the map used is kept
with the image so that the conversion can be undone up to quantization.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ImageBuffer",
    "ScaleMap",
    "PgmError",
    "GridFileError",
    "grid_to_image",
    "image_to_grid",
    "pgm_write",
    "pgm_read",
    "grid_write",
    "grid_read",
]

GRID_MAGIC = b"CHRP2DGR"
_GRID_HEADER = struct.Struct("<8sII")
# refuse to allocate more pixels than this from an untrusted header
MAX_PIXELS = 1 << 28


class PgmError(ValueError):
    """Malformed or unsupported PGM data."""


class GridFileError(ValueError):
    """Malformed grid file."""


@dataclass(frozen=True)
class ScaleMap:
    """Affine map sending ``lo`` to 0 and ``hi`` to 255."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"scale map needs finite lo < hi, got ({self.lo}, {self.hi})")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / 255.0


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Grayscale image: ``pixels`` is a ``(height, width)`` uint8 array.

    ``scale`` records the map that produced the pixels, if any; ``degenerate``
    marks an image made from a constant grid.
    """

    width: int
    height: int
    pixels: np.ndarray
    scale: ScaleMap | None = None
    degenerate: bool = False

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255 or not np.issubdtype(px.dtype, np.integer)):
                raise ValueError("pixel values must be integers in [0, 255]")
            px = px.astype(np.uint8)
        if px.shape != (self.height, self.width):
            raise ValueError(f"pixel array {px.shape} does not match {self.height}x{self.width}")
        object.__setattr__(self, "pixels", px)

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.pixels, other.pixels
        )

    @classmethod
    def from_array(cls, pixels, **kw) -> "ImageBuffer":
        px = np.asarray(pixels)
        return cls(px.shape[1], px.shape[0], px, **kw)


def grid_to_image(grid, scale: ScaleMap | None = None) -> ImageBuffer:
    """Quantize a grid to 8 bits.

    With ``scale=None`` the grid's own minimum and maximum are used. Values
    outside ``[lo, hi]`` are clamped. A constant grid under automatic scaling
    gives a uniform mid-gray (128) image with ``degenerate=True``.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("grid contains non-finite entries")
    if scale is None:
        lo, hi = float(g.min()), float(g.max())
        if not lo < hi:
            px = np.full(g.shape, 128, dtype=np.uint8)
            return ImageBuffer(g.shape[1], g.shape[0], px, None, True)
        scale = ScaleMap(lo, hi)
    u = (g - scale.lo) / (scale.hi - scale.lo) * 255.0
    px = np.rint(np.clip(u, 0.0, 255.0)).astype(np.uint8)
    return ImageBuffer(g.shape[1], g.shape[0], px, scale, False)


def image_to_grid(img: ImageBuffer, scale: ScaleMap | None = None) -> np.ndarray:
    """Inverse affine map ``lo + p / 255 * (hi - lo)``; defaults to ``img.scale``."""
    scale = scale or img.scale
    if scale is None:
        raise ValueError("image carries no scale map; pass one explicitly")
    return scale.lo + img.pixels.astype(float) / 255.0 * (scale.hi - scale.lo)


def pgm_write(img: ImageBuffer) -> bytes:
    """Binary PGM (P5, maxval 255) with a minimal header."""
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


_TOKEN = re.compile(rb"\S+")


def _header_tokens(data: bytes, count: int):
    """First ``count`` header tokens with their offsets, skipping ``#`` comments."""
    pos = 0
    tokens = []
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise PgmError(f"truncated header at byte {pos}: expected {count - len(tokens)} more field(s)")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        m = _TOKEN.match(data, pos)
        tok = m.group()
        if b"#" in tok:
            tok = tok[: tok.index(b"#")]
        tokens.append((tok, pos))
        pos += len(tok)
    return tokens, pos


def pgm_read(data: bytes) -> ImageBuffer:
    """Parse binary PGM bytes.

    Only ``P5`` with maxval 255 is accepted; errors name the byte offset.
    """
    data = bytes(data)
    if data[:2] == b"P2":
        raise PgmError("byte 0: ASCII PGM (P2) is not supported; convert to binary P5")
    if data[:2] != b"P5":
        raise PgmError(f"byte 0: bad magic {data[:2]!r}, expected b'P5'")
    tokens, end = _header_tokens(data, 4)
    fields = []
    for (tok, pos), name in zip(tokens[1:], ("width", "height", "maxval")):
        if not tok.isdigit():
            raise PgmError(f"byte {pos}: {name} {tok!r} is not a decimal integer")
        fields.append(int(tok))
    width, height, maxval = fields
    wpos, mpos = tokens[1][1], tokens[3][1]
    if maxval != 255:
        raise PgmError(f"byte {mpos}: maxval {maxval} unsupported, expected 255")
    if width < 1 or height < 1:
        raise PgmError(f"byte {wpos}: image dimensions {width}x{height} must be positive")
    if width * height > MAX_PIXELS:
        raise PgmError(f"byte {wpos}: dimensions {width}x{height} exceed the {MAX_PIXELS}-pixel limit")
    if end >= len(data) or not data[end : end + 1].isspace():
        raise PgmError(f"byte {end}: expected a single whitespace byte before the raster")
    start = end + 1
    need = width * height
    raster = data[start:]
    if len(raster) < need:
        raise PgmError(f"byte {len(data)}: truncated raster, {len(raster)} of {need} bytes present")
    px = np.frombuffer(raster[:need], dtype=np.uint8).reshape(height, width).copy()
    return ImageBuffer(width, height, px)


def grid_write(grid) -> bytes:
    """Grid file: ``b"CHRP2DGR"``, u32 M, u32 N, then float64 row-major, all little-endian."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {g.shape}")
    M, N = g.shape
    return _GRID_HEADER.pack(GRID_MAGIC, M, N) + np.ascontiguousarray(g, dtype="<f8").tobytes()


def grid_read(data: bytes) -> np.ndarray:
    data = bytes(data)
    if len(data) < _GRID_HEADER.size:
        raise GridFileError(f"byte {len(data)}: truncated header, need {_GRID_HEADER.size} bytes")
    magic, M, N = _GRID_HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise GridFileError(f"byte 0: bad magic {magic!r}, expected {GRID_MAGIC!r}")
    if M == 0 or N == 0:
        raise GridFileError(f"byte 8: empty grid {M}x{N}")
    need = 8 * M * N
    body = data[_GRID_HEADER.size :]
    if len(body) != need:
        raise GridFileError(f"byte {len(data)}: payload is {len(body)} bytes, expected {need} for {M}x{N}")
    return np.frombuffer(body, dtype="<f8").reshape(M, N).astype(float)
