"""Binary file -> grayscale image -> fixed-length feature vector.

Each byte of the input is one 8-bit pixel.  Bytes are wrapped into rows of
a width chosen from the file size (see :data:`DEFAULT_WIDTH_RULE`), the
last row is zero-padded, the image is resized to ``side x side`` and then
flattened row-major into ``side**2`` byte values (1024 for the default
``side = 32``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInput, InvalidArgument, ParseError, ShapeMismatch

# (max_byte_count, width); None is the open-ended final band.
DEFAULT_WIDTH_RULE: tuple[tuple[Optional[int], int], ...] = (
    (10 * 1024 - 1, 32),
    (30 * 1024 - 1, 64),
    (60 * 1024 - 1, 128),
    (100 * 1024 - 1, 256),
    (200 * 1024 - 1, 384),
    (500 * 1024 - 1, 512),
    (1024 * 1024 - 1, 768),
    (None, 1024),
)

INTERPOLATIONS = ("nearest", "bilinear")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Byte-valued pixel grid; ``pixels`` has shape ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeMismatch(f"image must be a non-empty 2-D grid, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise InvalidArgument("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class FeatureConfig:
    side: int = 32
    interpolation: str = "nearest"
    width_rule: tuple = field(default=DEFAULT_WIDTH_RULE)

    def __post_init__(self):
        if self.side < 2:
            raise InvalidArgument(f"side must be >= 2, got {self.side}")
        if self.interpolation not in INTERPOLATIONS:
            raise InvalidArgument(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "width_rule", validate_width_rule(self.width_rule))

    @property
    def feature_len(self) -> int:
        return self.side * self.side


def validate_width_rule(rule: Sequence) -> tuple:
    bands = tuple((None if hi is None else int(hi), int(w)) for hi, w in rule)
    if not bands:
        raise InvalidArgument("width rule needs at least one band")
    if bands[-1][0] is not None:
        raise InvalidArgument("final width band must be open-ended")
    previous = 0
    for hi, width in bands:
        if width < 1:
            raise InvalidArgument(f"band width must be positive, got {width}")
        if hi is None:
            continue
        if hi <= previous:
            raise InvalidArgument("width bands must be strictly increasing")
        previous = hi
    if any(hi is None for hi, _ in bands[:-1]):
        raise InvalidArgument("only the final width band may be open-ended")
    return bands


def parse_width_rule(text: str) -> tuple:
    """Parse a width-rule file.

    One band per line, ``<max_bytes> <width>``; the final line uses ``*``
    for the open-ended band.  ``#`` starts a comment::

        10239   32
        30719   64
        *       128
    """
    bands = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = re.split(r"[\s,]+", line)
        if len(parts) != 2:
            raise ParseError("expected '<max_bytes> <width>'", lineno)
        hi, width = parts
        try:
            bands.append((None if hi == "*" else int(hi), int(width)))
        except ValueError:
            raise ParseError(f"non-integer band {line!r}", lineno) from None
    try:
        return validate_width_rule(bands)
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from None


def select_width(byte_count: int, width_rule=DEFAULT_WIDTH_RULE) -> int:
    if byte_count < 1:
        raise EmptyInput("cannot pick an image width for an empty binary")
    for hi, width in width_rule:
        if hi is None or byte_count <= hi:
            return width
    raise InvalidArgument("width rule has no open-ended band")


def bytes_to_image(data: bytes, width_rule=DEFAULT_WIDTH_RULE,
                   width: Optional[int] = None) -> GrayImage:
    """Wrap ``data`` into rows; ``width`` overrides the width rule."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if buf.size == 0:
        raise EmptyInput("binary is empty")
    if width is None:
        width = select_width(buf.size, width_rule)
    elif width < 1:
        raise InvalidArgument("width must be positive")
    height = math.ceil(buf.size / width)
    pixels = np.zeros(height * width, dtype=np.uint8)
    pixels[:buf.size] = buf
    return GrayImage(pixels.reshape(height, width))


def _resize_nearest(px: np.ndarray, side: int) -> np.ndarray:
    h, w = px.shape
    rows = (np.arange(side) * h) // side
    cols = (np.arange(side) * w) // side
    return px[rows[:, None], cols[None, :]]


def _bilinear_axis(src: int, side: int):
    # Pixel-center alignment: output center maps to (i + .5) * src/side - .5.
    pos = (np.arange(side) + 0.5) * (src / side) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, pos - lo


def _resize_bilinear(px: np.ndarray, side: int) -> np.ndarray:
    h, w = px.shape
    r0, r1, fy = _bilinear_axis(h, side)
    c0, c1, fx = _bilinear_axis(w, side)
    img = px.astype(np.float64)
    fx = fx[None, :]
    top = img[r0][:, c0] * (1 - fx) + img[r0][:, c1] * fx
    bottom = img[r1][:, c0] * (1 - fx) + img[r1][:, c1] * fx
    out = top * (1 - fy[:, None]) + bottom * fy[:, None]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def resize_image(img: GrayImage, side: int, interpolation: str = "nearest") -> GrayImage:
    if side < 2:
        raise InvalidArgument(f"side must be >= 2, got {side}")
    if interpolation == "nearest":
        return GrayImage(_resize_nearest(img.pixels, side))
    if interpolation == "bilinear":
        return GrayImage(_resize_bilinear(img.pixels, side))
    raise InvalidArgument(f"unknown interpolation {interpolation!r}")


def flatten(img: GrayImage, side: Optional[int] = None) -> np.ndarray:
    """Row-major feature vector of a square image (``side`` checks the size)."""
    if img.width != img.height or (side is not None and img.width != side):
        expected = f"{side}x{side}" if side is not None else "square"
        raise ShapeMismatch(f"expected {expected} image, got {img.width}x{img.height}")
    return img.pixels.reshape(-1).copy()


def unflatten(vector, side: Optional[int] = None) -> GrayImage:
    vec = np.asarray(vector)
    if side is None:
        side = math.isqrt(vec.size)
    if vec.ndim != 1 or vec.size != side * side:
        raise ShapeMismatch(f"vector of length {vec.size} is not {side}x{side}")
    return GrayImage(vec.reshape(side, side))


def featurize_bytes(data: bytes, config: FeatureConfig = FeatureConfig(),
                    width: Optional[int] = None) -> np.ndarray:
    img = bytes_to_image(data, config.width_rule, width=width)
    return flatten(resize_image(img, config.side, config.interpolation), config.side)


# Alias matching the pipeline stage name; a "file" here is its raw bytes.
featurize_file = featurize_bytes


def featurize_path(path, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    try:
        return featurize_bytes(Path(path).read_bytes(), config)
    except EmptyInput:
        raise EmptyInput(f"{path}: file is empty") from None


def export_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


_PGM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)?)*\s*(\d+)")


def parse_pgm(data: bytes) -> GrayImage:
    """Inverse of :func:`export_pgm` (binary P5, maxval <= 255)."""
    if not data.startswith(b"P5"):
        raise ParseError("not a binary PGM (missing P5 magic)")
    pos = 2
    values = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ParseError("truncated PGM header")
        values.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = values
    if maxval < 1 or maxval > 255:
        raise ParseError(f"unsupported maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    payload = data[pos:pos + width * height]
    if len(payload) != width * height:
        raise ParseError("truncated PGM raster")
    return GrayImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width))
