"""8-bit grayscale image container, bit access and lossless file I/O.

PGM (P5, maxval 255) is the canonical interchange format; PNG is accepted
for convenience through Pillow.  RGB inputs are reduced to luma with the
0.299/0.587/0.114 weights, rounded half up.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import CorruptFile, InvalidDimensions, PositionOutOfRange, UnsupportedFormat

PathLike = Union[str, os.PathLike]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable 8-bit grayscale image stored as a read-only ``(h, w)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise InvalidDimensions(f"expected a 2-D pixel grid, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise InvalidDimensions("image must have positive width and height")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True, order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> "Image":
        flat = np.asarray(values, dtype=np.int64).ravel()
        if width <= 0 or height <= 0:
            raise InvalidDimensions("image must have positive width and height")
        if flat.size != width * height:
            raise InvalidDimensions(
                f"{flat.size} pixels given for a {width}x{height} image")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> int:
        return self.pixels.size

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.ravel()

    def to_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def copy_array(self) -> np.ndarray:
        """A writable copy of the pixel grid (the only way to 'modify' an image)."""
        return np.array(self.pixels, copy=True)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"Image(width={self.width}, height={self.height})"


def get_bit(pixel: int, position: int) -> int:
    """Bit ``position`` of an 8-bit value, 1 being the MSB and 8 the LSB."""
    if not 1 <= position <= 8:
        raise PositionOutOfRange(f"bit position {position} not in [1, 8]")
    return (int(pixel) >> (8 - position)) & 1


class BitCursor:
    """Sequential reader/writer over the low bits of an image's pixels.

    Each pixel contributes ``plan`` bits (a constant or a per-pixel array).
    Bits are placed most-significant-first into the cleared low field.
    Writes go to a private copy; call :meth:`image` to freeze the result.
    """

    def __init__(self, img: Image, plan=1, start: int = 0):
        self._buf = img.copy_array().ravel()
        n = self._buf.size
        if np.isscalar(plan):
            self._plan = np.full(n, int(plan), dtype=np.int64)
        else:
            self._plan = np.asarray(plan, dtype=np.int64).ravel()
            if self._plan.size != n:
                raise ValueError("plan length must equal the pixel count")
        self._shape = img.pixels.shape
        self.pixel_index = start
        self.bit_offset = 0

    def _advance(self):
        self.bit_offset += 1
        while self.pixel_index < self._buf.size and self.bit_offset >= self._plan[self.pixel_index]:
            self.pixel_index += 1
            self.bit_offset = 0

    def _skip_empty(self):
        while self.pixel_index < self._buf.size and self._plan[self.pixel_index] == 0:
            self.pixel_index += 1

    def _locate(self):
        self._skip_empty()
        if self.pixel_index >= self._buf.size:
            raise IndexError("bit cursor ran past the last pixel")
        k = int(self._plan[self.pixel_index])
        return self.pixel_index, k - 1 - self.bit_offset

    def write(self, bit: int) -> None:
        idx, shift = self._locate()
        v = int(self._buf[idx])
        v = (v & ~(1 << shift)) | ((bit & 1) << shift)
        self._buf[idx] = v
        self._advance()

    def read(self) -> int:
        idx, shift = self._locate()
        bit = (int(self._buf[idx]) >> shift) & 1
        self._advance()
        return bit

    def write_uint(self, value: int, nbits: int) -> None:
        for i in range(nbits - 1, -1, -1):
            self.write((value >> i) & 1)

    def read_uint(self, nbits: int) -> int:
        value = 0
        for _ in range(nbits):
            value = (value << 1) | self.read()
        return value

    def image(self) -> Image:
        return Image(self._buf.reshape(self._shape))


# ---------------------------------------------------------------- file I/O

def _read_pgm(data: bytes) -> Image:
    # tokenize header fields while skipping comments
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise CorruptFile("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise CorruptFile("truncated PGM comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise CorruptFile("non-numeric PGM header field") from None
    if pos >= len(data):
        raise CorruptFile("missing PGM raster")
    pos += 1  # single whitespace byte before raster
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise CorruptFile(f"invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormat(f"PGM maxval {maxval}; only 8-bit (255) is supported")
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise CorruptFile(
            f"PGM raster has {len(raster)} bytes, expected {width * height}")
    return Image(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    y = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def _read_png(path: Path) -> Image:
    from PIL import Image as PILImage, UnidentifiedImageError

    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("1", "I", "I;16", "I;16B", "I;16L", "F", "RGB;16", "RGBA;16"):
                raise UnsupportedFormat(f"PNG mode {mode!r} is not 8-bit")
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            arr = np.asarray(im)
    except UnidentifiedImageError:
        raise CorruptFile(f"{path} is not a readable PNG") from None
    except (OSError, SyntaxError) as exc:
        raise CorruptFile(f"{path}: {exc}") from None
    if arr.dtype != np.uint8:
        raise UnsupportedFormat(f"bit depth of {path} is not 8")
    if mode in ("L",):
        return Image(arr)
    if mode == "LA":
        return Image(arr[..., 0])
    if mode in ("RGB", "RGBA"):
        return Image(rgb_to_luma(arr[..., :3]))
    raise UnsupportedFormat(f"unsupported PNG mode {mode!r}")


def load_image(path: PathLike) -> Image:
    """Load an 8-bit grayscale PGM (P5) or 8-bit PNG as an :class:`Image`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"P5"):
        return _read_pgm(path.read_bytes())
    if head.startswith(b"\x89PNG\r\n\x1a\n"):
        return _read_png(path)
    if head[:2] in (b"P1", b"P2", b"P3", b"P4", b"P6"):
        raise UnsupportedFormat("only binary grayscale PGM (P5) is supported")
    raise CorruptFile(f"{path}: neither PGM nor PNG")


def is_lossy_path(path: PathLike) -> bool:
    return Path(path).suffix.lower() in (".jpg", ".jpeg", ".jpe", ".jfif", ".webp")


def save_image(img: Image, path: PathLike) -> None:
    """Write ``img`` losslessly; ``.png`` selects PNG, anything else PGM."""
    if not isinstance(img, Image):
        img = Image(img)
    if img.size == 0:
        raise InvalidDimensions("cannot save an empty image")
    path = Path(path)
    if is_lossy_path(path):
        raise UnsupportedFormat(f"refusing lossy output format {path.suffix}")
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(np.ascontiguousarray(img.pixels)).save(
            path, format="PNG")
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())
