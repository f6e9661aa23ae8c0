"""Dynamic k-LSB steganography with a blind-extractable payload header.

Per-pixel capacity ``k`` comes from the chaotic CNN seeded with bits
b2, b3, b4 of the pixel (b1 = MSB).  After ``n_steps`` RK4 steps,
``gamma = |ceil(x1 + x2 + x3)| mod 255`` is written as 8 bits d1..d8 and
``k = sum(b_i AND d_(i+4)) for i = 1..4``.  Only the high nibble feeds
this computation and embedding never writes above bit b5, so the
receiver recomputes exactly the same plan from the stego image.

Layout: pixels 0..63 hold a 64-bit header in their LSB, then the cipher
bytes follow in raster order, ``k`` bits per pixel, most significant
payload bit into the highest cleared bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .chaoscrypt import DEFAULT_DT, DEFAULT_TEMPLATE, CnnTemplate, integrate
from .errors import BadMagic, CoverTooSmall, InsufficientCapacity, TruncatedPayload
from .imagecore import BitCursor, Image, get_bit

MAGIC = 0xC7
VERSION = 0x01
HEADER_BITS = 64
HEADER_PIXELS = 64
DEFAULT_N_STEPS = 634
MAX_K = 4


@dataclass(frozen=True, eq=False)
class StegoPayload:
    msg_width: int
    msg_height: int
    h1: int
    h2: int
    cipher: np.ndarray
    magic: int = MAGIC
    version: int = VERSION

    def __post_init__(self):
        c = np.asarray(self.cipher, dtype=np.uint8).ravel()
        if not (0 <= self.msg_width < 1 << 16 and 0 <= self.msg_height < 1 << 16):
            raise ValueError("message dimensions must fit in 16 bits")
        if c.size != self.msg_width * self.msg_height:
            raise ValueError(
                f"cipher length {c.size} does not match {self.msg_width}x{self.msg_height}")
        object.__setattr__(self, "cipher", c)

    def header_word(self) -> int:
        return ((self.magic << 56) | (self.version << 48) | (self.msg_width << 32)
                | (self.msg_height << 16) | (self.h1 << 8) | self.h2)

    @property
    def bit_length(self) -> int:
        return HEADER_BITS + 8 * self.cipher.size

    def __eq__(self, other):
        if not isinstance(other, StegoPayload):
            return NotImplemented
        return (self.header_word() == other.header_word()
                and np.array_equal(self.cipher, other.cipher))

    def header_dict(self) -> dict:
        return {"magic": self.magic, "version": self.version,
                "msg_width": self.msg_width, "msg_height": self.msg_height,
                "h1": self.h1, "h2": self.h2}


def _gamma_for_seed(seed_bits, tpl: CnnTemplate, n_steps: int, dt: float) -> int:
    traj = integrate(seed_bits, n_steps, tpl, dt)
    x1, x2, x3 = traj[-1]
    return abs(math.ceil(x1 + x2 + x3)) % 255


def k_for_pixel(pixel: int, tpl: CnnTemplate = DEFAULT_TEMPLATE,
                n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> int:
    """Number of low bits this pixel carries, from its high nibble only."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    b = [get_bit(pixel, p) for p in range(1, 9)]
    gamma = _gamma_for_seed((b[1], b[2], b[3]), tpl, n_steps, dt)
    d = [get_bit(gamma, p) for p in range(1, 9)]
    return sum(b[i] & d[i + 4] for i in range(4))


@lru_cache(maxsize=64)
def k_table(tpl: CnnTemplate = DEFAULT_TEMPLATE, n_steps: int = DEFAULT_N_STEPS,
            dt: float = DEFAULT_DT) -> np.ndarray:
    """``k`` for each of the 16 possible high nibbles."""
    table = np.array([k_for_pixel(nib << 4, tpl, n_steps, dt) for nib in range(16)],
                     dtype=np.int64)
    table.flags.writeable = False
    return table


@dataclass(frozen=True, eq=False)
class KPlan:
    k: np.ndarray

    @classmethod
    def for_image(cls, img: Image, tpl: CnnTemplate = DEFAULT_TEMPLATE,
                  n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> "KPlan":
        return cls(k_table(tpl, n_steps, dt)[img.flat >> 4])

    def __eq__(self, other):
        return isinstance(other, KPlan) and np.array_equal(self.k, other.k)


def capacity(cover: Image, tpl: CnnTemplate = DEFAULT_TEMPLATE,
             n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> int:
    """Total embeddable bits: the 64 header bits plus dynamic k of the rest."""
    if cover.size < HEADER_PIXELS:
        raise CoverTooSmall(f"cover has {cover.size} pixels, header alone needs {HEADER_PIXELS}")
    plan = KPlan.for_image(cover, tpl, n_steps, dt).k
    return HEADER_BITS + int(plan[HEADER_PIXELS:].sum())


def _body_positions(k: np.ndarray, nbits: int):
    """Yield (slot j, pixel mask, stream index) for every written bit."""
    start = np.cumsum(k) - k
    for j in range(MAX_K):
        mask = (j < k) & (start + j < nbits)
        yield j, mask, start[mask] + j


def embed(cover: Image, payload: StegoPayload, tpl: CnnTemplate = DEFAULT_TEMPLATE,
          n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> Image:
    if cover.size < HEADER_PIXELS:
        raise CoverTooSmall(f"cover has {cover.size} pixels, header alone needs {HEADER_PIXELS}")
    available = capacity(cover, tpl, n_steps, dt)
    if payload.bit_length > available:
        raise InsufficientCapacity(payload.bit_length, available)

    cur = BitCursor(cover, plan=1)
    cur.write_uint(payload.header_word(), HEADER_BITS)
    flat = cur.image().copy_array().ravel().astype(np.int64)

    body = flat[HEADER_PIXELS:]
    k = k_table(tpl, n_steps, dt)[body >> 4]
    bits = np.unpackbits(payload.cipher).astype(np.int64)
    for j, mask, idx in _body_positions(k, bits.size):
        shift = k[mask] - 1 - j
        px = body[mask]
        body[mask] = (px & ~(1 << shift)) | (bits[idx] << shift)
    flat[HEADER_PIXELS:] = body
    return Image(flat.reshape(cover.pixels.shape).astype(np.uint8))


def read_header(stego: Image) -> Tuple[int, int, int, int]:
    """(msg_width, msg_height, H1, H2) from the header; raises :class:`BadMagic`."""
    if stego.size < HEADER_PIXELS:
        raise BadMagic("image too small to hold a header")
    word = BitCursor(stego, plan=1).read_uint(HEADER_BITS)
    magic = (word >> 56) & 0xFF
    version = (word >> 48) & 0xFF
    if magic != MAGIC or version != VERSION:
        raise BadMagic(f"header magic/version {magic:#04x}/{version:#04x} not recognised")
    w = (word >> 32) & 0xFFFF
    h = (word >> 16) & 0xFFFF
    return w, h, (word >> 8) & 0xFF, word & 0xFF


def extract(stego: Image, tpl: CnnTemplate = DEFAULT_TEMPLATE,
            n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> StegoPayload:
    w, h, h1, h2 = read_header(stego)
    nbits = 8 * w * h
    body = stego.flat[HEADER_PIXELS:].astype(np.int64)
    k = k_table(tpl, n_steps, dt)[body >> 4]
    available = int(k.sum())
    if nbits > available:
        raise TruncatedPayload(
            f"header declares {nbits} payload bits, image carries {available}")
    bits = np.zeros(nbits, dtype=np.uint8)
    for j, mask, idx in _body_positions(k, nbits):
        shift = k[mask] - 1 - j
        bits[idx] = (body[mask] >> shift) & 1
    return StegoPayload(w, h, h1, h2, np.packbits(bits) if nbits else np.zeros(0, np.uint8))


def estimated_psnr(stego_img: Image, tpl: CnnTemplate = DEFAULT_TEMPLATE,
                   n_steps: int = DEFAULT_N_STEPS, dt: float = DEFAULT_DT) -> float:
    """Expected stego-vs-cover PSNR, assuming uniformly random payload bits.

    A written bit at position p differs from the cover with probability 1/2,
    contributing ``4**p / 2`` to the expected squared error.
    """
    w, h, _, _ = read_header(stego_img)
    nbits = 8 * w * h
    body = stego_img.flat[HEADER_PIXELS:].astype(np.int64)
    k = k_table(tpl, n_steps, dt)[body >> 4]
    err = HEADER_BITS * 0.5
    for j, mask, _ in _body_positions(k, nbits):
        err += 0.5 * float(np.sum(4.0 ** (k[mask] - 1 - j)))
    mse = err / stego_img.size
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)
