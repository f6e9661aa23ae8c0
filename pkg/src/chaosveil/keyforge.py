"""Raw-key formation from a cover image and CNN parameter derivation.

Sender and receiver both run SIFT on the *key-stable* view of the carrier
(4 LSBs cleared).  Embedding only ever touches those 4 bits, so the two
sides see identical inputs and derive the same 128-bit key.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import reduce
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from . import sift
from .errors import NoKeypointsFound
from .imagecore import Image

STABLE_MASK = 0xF0


@dataclass(frozen=True)
class RawKey:
    T: bytes

    def __post_init__(self):
        if len(self.T) != 16:
            raise ValueError(f"raw key must be 16 bytes, got {len(self.T)}")
        object.__setattr__(self, "T", bytes(self.T))

    def __getitem__(self, i: int) -> int:
        """1-based access matching T1..T16."""
        if not 1 <= i <= 16:
            raise IndexError("key bytes are numbered 1..16")
        return self.T[i - 1]

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.T, dtype=np.uint8))

    def flip_bit(self, index: int) -> "RawKey":
        """Copy with bit ``index`` (0 = MSB of T1) inverted."""
        b = bytearray(self.T)
        b[index // 8] ^= 0x80 >> (index % 8)
        return RawKey(bytes(b))

    def hex(self) -> str:
        return self.T.hex()


@dataclass(frozen=True)
class KeyParams:
    h1: int
    h2: int
    key_sum: int
    key_xor: int
    lam: int
    h: float
    x0: Tuple[float, float, float]
    n0: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x0"] = list(self.x0)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def key_stable(img: Image) -> Image:
    """Clear the 4 least significant bits of every pixel."""
    return Image(img.pixels & STABLE_MASK)


def _tie_key(d: sift.Descriptor):
    kp = d.keypoint
    return (-kp.response, kp.y, kp.x, kp.sigma, kp.theta)


def select_descriptor(descriptors: Sequence[sift.Descriptor]) -> sift.Descriptor:
    """Descriptor of the strongest keypoint; ties go to smallest (y, x, sigma, theta)."""
    if not descriptors:
        raise NoKeypointsFound("no SIFT descriptor available in the cover image")
    return min(descriptors, key=_tie_key)


def quantize_descriptor(d) -> np.ndarray:
    values = d.values if isinstance(d, sift.Descriptor) else np.asarray(d, dtype=np.float64)
    return np.minimum(255, np.floor(512.0 * values)).astype(np.int64)


def descriptor_to_rawkey(d) -> RawKey:
    """Parity of each quantized element, packed MSB-first into 16 bytes."""
    q = quantize_descriptor(d)
    if q.size != 128:
        raise ValueError(f"descriptor must have 128 elements, got {q.size}")
    bits = (q % 2).astype(np.uint8)
    return RawKey(np.packbits(bits).tobytes())


def message_digest(msg) -> Tuple[int, int]:
    """(XOR of all pixels, sum of all pixels mod 256) of the plain image."""
    flat = msg.flat if isinstance(msg, Image) else np.asarray(msg, dtype=np.uint8).ravel()
    h1 = int(np.bitwise_xor.reduce(flat)) if flat.size else 0
    h2 = int(flat.astype(np.int64).sum() % 256)
    return h1, h2


def params_from_key(key: RawKey, h1: int, h2: int) -> KeyParams:
    T = key.T
    t = lambda i: T[i - 1]  # noqa: E731
    key_sum = sum(T) % 256
    key_xor = reduce(lambda a, b: a ^ b, T, 0)
    hh = h1 * h2
    lam = (t(10) + t(11) + t(12) + hh) % 256
    h = (t(13) + t(14) + t(15) + t(16) + hh) / 256
    denom = 256 ** 5
    x0 = (
        t(1) * t(4) * t(7) * key_sum * key_xor / denom,
        t(2) * t(5) * t(8) * key_sum * key_xor / denom,
        t(3) * t(6) * t(9) * key_sum * key_xor / denom,
    )
    n0 = (key_sum * key_sum + key_xor * key_xor) % 256
    return KeyParams(h1=h1, h2=h2, key_sum=key_sum, key_xor=key_xor, lam=lam,
                     h=h, x0=x0, n0=n0)


def derive_params(key: RawKey, msg) -> KeyParams:
    h1, h2 = message_digest(msg)
    return params_from_key(key, h1, h2)


def select_from_image(img: Image, config: sift.SiftConfig = sift.DEFAULT_CONFIG) -> sift.Descriptor:
    """Selected descriptor of ``key_stable(img)``.

    Equivalent to ``select_descriptor(extract_features(key_stable(img)))``
    but only builds descriptors for the strongest keypoints.
    """
    keypoints, space = sift.detect_keypoints(key_stable(img), config)
    keypoints = sorted(keypoints, key=lambda kp: (-kp.response, kp.y, kp.x, kp.sigma))
    i = 0
    while i < len(keypoints):
        # every keypoint sharing the current response competes on the tie rule
        j = i
        while j < len(keypoints) and keypoints[j].response == keypoints[i].response:
            j += 1
        found = []
        for kp in keypoints[i:j]:
            found.extend(sift.oriented_descriptors(kp, space))
        if found:
            return select_descriptor(found)
        i = j
    raise NoKeypointsFound("cover image yields no usable SIFT keypoint")


def rawkey_from_image(img: Image, config: sift.SiftConfig = sift.DEFAULT_CONFIG) -> RawKey:
    return descriptor_to_rawkey(select_from_image(img, config))
