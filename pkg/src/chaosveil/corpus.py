"""Deterministic synthetic test images with natural-image statistics.

The benchmark photographs used in the literature are not redistributable,
so the harness and test-suite run on seeded 1/f textures overlaid with a
few smooth shapes.  Same seed, same bytes, on every platform.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .imagecore import Image

CORPUS_SIZE = 25


def natural_texture(seed: int, size: int = 256, width: int = None) -> Image:
    height = size
    width = size if width is None else width
    rng = np.random.default_rng(seed)
    beta = 1.6 + 0.8 * rng.random()
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    f = np.sqrt(fx * fx + fy * fy)
    f[0, 0] = 1.0
    amp = f ** (-beta / 2.0)
    amp[0, 0] = 0.0
    phase = rng.uniform(0.0, 2.0 * np.pi, size=amp.shape)
    field = np.fft.irfft2(amp * np.exp(1j * phase), s=(height, width))

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    scale = field.std()
    for _ in range(int(rng.integers(3, 8))):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(0.04, 0.18) * min(height, width)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * r * r))
        field += rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 2.5) * scale * blob

    lo, hi = np.percentile(field, [0.5, 99.5])
    out = (field - lo) / (hi - lo) * 255.0
    return Image(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


def corpus(size: int = 256, count: int = CORPUS_SIZE, base_seed: int = 2024) -> List[Tuple[str, Image]]:
    """``count`` named fixtures, sorted by name."""
    return [(f"texture-{i:02d}", natural_texture(base_seed + i, size)) for i in range(count)]
