"""SIFT keypoint detection and 128-d descriptors, written against numpy.

Pipeline: Gaussian scale space -> DoG 26-neighbour extrema -> sub-pixel
refinement with contrast/edge rejection -> 36-bin orientation assignment
-> 4x4x8 descriptor with tri-linear binning and 0.2 clamping.

Intensities are scaled to [0, 1] before processing, so the contrast
threshold of 0.03 applies to that range.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ImageTooSmall, WindowOutOfBounds
from .imagecore import Image

TWO_PI = 2.0 * math.pi

ORI_BINS = 36
ORI_SIGMA_FACTOR = 1.5
ORI_PEAK_RATIO = 0.8
DESC_WIDTH = 4
DESC_BINS = 8
DESC_CELL_FACTOR = 3.0
DESC_CLAMP = 0.2
MIN_OCTAVE_SIDE = 8


@dataclass(frozen=True)
class SiftConfig:
    num_octaves: int = 4
    levels_per_octave: int = 5
    base_sigma: float = 1.6
    assumed_blur: float = 0.5
    contrast: float = 0.03
    edge_r: float = 10.0
    max_hops: int = 5
    min_scale: float = 1.5

    def __post_init__(self):
        if self.num_octaves < 1:
            raise ValueError("num_octaves must be >= 1")
        if self.levels_per_octave < 3:
            raise ValueError("levels_per_octave must be >= 3")
        if not self.base_sigma > 0:
            raise ValueError("base_sigma must be positive")
        if not self.contrast > 0:
            raise ValueError("contrast threshold must be positive")
        if not self.edge_r > 1:
            raise ValueError("edge ratio r must exceed 1")

    @property
    def k(self) -> float:
        return 2.0 ** (1.0 / (self.levels_per_octave - 2))


DEFAULT_CONFIG = SiftConfig()


@dataclass
class ScaleSpace:
    """Gaussian pyramid; ``octaves[o]`` is a ``(levels, h, w)`` float array.

    ``sigmas[s]`` is the blur of level ``s`` in that octave's own pixel
    units; the effective image-space blur is ``sigmas[s] * 2**o``.
    """

    octaves: List[np.ndarray]
    sigmas: np.ndarray
    k: float
    config: SiftConfig = DEFAULT_CONFIG
    _dogs: Optional[List[np.ndarray]] = field(default=None, repr=False)

    @property
    def dogs(self) -> List[np.ndarray]:
        if self._dogs is None:
            self._dogs = [oct_[1:] - oct_[:-1] for oct_ in self.octaves]
        return self._dogs

    def effective_sigma(self, octave: int, level: float) -> float:
        return self.config.base_sigma * self.k ** level * 2.0 ** octave


@dataclass(frozen=True)
class Candidate:
    octave: int
    level: int
    y: int
    x: int


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    sigma: float
    theta: float
    response: float
    magnitude: float
    octave: int
    level: int
    # position/scale inside the octave grid, used for sampling
    ox: float = field(repr=False, default=0.0)
    oy: float = field(repr=False, default=0.0)
    olevel: float = field(repr=False, default=0.0)

    def sort_key(self):
        return (-self.response, self.y, self.x, self.sigma, self.theta)


@dataclass(frozen=True, eq=False)
class Descriptor:
    values: np.ndarray
    keypoint: Keypoint

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def _as_unit_float(img) -> np.ndarray:
    if isinstance(img, Image):
        return img.pixels.astype(np.float64) / 255.0
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("SIFT expects a single-channel image")
    return arr


def gaussian_kernel(sigma: float, truncate: float = 4.0) -> np.ndarray:
    radius = max(1, int(math.ceil(truncate * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_blur(arr: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return np.array(arr, dtype=np.float64, copy=True)
    g = gaussian_kernel(sigma)
    out = ndimage.correlate1d(arr, g, axis=0, mode="reflect")
    return ndimage.correlate1d(out, g, axis=1, mode="reflect")


def build_scale_space(img, num_octaves: Optional[int] = None,
                      levels_per_octave: Optional[int] = None,
                      base_sigma: Optional[float] = None,
                      config: SiftConfig = DEFAULT_CONFIG) -> ScaleSpace:
    """Gaussian pyramid with ``k = 2 ** (1 / (levels_per_octave - 2))``.

    ``levels_per_octave`` counts DoG levels, so each octave holds one more
    Gaussian image and ``levels_per_octave - 2`` DoG levels are searched for
    extrema.  The next octave starts from the level whose blur is exactly
    twice the base.  Octaves whose shorter side would fall below 8 pixels
    are dropped silently.
    """
    overrides = {}
    if num_octaves is not None:
        overrides["num_octaves"] = num_octaves
    if levels_per_octave is not None:
        overrides["levels_per_octave"] = levels_per_octave
    if base_sigma is not None:
        overrides["base_sigma"] = base_sigma
    if overrides:
        config = SiftConfig(**{**config.__dict__, **overrides})
    arr = _as_unit_float(img)
    if min(arr.shape) < 16:
        raise ImageTooSmall(f"SIFT needs at least 16x16 pixels, got {arr.shape[1]}x{arr.shape[0]}")

    n_levels = config.levels_per_octave + 1
    k = config.k
    sigmas = config.base_sigma * k ** np.arange(n_levels)
    increments = [math.sqrt(sigmas[s] ** 2 - sigmas[s - 1] ** 2) for s in range(1, n_levels)]

    first = max(config.base_sigma ** 2 - config.assumed_blur ** 2, 0.0)
    base = gaussian_blur(arr, math.sqrt(first))
    octaves = []
    for _ in range(config.num_octaves):
        if min(base.shape) < MIN_OCTAVE_SIDE:
            break
        levels = [base]
        for inc in increments:
            levels.append(gaussian_blur(levels[-1], inc))
        octaves.append(np.stack(levels))
        base = levels[config.levels_per_octave - 2][::2, ::2]
    return ScaleSpace(octaves=octaves, sigmas=sigmas, k=k, config=config)


def _strict_extrema(dog: np.ndarray) -> np.ndarray:
    """``(s, y, x)`` of strict 26-neighbour maxima/minima, raster order."""
    S, H, W = dog.shape
    if S < 3 or H < 3 or W < 3:
        return np.empty((0, 3), dtype=np.int64)
    c = dog[1:-1, 1:-1, 1:-1]
    is_max = np.ones(c.shape, dtype=bool)
    is_min = np.ones(c.shape, dtype=bool)
    for ds in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if ds == 0 and dy == 0 and dx == 0:
                    continue
                nb = dog[1 + ds:S - 1 + ds, 1 + dy:H - 1 + dy, 1 + dx:W - 1 + dx]
                is_max &= c > nb
                is_min &= c < nb
    idx = np.argwhere(is_max | is_min)
    return (idx + 1).astype(np.int64)


def dog_extrema(space: ScaleSpace) -> List[Candidate]:
    """Strict extrema of each DoG level over its 26-neighbourhood."""
    out = []
    for o, dog in enumerate(space.dogs):
        for s, y, x in _strict_extrema(dog):
            out.append(Candidate(o, int(s), int(y), int(x)))
    return out


def refine_and_filter(candidates: Sequence[Candidate], space: ScaleSpace) -> List[Keypoint]:
    """Quadratic sub-pixel fit plus low-contrast and edge rejection.

    Orientation is left at 0 here; :func:`assign_orientation` fills it in.
    Candidates converging on the same sample are reported once.
    """
    cfg = space.config
    by_octave = {}
    for c in candidates:
        by_octave.setdefault(c.octave, []).append((c.level, c.y, c.x))
    keypoints = []
    for o in sorted(by_octave):
        dog = space.dogs[o]
        locs, vals = kernels.refine_extrema(dog, np.asarray(by_octave[o], dtype=np.int64),
                                            cfg.contrast, cfg.edge_r, cfg.max_hops)
        seen = set()
        scale = 2.0 ** o
        for (s, y, x), (ox, oy, os_, dval) in zip(locs.tolist(), vals.tolist()):
            if (s, y, x) in seen:
                continue
            seen.add((s, y, x))
            level = s + os_
            sigma = space.effective_sigma(o, level)
            if sigma < cfg.min_scale:
                continue
            keypoints.append(Keypoint(
                x=(x + ox) * scale, y=(y + oy) * scale, sigma=sigma, theta=0.0,
                response=abs(dval), magnitude=0.0, octave=o, level=s,
                ox=x + ox, oy=y + oy, olevel=level))
    return keypoints


def _gaussian_level(space: ScaleSpace, kp: Keypoint) -> np.ndarray:
    n = space.octaves[kp.octave].shape[0]
    lvl = min(max(int(math.floor(kp.olevel + 0.5)), 0), n - 1)
    return space.octaves[kp.octave][lvl]


def _octave_sigma(space: ScaleSpace, kp: Keypoint) -> float:
    return space.config.base_sigma * space.k ** kp.olevel


def assign_orientation(kp: Keypoint, space: ScaleSpace) -> List[Keypoint]:
    """One keypoint per histogram peak reaching 80% of the highest peak.

    Returns an empty list when the neighbourhood carries no gradient.
    """
    L = _gaussian_level(space, kp)
    H, W = L.shape
    sw = ORI_SIGMA_FACTOR * _octave_sigma(space, kp)
    radius = max(1, int(round(3.0 * sw)))
    cx = int(math.floor(kp.ox + 0.5))
    cy = int(math.floor(kp.oy + 0.5))
    off = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(off, off, indexing="ij")
    py = cy + dy
    px = cx + dx
    valid = (px >= 1) & (px <= W - 2) & (py >= 1) & (py <= H - 2)
    py, px, dy, dx = py[valid], px[valid], dy[valid], dx[valid]
    gx = L[py, px + 1] - L[py, px - 1]
    gy = L[py + 1, px] - L[py - 1, px]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), TWO_PI)
    weight = np.exp(-(dx * dx + dy * dy) / (2.0 * sw * sw))
    bins = np.floor(ang * (ORI_BINS / TWO_PI)).astype(np.int64) % ORI_BINS
    hist = np.zeros(ORI_BINS)
    np.add.at(hist, bins, weight * mag)

    peak = hist.max()
    if not peak > 0:
        return []
    m = 0.0
    if 1 <= cy <= H - 2 and 1 <= cx <= W - 2:
        m = float(math.hypot(L[cy, cx + 1] - L[cy, cx - 1], L[cy + 1, cx] - L[cy - 1, cx]))
    out = []
    for i in range(ORI_BINS):
        left = hist[(i - 1) % ORI_BINS]
        right = hist[(i + 1) % ORI_BINS]
        c = hist[i]
        if c > left and c >= right and c >= ORI_PEAK_RATIO * peak:
            denom = left - 2.0 * c + right
            shift = 0.5 * (left - right) / denom if denom != 0 else 0.0
            theta = ((i + 0.5 + shift) * (TWO_PI / ORI_BINS)) % TWO_PI
            out.append(_replace(kp, theta=float(theta), magnitude=m))
    return out


def _replace(kp: Keypoint, **changes) -> Keypoint:
    return Keypoint(**{**kp.__dict__, **changes})


def compute_descriptor(kp: Keypoint, space: ScaleSpace) -> Descriptor:
    """4x4 spatial x 8 orientation histogram around an oriented keypoint.

    Raises :class:`WindowOutOfBounds` when the rotated window does not fit.
    """
    L = _gaussian_level(space, kp)
    H, W = L.shape
    d = DESC_WIDTH
    n = DESC_BINS
    cell = DESC_CELL_FACTOR * _octave_sigma(space, kp)
    radius = int(round(cell * math.sqrt(2.0) * (d + 1) * 0.5))
    cx = int(math.floor(kp.ox + 0.5))
    cy = int(math.floor(kp.oy + 0.5))
    if cx - radius < 1 or cy - radius < 1 or cx + radius > W - 2 or cy + radius > H - 2:
        raise WindowOutOfBounds(
            f"descriptor window radius {radius} at ({cx}, {cy}) exceeds {W}x{H} octave")

    off = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(off, off, indexing="ij")
    py = (cy + dy).ravel()
    px = (cx + dx).ravel()
    rx = px - kp.ox
    ry = py - kp.oy
    cos_t = math.cos(kp.theta)
    sin_t = math.sin(kp.theta)
    rot_x = (cos_t * rx + sin_t * ry) / cell
    rot_y = (-sin_t * rx + cos_t * ry) / cell
    rbin = rot_y + d / 2.0 - 0.5
    cbin = rot_x + d / 2.0 - 0.5
    keep = (rbin > -1.0) & (rbin < d) & (cbin > -1.0) & (cbin < d)
    py, px, rot_x, rot_y, rbin, cbin = (a[keep] for a in (py, px, rot_x, rot_y, rbin, cbin))

    gx = L[py, px + 1] - L[py, px - 1]
    gy = L[py + 1, px] - L[py - 1, px]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx) - kp.theta, TWO_PI)
    obin = ang * (n / TWO_PI)
    # Gaussian sigma is half the window width (d/2 cells)
    weight = np.exp(-(rot_x * rot_x + rot_y * rot_y) / (2.0 * (d / 2.0) ** 2))
    val = mag * weight

    r0 = np.floor(rbin).astype(np.int64)
    c0 = np.floor(cbin).astype(np.int64)
    o0 = np.floor(obin).astype(np.int64)
    fr = rbin - r0
    fc = cbin - c0
    fo = obin - o0

    hist = np.zeros((d + 2, d + 2, n))
    for ir, wr in ((0, 1.0 - fr), (1, fr)):
        for ic, wc in ((0, 1.0 - fc), (1, fc)):
            for io, wo in ((0, 1.0 - fo), (1, fo)):
                np.add.at(hist, (r0 + 1 + ir, c0 + 1 + ic, (o0 + io) % n), val * wr * wc * wo)
    vec = hist[1:d + 1, 1:d + 1, :].ravel()

    norm = float(np.sqrt(np.dot(vec, vec)))
    if not norm > 0:
        raise WindowOutOfBounds("descriptor window carries no gradient")
    vec = np.minimum(vec / norm, DESC_CLAMP)
    vec = vec / float(np.sqrt(np.dot(vec, vec)))
    return Descriptor(vec, kp)


def oriented_descriptors(kp: Keypoint, space: ScaleSpace) -> List[Descriptor]:
    out = []
    for okp in assign_orientation(kp, space):
        try:
            out.append(compute_descriptor(okp, space))
        except WindowOutOfBounds:
            continue
    return out


def detect_keypoints(img, config: SiftConfig = DEFAULT_CONFIG):
    """Refined, unoriented keypoints plus the scale space they came from."""
    space = build_scale_space(img, config=config)
    return refine_and_filter(dog_extrema(space), space), space


def extract_features(img, config: SiftConfig = DEFAULT_CONFIG) -> List[Descriptor]:
    """Every descriptor of ``img`` in detection order (octave, level, y, x, peak)."""
    keypoints, space = detect_keypoints(img, config)
    out = []
    for kp in keypoints:
        out.extend(oriented_descriptors(kp, space))
    return out


def write_keypoints_csv(keypoints: Sequence[Keypoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "sigma", "theta", "response"])
        for kp in keypoints:
            w.writerow([f"{kp.x:.6f}", f"{kp.y:.6f}", f"{kp.sigma:.6f}",
                        f"{kp.theta:.6f}", f"{kp.response:.8f}"])
