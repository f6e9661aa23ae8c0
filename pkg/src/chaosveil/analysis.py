"""Security, visual-quality and complexity metrics plus the attack harness."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ChaosVeilError, DegenerateInput, DimensionMismatch, ZeroVariance
from .imagecore import Image

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2
DEFAULT_OCCLUSIONS = (1 / 36, 1 / 18, 1 / 12)


def _pair(a: Image, b: Image) -> Tuple[np.ndarray, np.ndarray]:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")
    return a.to_float(), b.to_float()


def shannon_entropy(img: Image) -> float:
    counts = np.bincount(img.flat, minlength=256)
    p = counts[counts > 0] / img.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def mse(a: Image, b: Image) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    e = mse(a, b)
    if e == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / e)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    sx = math.sqrt(float(np.dot(x, x)))
    sy = math.sqrt(float(np.dot(y, y)))
    if sx == 0 or sy == 0:
        raise ZeroVariance("correlation undefined for a constant sequence")
    r = float(np.dot(x, y)) / (sx * sy)
    return min(1.0, max(-1.0, r))


def correlation(a: Image, b: Image) -> float:
    x, y = _pair(a, b)
    return _pearson(x.ravel(), y.ravel())


def temporal_complexity(target: Image, reference: Image) -> float:
    """Dependence of ``target`` on ``reference``; same value as :func:`correlation`."""
    return correlation(target, reference)


def adjacent_correlation(img: Image, direction: str = "horizontal") -> float:
    p = img.to_float()
    if direction == "horizontal":
        if img.width < 2:
            raise DegenerateInput("need width >= 2 for horizontal neighbours")
        return _pearson(p[:, :-1].ravel(), p[:, 1:].ravel())
    if direction == "vertical":
        if img.height < 2:
            raise DegenerateInput("need height >= 2 for vertical neighbours")
        return _pearson(p[:-1, :].ravel(), p[1:, :].ravel())
    raise ValueError(f"unknown direction {direction!r}")


def _window_sums(a: np.ndarray, w: int) -> np.ndarray:
    # summed-area table, every w x w window with top-left corner in range
    s = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    s[1:, 1:] = a.cumsum(0).cumsum(1)
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def ssim(a: Image, b: Image, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all ``window``-square sliding windows (uniform weights)."""
    x, y = _pair(a, b)
    if min(x.shape) < window:
        raise DegenerateInput(f"SSIM needs both sides >= {window}")
    if a == b:
        return 1.0
    n = window * window
    mx = _window_sums(x, window) / n
    my = _window_sums(y, window) / n
    vx = np.maximum(_window_sums(x * x, window) / n - mx * mx, 0.0)
    vy = np.maximum(_window_sums(y * y, window) / n - my * my, 0.0)
    cxy = _window_sums(x * y, window) / n - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


def embedding_ratio(cover: Image, message: Image, bits_embedded: int) -> float:
    """Payload in percent of the combined cover and message bit sizes."""
    if bits_embedded < 0:
        raise ValueError("bits_embedded must be non-negative")
    return 100.0 * bits_embedded / (8 * cover.size + 8 * message.size)


def lowess(points: Sequence[Tuple[float, float]], smoothing: float = 0.9) -> np.ndarray:
    """Single-pass locally weighted linear fit at every input x.

    Each fit uses the ``ceil(smoothing * n)`` nearest neighbours with
    tricube weights scaled by the distance to the farthest of them.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateInput("lowess needs at least 3 (x, y) points")
    if not 0 < smoothing <= 1:
        raise ValueError("smoothing must lie in (0, 1]")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size != x.size:
        raise DegenerateInput("lowess needs distinct x values")
    n = len(x)
    r = min(n, max(3, math.ceil(smoothing * n)))
    fitted = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        idx = np.argsort(d, kind="stable")[:r]
        h = d[idx].max()
        w = (1 - (d[idx] / h) ** 3) ** 3 if h > 0 else np.ones(r)
        xs, ys = x[idx], y[idx]
        sw = w.sum()
        xm = (w * xs).sum() / sw
        ym = (w * ys).sum() / sw
        sxx = (w * (xs - xm) ** 2).sum()
        if sxx <= 1e-300:
            fitted[i] = ym
        else:
            slope = (w * (xs - xm) * (ys - ym)).sum() / sxx
            fitted[i] = ym + slope * (x[i] - xm)
    return fitted


def occlusion_block(width: int, height: int, fraction: float) -> Tuple[int, int]:
    """(block_w, block_h) of a top-left block covering ``fraction`` of the image."""
    if not 0 <= fraction < 1:
        raise ValueError("fraction must lie in [0, 1)")
    s = math.sqrt(fraction)
    return int(math.floor(width * s)), int(math.floor(height * s))


def occlude(img: Image, fraction: float) -> Image:
    bw, bh = occlusion_block(img.width, img.height, fraction)
    if bw == 0 or bh == 0:
        return img
    arr = img.copy_array()
    arr[:bh, :bw] = 0
    return Image(arr)


# ---------------------------------------------------------------- reports

@dataclass
class MetricRecord:
    name: str
    entropy: float
    mse: Optional[float] = None
    psnr_db: Optional[float] = None
    ssim: Optional[float] = None
    corr_adjacent: Optional[float] = None
    corr_vs_ref: Optional[float] = None
    embedding_ratio_pct: Optional[float] = None
    temporal_complexity: Optional[float] = None


def _safe(fn, *args):
    try:
        return fn(*args)
    except (ZeroVariance, DegenerateInput):
        return None


def measure(name: str, img: Image, reference: Optional[Image] = None,
            bits_embedded: Optional[int] = None, message: Optional[Image] = None) -> MetricRecord:
    rec = MetricRecord(name=name, entropy=shannon_entropy(img),
                       corr_adjacent=_safe(adjacent_correlation, img))
    if reference is not None:
        rec.mse = mse(img, reference)
        rec.psnr_db = psnr(img, reference)
        rec.ssim = _safe(ssim, img, reference)
        rec.corr_vs_ref = _safe(correlation, img, reference)
        rec.temporal_complexity = rec.corr_vs_ref
        if bits_embedded is not None and message is not None:
            rec.embedding_ratio_pct = embedding_ratio(reference, message, bits_embedded)
    return rec


class MetricReport:
    """Per-image metric rows with an optional mean row, kept sorted by name."""

    columns = [f.name for f in fields(MetricRecord)]

    def __init__(self, records: Iterable[MetricRecord] = ()):
        self.records: List[MetricRecord] = sorted(records, key=lambda r: r.name)

    def add(self, rec: MetricRecord) -> None:
        self.records.append(rec)
        self.records.sort(key=lambda r: r.name)

    def __len__(self):
        return len(self.records)

    def mean(self) -> MetricRecord:
        out = {"name": "mean"}
        for col in self.columns[1:]:
            vals = [getattr(r, col) for r in self.records if getattr(r, col) is not None]
            out[col] = float(np.mean(vals)) if vals else None
        return MetricRecord(**out)

    def rows(self, with_mean: bool = True) -> List[MetricRecord]:
        rows = list(self.records)
        if with_mean and len(rows) > 1:
            rows.append(self.mean())
        return rows

    def to_csv(self, with_mean: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows(with_mean):
            w.writerow([format_value(v) for v in asdict(r).values()])
        return buf.getvalue()

    def to_markdown(self, with_mean: bool = True) -> str:
        lines = ["| " + " | ".join(self.columns) + " |",
                 "|" + "---|" * len(self.columns)]
        for r in self.rows(with_mean):
            lines.append("| " + " | ".join(format_value(v) for v in asdict(r).values()) + " |")
        return "\n".join(lines) + "\n"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.6f}"
    return str(v)


def lowess_csv(xs: Sequence[float], ys: Sequence[float], smoothing: float = 0.9) -> str:
    fitted = lowess(list(zip(xs, ys)), smoothing)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "fitted"])
    for x, y, f in zip(xs, ys, fitted):
        w.writerow([format_value(float(x)), format_value(float(y)), format_value(float(f))])
    return buf.getvalue()


# ---------------------------------------------------------------- attacks

@dataclass
class AttackOutcome:
    fraction: float
    status: str
    psnr_db: Optional[float]
    wrong_bytes: Optional[int]


def occlusion_attack(cover: Image, message: Image, fractions: Sequence[float] = (0.0,) + DEFAULT_OCCLUSIONS,
                     settings=None) -> List[AttackOutcome]:
    """Conceal, occlude the stego image, reveal, score against the message.

    A reveal that raises reports the error name as its status and no PSNR.
    """
    from . import pipeline

    s = settings or pipeline.DEFAULT_SETTINGS
    stego_img = pipeline.conceal(cover, message, s).stego
    out = []
    for f in fractions:
        attacked = occlude(stego_img, f)
        try:
            got = pipeline.reveal(attacked, s).message
        except ChaosVeilError as exc:
            out.append(AttackOutcome(f, type(exc).__name__, None, None))
            continue
        if got is None or got.pixels.shape != message.pixels.shape:
            out.append(AttackOutcome(f, "DimensionMismatch", None, None))
            continue
        wrong = int(np.count_nonzero(got.pixels != message.pixels))
        out.append(AttackOutcome(f, "ok", psnr(got, message), wrong))
    return out
