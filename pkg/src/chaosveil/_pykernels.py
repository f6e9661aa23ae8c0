"""Pure-Python reference implementation of the hot kernels.

Every routine here has a twin in ``_ckernels.pyx``.  Both evaluate the same
floating-point expressions in the same order, so on an IEEE-754 platform
(no FMA contraction, no x87 excess precision) the two backends return
bit-identical results.  Keep them in lockstep when editing either one.
"""

import math

import numpy as np

from .errors import Diverged

BACKEND = "python"

DIVERGENCE_LIMIT = 1e6


def _rk4(x1, x2, x3, a1, b11, b12, b32, b33, dt):
    hdt = dt * 0.5
    sdt = dt / 6.0

    y = (abs(x1 + 1.0) - abs(x1 - 1.0)) * 0.5
    k11 = -x1 + a1 * y + b11 * x1 + b12 * x2
    k12 = -x2 + x1 + x3
    k13 = -x3 + b32 * x2 + b33 * x3

    s1 = x1 + hdt * k11
    s2 = x2 + hdt * k12
    s3 = x3 + hdt * k13
    y = (abs(s1 + 1.0) - abs(s1 - 1.0)) * 0.5
    k21 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k22 = -s2 + s1 + s3
    k23 = -s3 + b32 * s2 + b33 * s3

    s1 = x1 + hdt * k21
    s2 = x2 + hdt * k22
    s3 = x3 + hdt * k23
    y = (abs(s1 + 1.0) - abs(s1 - 1.0)) * 0.5
    k31 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k32 = -s2 + s1 + s3
    k33 = -s3 + b32 * s2 + b33 * s3

    s1 = x1 + dt * k31
    s2 = x2 + dt * k32
    s3 = x3 + dt * k33
    y = (abs(s1 + 1.0) - abs(s1 - 1.0)) * 0.5
    k41 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k42 = -s2 + s1 + s3
    k43 = -s3 + b32 * s2 + b33 * s3

    n1 = x1 + sdt * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    n2 = x2 + sdt * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
    n3 = x3 + sdt * (k13 + 2.0 * k23 + 2.0 * k33 + k43)
    return n1, n2, n3


def _check(x1, x2, x3, step):
    if not (abs(x1) <= DIVERGENCE_LIMIT and abs(x2) <= DIVERGENCE_LIMIT
            and abs(x3) <= DIVERGENCE_LIMIT):
        raise Diverged(f"CNN state left |x| <= {DIVERGENCE_LIMIT:g} at step {step}")


def cnn_trajectory(x1, x2, x3, n, a1, b11, b12, b32, b33, dt):
    """States after 0..n RK4 steps, shape ``(n + 1, 3)``."""
    out = np.empty((n + 1, 3), dtype=np.float64)
    x1 = float(x1)
    x2 = float(x2)
    x3 = float(x3)
    out[0] = (x1, x2, x3)
    for i in range(1, n + 1):
        x1, x2, x3 = _rk4(x1, x2, x3, a1, b11, b12, b32, b33, dt)
        _check(x1, x2, x3, i)
        out[i, 0] = x1
        out[i, 1] = x2
        out[i, 2] = x3
    return out


def byte_from_fraction(v):
    """Fold the 32-bit binary fraction of ``v`` into one byte by nibble parity."""
    u = v - math.floor(v)
    bits = int(u * 4294967296.0)
    w = 0
    for j in range(8):
        nib = (bits >> (28 - 4 * j)) & 0xF
        nib ^= nib >> 2
        nib ^= nib >> 1
        w = (w << 1) | (nib & 1)
    return w


def cnn_keystream(x1, x2, x3, n_discard, count, h, lam, a1, b11, b12, b32, b33, dt):
    out = np.empty(count, dtype=np.uint8)
    x1 = float(x1)
    x2 = float(x2)
    x3 = float(x3)
    h = float(h)
    lam = float(lam)
    for i in range(n_discard):
        x1, x2, x3 = _rk4(x1, x2, x3, a1, b11, b12, b32, b33, dt)
        _check(x1, x2, x3, i + 1)
    for i in range(count):
        x1, x2, x3 = _rk4(x1, x2, x3, a1, b11, b12, b32, b33, dt)
        _check(x1, x2, x3, n_discard + i + 1)
        v = h * math.sqrt(x1 * x1 + x2 * x2 + x3 * x3) + lam
        out[i] = byte_from_fraction(v)
    return out


def refine_extrema(dog, cand, contrast, edge_r, max_hops):
    """Sub-pixel refinement plus contrast/edge rejection for one octave.

    ``dog`` is ``(S, H, W)`` float64; ``cand`` rows are ``(s, y, x)``.
    Returns integer locations ``(M, 3)`` and ``(M, 4)`` rows of
    ``(off_x, off_y, off_s, value_at_extremum)``.
    """
    D = np.ascontiguousarray(dog, dtype=np.float64)
    S, H, W = D.shape
    cand = np.asarray(cand, dtype=np.int64).reshape(-1, 3)
    edge_limit = (edge_r + 1.0) * (edge_r + 1.0) / edge_r
    locs = []
    vals = []
    Dl = D.tolist()
    for row in range(cand.shape[0]):
        s = int(cand[row, 0])
        y = int(cand[row, 1])
        x = int(cand[row, 2])
        hops = 0
        ok = False
        while True:
            if s < 1 or s > S - 2 or y < 1 or y > H - 2 or x < 1 or x > W - 2:
                break
            Dm = Dl[s - 1]
            Dc = Dl[s]
            Dp = Dl[s + 1]
            v = Dc[y][x]
            dx = (Dc[y][x + 1] - Dc[y][x - 1]) * 0.5
            dy = (Dc[y + 1][x] - Dc[y - 1][x]) * 0.5
            ds = (Dp[y][x] - Dm[y][x]) * 0.5
            v2 = v * 2.0
            dxx = Dc[y][x + 1] + Dc[y][x - 1] - v2
            dyy = Dc[y + 1][x] + Dc[y - 1][x] - v2
            dss = Dp[y][x] + Dm[y][x] - v2
            dxy = ((Dc[y + 1][x + 1] - Dc[y + 1][x - 1])
                   - (Dc[y - 1][x + 1] - Dc[y - 1][x - 1])) * 0.25
            dxs = ((Dp[y][x + 1] - Dp[y][x - 1])
                   - (Dm[y][x + 1] - Dm[y][x - 1])) * 0.25
            dys = ((Dp[y + 1][x] - Dp[y - 1][x])
                   - (Dm[y + 1][x] - Dm[y - 1][x])) * 0.25

            i00 = dyy * dss - dys * dys
            i01 = dxs * dys - dxy * dss
            i02 = dxy * dys - dxs * dyy
            i11 = dxx * dss - dxs * dxs
            i12 = dxy * dxs - dxx * dys
            i22 = dxx * dyy - dxy * dxy
            det = dxx * i00 + dxy * i01 + dxs * i02
            if det == 0.0:
                break
            ox = -(i00 * dx + i01 * dy + i02 * ds) / det
            oy = -(i01 * dx + i11 * dy + i12 * ds) / det
            os_ = -(i02 * dx + i12 * dy + i22 * ds) / det
            if not (abs(ox) < 1e9 and abs(oy) < 1e9 and abs(os_) < 1e9):
                break
            if abs(ox) <= 0.5 and abs(oy) <= 0.5 and abs(os_) <= 0.5:
                ok = True
                break
            if hops >= max_hops:
                break
            hops += 1
            x += int(math.floor(ox + 0.5))
            y += int(math.floor(oy + 0.5))
            s += int(math.floor(os_ + 0.5))
        if not ok:
            continue
        dval = v + 0.5 * (dx * ox + dy * oy + ds * os_)
        if abs(dval) < contrast:
            continue
        tr = dxx + dyy
        det2 = dxx * dyy - dxy * dxy
        if det2 <= 0.0 or tr * tr / det2 >= edge_limit:
            continue
        locs.append((s, y, x))
        vals.append((ox, oy, os_, dval))
    return (np.asarray(locs, dtype=np.int64).reshape(-1, 3),
            np.asarray(vals, dtype=np.float64).reshape(-1, 4))
