"""Three-cell chaotic CNN, fixed-step RK4 integration, keystream and XOR cipher.

Cell dynamics (uncoupled class, zero bias)::

    dx1/dt = -x1 + a1*y1 + b11*x1 + b12*x2
    dx2/dt = -x2 + x1 + x3
    dx3/dt = -x3 + b32*x2 + b33*x3
    y      = (|x + 1| - |x - 1|) / 2

The integration loop lives in :mod:`chaosveil.kernels` (compiled or pure
Python, bit-identical).  Operation order inside an RK4 step is fixed:
``k = ((-x + a1*y) + b11*x) + b12*x2`` etc., and the update is
``x + (dt/6) * (((k1 + 2*k2) + 2*k3) + k4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import Diverged, LengthMismatch

DEFAULT_DT = 0.005
# Self-feedback of cell 1.  With a1 = 0 the system is linear with an
# unstable focus and every trajectory escapes to infinity; 3.76 puts the
# inner (unsaturated) region's real eigenvalue positive and yields a
# bounded double-scroll attractor.
DEFAULT_A1 = 3.76


@dataclass(frozen=True)
class CnnTemplate:
    b11: float = -1.65
    b12: float = 8.78
    b32: float = -13.25
    b33: float = 1.0
    a1: float = DEFAULT_A1

    def __post_init__(self):
        for name in ("b11", "b12", "b32", "b33", "a1"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"template entry {name} must be finite")

    def matrix(self) -> np.ndarray:
        """Coefficient matrix W of the linear sub-system."""
        return np.array([
            [self.b11 - 1.0, self.b12, 0.0],
            [1.0, -1.0, 1.0],
            [0.0, self.b32, self.b33 - 1.0],
        ])

    def eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.matrix())
        return ev[np.lexsort((ev.imag, ev.real))]

    def satisfies_chaos_condition(self) -> bool:
        return bool(np.any(self.eigenvalues().real > 0))

    def coefficients(self):
        return (self.a1, self.b11, self.b12, self.b32, self.b33)


DEFAULT_TEMPLATE = CnnTemplate()


@dataclass(frozen=True)
class CnnState:
    x1: float
    x2: float
    x3: float
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x1, self.x2, self.x3)):
            raise Diverged("CNN state is not finite")

    def as_tuple(self):
        return (self.x1, self.x2, self.x3)


def cell_output(x: float) -> float:
    """Piecewise-linear saturation y = (|x+1| - |x-1|) / 2."""
    return (abs(x + 1.0) - abs(x - 1.0)) * 0.5


def cnn_derivative(s: CnnState, tpl: CnnTemplate = DEFAULT_TEMPLATE):
    x1, x2, x3 = s.as_tuple()
    y1 = cell_output(x1)
    return (
        -x1 + tpl.a1 * y1 + tpl.b11 * x1 + tpl.b12 * x2,
        -x2 + x1 + x3,
        -x3 + tpl.b32 * x2 + tpl.b33 * x3,
    )


def rk4_step(s: CnnState, tpl: CnnTemplate = DEFAULT_TEMPLATE,
             dt: float = DEFAULT_DT) -> CnnState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    traj = kernels.cnn_trajectory(s.x1, s.x2, s.x3, 1, *tpl.coefficients(), dt)
    x1, x2, x3 = (float(v) for v in traj[1])
    return CnnState(x1, x2, x3, s.t + dt)


def integrate(x0: Sequence[float], n_steps: int, tpl: CnnTemplate = DEFAULT_TEMPLATE,
              dt: float = DEFAULT_DT) -> np.ndarray:
    """Trajectory ``(n_steps + 1, 3)`` starting at ``x0`` (row 0)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    x1, x2, x3 = (float(v) for v in x0)
    return kernels.cnn_trajectory(x1, x2, x3, int(n_steps), *tpl.coefficients(), dt)


@dataclass(frozen=True, eq=False)
class Keystream:
    bytes: np.ndarray

    def __len__(self):
        return int(self.bytes.size)

    def hex(self) -> str:
        return self.bytes.tobytes().hex()


def fraction_to_byte(v: float) -> int:
    """Keystream byte for a mapped value ``v``.

    The fractional part of ``v`` is expanded to 32 binary digits
    ``b1..b32``; bit j of the byte (j = 0 is the MSB) is the XOR of
    ``b(4j+1)..b(4j+4)``.
    """
    return int(kernels.byte_from_fraction(float(v)))


def generate_keystream(params, count: int, tpl: CnnTemplate = DEFAULT_TEMPLATE,
                       dt: float = DEFAULT_DT) -> Keystream:
    """Keystream of ``count`` bytes for ``params`` (a :class:`KeyParams`).

    ``params.n0`` transient steps are discarded, then one RK4 step is taken
    per output byte and ``v = h * |x| + lambda`` is folded into a byte.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    x1, x2, x3 = (float(v) for v in params.x0)
    ks = kernels.cnn_keystream(x1, x2, x3, int(params.n0), int(count),
                               float(params.h), float(params.lam),
                               *tpl.coefficients(), dt)
    return Keystream(ks)


def xor_transform(data, ks) -> np.ndarray:
    """``(data XOR keystream) mod 256``; applying it twice is the identity."""
    d = np.asarray(data, dtype=np.uint8).ravel()
    k = ks.bytes if isinstance(ks, Keystream) else np.asarray(ks, dtype=np.uint8).ravel()
    if d.size != k.size:
        raise LengthMismatch(f"data has {d.size} bytes, keystream {k.size}")
    return np.bitwise_xor(d, k)
