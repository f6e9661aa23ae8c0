"""The compiled and pure-Python kernels must agree bit for bit."""

import numpy as np
import pytest

from chaosveil import _pykernels, kernels, sift
from chaosveil.chaoscrypt import DEFAULT_TEMPLATE
from chaosveil.errors import Diverged

backends = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in backends,
                                    reason="compiled extension not built")
COEF = DEFAULT_TEMPLATE.coefficients()


def test_backend_reported():
    assert kernels.BACKEND in backends


@needs_compiled
def test_trajectory_identical():
    c = backends["cython"]
    a = c.cnn_trajectory(0.1, 0.2, -0.3, 3000, *COEF, 0.005)
    b = _pykernels.cnn_trajectory(0.1, 0.2, -0.3, 3000, *COEF, 0.005)
    assert a.tobytes() == b.tobytes()


@needs_compiled
@pytest.mark.parametrize("seed", range(4))
def test_keystream_identical(seed):
    rng = np.random.default_rng(seed)
    x = rng.random(3) * 0.1
    h = float(rng.integers(0, 300)) / 256
    lam = float(rng.integers(0, 256))
    n0 = int(rng.integers(0, 256))
    a = backends["cython"].cnn_keystream(*x, n0, 2000, h, lam, *COEF, 0.005)
    b = _pykernels.cnn_keystream(*x, n0, 2000, h, lam, *COEF, 0.005)
    assert np.array_equal(a, b)


@needs_compiled
def test_fold_identical():
    rng = np.random.default_rng(7)
    for v in rng.random(500) * 1000:
        assert backends["cython"].byte_from_fraction(v) == _pykernels.byte_from_fraction(v)


@needs_compiled
def test_refine_identical(small_cover):
    space = sift.build_scale_space(small_cover)
    cands = sift.dog_extrema(space)
    for o, dog in enumerate(space.dogs):
        c = np.array([(k.level, k.y, k.x) for k in cands if k.octave == o], dtype=np.int64)
        if not len(c):
            continue
        la, va = backends["cython"].refine_extrema(dog, c, 0.03, 10.0, 5)
        lb, vb = _pykernels.refine_extrema(dog, c, 0.03, 10.0, 5)
        assert np.array_equal(la, lb)
        assert va.tobytes() == vb.tobytes()


@pytest.mark.parametrize("name", sorted(backends))
def test_divergence_guard(name):
    mod = backends[name]
    # a1 = 0 leaves the linear system unstable
    with pytest.raises(Diverged):
        mod.cnn_trajectory(0.5, 0.0, 0.0, 40000, 0.0, *COEF[1:], 0.005)
    with pytest.raises(Diverged):
        mod.cnn_keystream(0.5, 0.0, 0.0, 0, 40000, 1.0, 0.0, 0.0, *COEF[1:], 0.005)


@pytest.mark.parametrize("name", sorted(backends))
def test_nan_input_diverges(name):
    with pytest.raises(Diverged):
        backends[name].cnn_trajectory(float("nan"), 0.0, 0.0, 1, *COEF, 0.005)
