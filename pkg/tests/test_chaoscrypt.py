import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from chaosveil import chaoscrypt as cc
from chaosveil.errors import Diverged, LengthMismatch
from chaosveil.keyforge import KeyParams

TPL = cc.DEFAULT_TEMPLATE


def linear_matrix(tpl):
    # inside |x1| < 1 the saturation is the identity, so a1 joins the diagonal
    a = tpl.matrix().copy()
    a[0, 0] += tpl.a1
    return a


def params(x0, n0=0, h=0.0, lam=0):
    return KeyParams(h1=0, h2=0, key_sum=0, key_xor=0, lam=lam, h=h, x0=tuple(x0), n0=n0)


def test_derivative_at_origin():
    assert cc.cnn_derivative(cc.CnnState(0, 0, 0), TPL) == (0, 0, 0)


def test_derivative_hand_evaluated():
    tpl = cc.CnnTemplate(a1=0.0)
    d = cc.cnn_derivative(cc.CnnState(1.0, 0.0, 0.0), tpl)
    assert d == pytest.approx((-2.65, 1.0, 0.0), abs=1e-15)


@pytest.mark.parametrize("x,y", [(5.0, 1.0), (-5.0, -1.0), (0.3, 0.3), (1.0, 1.0)])
def test_cell_output(x, y):
    assert cc.cell_output(x) == pytest.approx(y, abs=1e-15)


def test_origin_is_fixed():
    s = cc.rk4_step(cc.CnnState(0.0, 0.0, 0.0))
    assert s.as_tuple() == (0.0, 0.0, 0.0)
    assert s.t == cc.DEFAULT_DT


def test_rk4_step_vs_matrix_exponential():
    a = linear_matrix(TPL)
    x0 = np.array([0.05, -0.03, 0.02])
    dt = 0.005
    got = np.array(cc.rk4_step(cc.CnnState(*x0), TPL, dt).as_tuple())
    bound = (np.linalg.norm(a, 2) * dt) ** 5 / 120 * np.linalg.norm(x0)
    assert np.abs(got - expm(a * dt) @ x0).max() < bound


def test_step_halving():
    a = linear_matrix(TPL)
    x0 = np.array([0.05, -0.03, 0.02])
    two = cc.integrate(x0, 2, TPL, 0.005)[-1]
    one = cc.integrate(x0, 1, TPL, 0.01)[-1]
    bound = 2 * (np.linalg.norm(a, 2) * 0.01) ** 5 / 120 * np.linalg.norm(x0)
    assert np.abs(two - one).max() < bound


def test_rk4_rejects_bad_dt():
    with pytest.raises(ValueError):
        cc.rk4_step(cc.CnnState(0, 0, 0), TPL, 0.0)
    with pytest.raises(ValueError):
        cc.integrate((0, 0, 0), 3, TPL, -1.0)


def test_state_must_be_finite():
    with pytest.raises(Diverged):
        cc.CnnState(math.inf, 0, 0)


def test_default_template_is_bounded():
    traj = cc.integrate((0.1, 0.0, 0.0), 100_000, TPL)
    assert np.abs(traj).max() < 50


def test_zero_feedback_template_diverges():
    with pytest.raises(Diverged):
        cc.integrate((0.1, 0.0, 0.0), 100_000, cc.CnnTemplate(a1=0.0))


def test_chaos_condition_and_eigenvalues():
    ev = TPL.eigenvalues()
    assert TPL.satisfies_chaos_condition()
    assert ev[0].real == pytest.approx(-4.0393, abs=1e-4)
    assert ev[1].real == pytest.approx(0.19467, abs=1e-5)
    assert abs(ev[1].imag) == pytest.approx(2.94190, abs=1e-5)


def test_stable_template_fails_chaos_condition():
    assert not cc.CnnTemplate(b11=-1, b12=0, b32=0, b33=0).satisfies_chaos_condition()


# ---- keystream


def fold_oracle(v):
    # fractional part expanded by repeated doubling, nibble parities MSB first
    u = Fraction(v) - math.floor(v)
    bits = []
    for _ in range(32):
        u *= 2
        bits.append(int(u >= 1))
        u -= int(u >= 1)
    w = 0
    for j in range(8):
        w = (w << 1) | (sum(bits[4 * j:4 * j + 4]) & 1)
    return w


def test_fold_half():
    assert cc.fraction_to_byte(0.5) == 0b10000000


def test_fold_integer_is_zero():
    assert cc.fraction_to_byte(17.0) == 0


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0, max_value=1e4, allow_nan=False))
def test_fold_matches_doubling_oracle(v):
    assert cc.fraction_to_byte(v) == fold_oracle(v)


def test_zero_h_integer_lambda_gives_zero_stream():
    ks = cc.generate_keystream(params((0.1, 0.2, 0.3), n0=5, h=0.0, lam=77), 500)
    assert len(ks) == 500
    assert not ks.bytes.any()


def test_keystream_matches_trajectory_oracle():
    p = params((0.013, 0.0021, 0.007), n0=40, h=97.55859375, lam=101)
    ks = cc.generate_keystream(p, 300).bytes
    traj = cc.integrate(p.x0, p.n0 + 300, TPL)
    expect = [fold_oracle(p.h * math.sqrt(float(x @ x)) + p.lam) for x in traj[p.n0 + 1:]]
    assert ks.tolist() == expect


def test_keystream_hex():
    ks = cc.Keystream(np.array([0, 15, 255], dtype=np.uint8))
    assert ks.hex() == "000fff"


def test_keystream_deterministic():
    p = params((0.01, 0.02, 0.03), n0=10, h=1.7, lam=3)
    assert cc.generate_keystream(p, 1000).hex() == cc.generate_keystream(p, 1000).hex()


# ---- xor


def test_xor_examples():
    assert cc.xor_transform([0x0F], [0xAA]).tolist() == [0xA5]
    data = np.arange(10, dtype=np.uint8)
    assert np.array_equal(cc.xor_transform(data, np.zeros(10, dtype=np.uint8)), data)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=0, max_size=200), st.integers(0, 2 ** 32 - 1))
def test_xor_involution(data, seed):
    m = np.frombuffer(data, dtype=np.uint8)
    ks = np.random.default_rng(seed).integers(0, 256, m.size, dtype=np.uint8)
    assert np.array_equal(cc.xor_transform(cc.xor_transform(m, ks), ks), m)


def test_xor_length_mismatch():
    with pytest.raises(LengthMismatch):
        cc.xor_transform([1, 2], [1])


def test_eigenvalues_against_characteristic_polynomial():
    lam = sympy.symbols("lam")
    w = sympy.Matrix([[sympy.Rational("-1.65") - 1, sympy.Rational("8.78"), 0],
                      [1, -1, 1],
                      [0, sympy.Rational("-13.25"), 0]])
    roots = sympy.Poly((w - lam * sympy.eye(3)).det(), lam).nroots(n=30)
    expect = sorted((complex(r) for r in roots), key=lambda z: (z.real, z.imag))
    got = TPL.eigenvalues()
    assert np.allclose(got, expect, atol=1e-9, rtol=0)
