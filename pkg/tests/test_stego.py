import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaosveil import keyforge, stego
from chaosveil.analysis import occlude, psnr
from chaosveil.errors import BadMagic, CoverTooSmall, InsufficientCapacity, TruncatedPayload
from chaosveil.imagecore import BitCursor, Image
from chaosveil.stego import StegoPayload


def payload(rng, w, h):
    cipher = rng.integers(0, 256, w * h, dtype=np.uint8)
    return StegoPayload(w, h, int(rng.integers(256)), int(rng.integers(256)), cipher)


def brute_embed(cover, p):
    """Pixel-by-pixel reference using k_for_pixel directly."""
    px = [int(v) for v in cover.flat]
    header = p.header_word()
    for i in range(64):
        bit = (header >> (63 - i)) & 1
        px[i] = (px[i] & 0xFE) | bit
    bits = [int(b) for b in np.unpackbits(p.cipher)]
    pos = 0
    for i in range(64, len(px)):
        if pos >= len(bits):
            break
        k = stego.k_for_pixel(px[i])
        for j in range(k):
            if pos >= len(bits):
                break
            shift = k - 1 - j
            px[i] = (px[i] & ~(1 << shift)) | (bits[pos] << shift)
            pos += 1
    return np.array(px, dtype=np.uint8).reshape(cover.pixels.shape)


def test_zero_nibble_has_no_capacity():
    for low in range(16):
        assert stego.k_for_pixel(low) == 0


def test_k_depends_on_high_nibble_only():
    for v in range(256):
        assert stego.k_for_pixel(v) == stego.k_for_pixel(v & 0xF0)
        assert 0 <= stego.k_for_pixel(v) <= 4


def test_k_table_matches_direct_evaluation():
    table = stego.k_table()
    assert table.tolist() == [stego.k_for_pixel(n << 4) for n in range(16)]


def test_k_count_uses_gamma_low_nibble(monkeypatch):
    monkeypatch.setattr(stego, "_gamma_for_seed", lambda *a: 0b00001111)
    assert stego.k_for_pixel(0xF0) == 4
    assert stego.k_for_pixel(0xA0) == 2
    monkeypatch.setattr(stego, "_gamma_for_seed", lambda *a: 0b11110000)
    assert stego.k_for_pixel(0xF0) == 0


def test_k_seed_is_bits_two_to_four(monkeypatch):
    seen = []
    monkeypatch.setattr(stego, "_gamma_for_seed", lambda seed, *a: seen.append(seed) or 0)
    stego.k_for_pixel(0b01101010)
    assert seen == [(1, 1, 0)]


def test_k_rejects_zero_steps():
    with pytest.raises(ValueError):
        stego.k_for_pixel(0xF0, n_steps=0)


def test_capacity_examples():
    assert stego.capacity(Image(np.full((8, 8), 0xFF, dtype=np.uint8))) == 64
    assert stego.capacity(Image(np.zeros((16, 16), dtype=np.uint8))) == 64
    n = 40 * 30
    cover = Image(np.full((30, 40), 0xF0, dtype=np.uint8))
    assert stego.capacity(cover) == 64 + (n - 64) * stego.k_for_pixel(0xF0)


def test_cover_too_small():
    with pytest.raises(CoverTooSmall):
        stego.capacity(Image(np.zeros((7, 9), dtype=np.uint8)))


def test_insufficient_capacity_reports_bits(rng, small_cover):
    cap = stego.capacity(small_cover)
    side = int(np.sqrt(cap / 8)) + 2
    with pytest.raises(InsufficientCapacity) as e:
        stego.embed(small_cover, payload(rng, side, side))
    assert e.value.required == 64 + 8 * side * side
    assert e.value.available == cap


def test_empty_payload_touches_header_only(small_cover):
    p = StegoPayload(0, 0, 0, 0, np.zeros(0, np.uint8))
    out = stego.embed(small_cover, p)
    diff = out.flat ^ small_cover.flat
    assert not diff[64:].any()
    assert np.all(diff[:64] <= 1)
    assert stego.extract(out) == p


def test_embed_matches_bruteforce(rng):
    cover = Image(rng.integers(0, 256, (24, 24)))
    cap = stego.capacity(cover)
    p = payload(rng, 13, (cap - 64) // 8 // 13)
    assert np.array_equal(stego.embed(cover, p).pixels, brute_embed(cover, p))


def test_embed_partial_last_pixel(rng):
    # k runs 1, 2, 2, 2, 2, ... so one byte ends half way through a pixel
    arr = np.full((16, 16), 0x3C, dtype=np.uint8)
    arr.flat[64] = 0x1C
    cover = Image(arr)
    assert [stego.k_for_pixel(v) for v in (0x1C, 0x3C)] == [1, 2]
    p = payload(rng, 1, 1)
    out = stego.embed(cover, p)
    assert np.array_equal(out.pixels, brute_embed(cover, p))
    # the half-used pixel keeps its unused low bit
    assert out.flat[68] & 1 == 0x3C & 1
    assert stego.extract(out) == p


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(8, 40), st.integers(8, 40), st.floats(0, 1))
def test_round_trip_and_invariants(seed, w, h, fill):
    rng = np.random.default_rng(seed)
    cover = Image(rng.integers(0, 256, (h, w)))
    room = (stego.capacity(cover) - 64) // 8
    n = int(fill * room)
    mw = max(1, int(np.sqrt(n))) if n else 0
    mh = n // mw if mw else 0
    p = payload(rng, mw, mh)
    out = stego.embed(cover, p)
    assert stego.extract(out) == p
    # high nibble untouched, so the k plan and the key input survive
    assert not ((out.flat ^ cover.flat) & 0xF0).any()
    assert stego.KPlan.for_image(out) == stego.KPlan.for_image(cover)
    assert keyforge.key_stable(out) == keyforge.key_stable(cover)


def test_plain_image_is_bad_magic(small_cover):
    with pytest.raises(BadMagic):
        stego.extract(small_cover)


def test_bad_magic_on_small_image():
    with pytest.raises(BadMagic):
        stego.extract(Image(np.zeros((4, 4), dtype=np.uint8)))


def test_truncated_payload(small_cover):
    cur = BitCursor(small_cover, plan=1)
    cur.write_uint((stego.MAGIC << 56) | (stego.VERSION << 48) | (4000 << 32) | (4000 << 16), 64)
    with pytest.raises(TruncatedPayload):
        stego.extract(cur.image())


def test_payload_validation():
    with pytest.raises(ValueError):
        StegoPayload(2, 2, 0, 0, np.zeros(3, np.uint8))
    with pytest.raises(ValueError):
        StegoPayload(70000, 0, 0, 0, np.zeros(0, np.uint8))


def test_occluded_header_is_rejected(rng, small_cover):
    out = stego.embed(small_cover, payload(rng, 16, 16))
    with pytest.raises(BadMagic):
        stego.extract(occlude(out, 1 / 36))


def test_estimated_psnr_tracks_actual(rng, textures):
    for _, cover in textures[:4]:
        out = stego.embed(cover, payload(rng, 64, 64))
        assert stego.estimated_psnr(out) == pytest.approx(psnr(out, cover), abs=0.3)
