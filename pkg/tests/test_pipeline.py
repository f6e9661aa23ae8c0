import numpy as np
import pytest

from chaosveil import analysis, keyforge, pipeline, stego
from chaosveil.corpus import natural_texture
from chaosveil.errors import (BadMagic, InsufficientCapacity, NoKeypointsFound)
from chaosveil.imagecore import Image


def test_round_trip(small_cover, rng):
    msg = Image(rng.integers(0, 256, (24, 20), dtype=np.uint8))
    res = pipeline.conceal(small_cover, msg)
    back = pipeline.reveal(res.stego)
    assert back.message == msg
    assert back.key == res.key
    assert back.params == res.params
    assert np.array_equal(back.keystream.bytes, res.keystream.bytes)


def test_stego_preserves_key_stable_view(small_cover, rng):
    msg = Image(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    res = pipeline.conceal(small_cover, msg)
    assert keyforge.key_stable(res.stego) == keyforge.key_stable(small_cover)


def test_cipher_differs_from_message(small_cover):
    msg = Image(np.full((16, 16), 90, dtype=np.uint8))
    res = pipeline.conceal(small_cover, msg)
    assert not np.array_equal(res.payload.cipher, msg.flat)


def test_capacity_checked_before_keypoints():
    flat = Image(np.full((8, 8), 100, dtype=np.uint8))
    with pytest.raises(InsufficientCapacity):
        pipeline.conceal(flat, Image(np.zeros((4, 4), dtype=np.uint8)))


def test_flat_cover_has_no_key():
    flat = Image(np.full((128, 128), 100, dtype=np.uint8))
    with pytest.raises(NoKeypointsFound):
        pipeline.conceal(flat, Image(np.zeros((8, 8), dtype=np.uint8)))


def test_reveal_plain_image_is_bad_magic(small_cover):
    with pytest.raises(BadMagic):
        pipeline.reveal(small_cover)


def test_reveal_with_explicit_wrong_key(small_cover, rng):
    msg = Image(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    res = pipeline.conceal(small_cover, msg)
    wrong = pipeline.reveal(res.stego, key=res.key.flip_bit(5)).message
    assert np.mean(wrong.pixels != msg.pixels) > 0.9


def test_empty_payload_reveals_nothing(small_cover):
    empty = stego.StegoPayload(0, 0, 0, 0, np.zeros(0, dtype=np.uint8))
    assert pipeline.reveal(stego.embed(small_cover, empty)).message is None


def test_settings_validation():
    with pytest.raises(ValueError):
        pipeline.Settings(dt=0)
    with pytest.raises(ValueError):
        pipeline.Settings(n_steps=0)


def test_custom_n_steps_round_trip(small_cover, rng):
    s = pipeline.Settings(n_steps=500)
    msg = Image(rng.integers(0, 256, (8, 8), dtype=np.uint8))
    res = pipeline.conceal(small_cover, msg, s)
    assert pipeline.reveal(res.stego, s).message == msg


def test_occlusion_attack_reports_every_fraction():
    cover = natural_texture(5, 128)
    msg = Image(np.arange(256, dtype=np.uint8).reshape(16, 16))
    out = analysis.occlusion_attack(cover, msg)
    assert [o.fraction for o in out] == [0.0, 1 / 36, 1 / 18, 1 / 12]
    assert out[0].status == "ok" and out[0].wrong_bytes == 0
    assert all(o.status in ("ok", "BadMagic", "TruncatedPayload", "DimensionMismatch")
               for o in out)
