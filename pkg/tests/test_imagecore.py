import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image as PILImage

from chaosveil.errors import (CorruptFile, InvalidDimensions, PositionOutOfRange,
                              UnsupportedFormat)
from chaosveil.imagecore import (BitCursor, Image, get_bit, is_lossy_path, load_image,
                                 rgb_to_luma, save_image)


def test_pgm_decode(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image(p)
    assert (img.width, img.height) == (2, 2)
    assert img.flat.tolist() == [0, 255, 128, 64]


def test_pgm_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n3 1 # width height\n255\n" + bytes([1, 2, 3]))
    assert load_image(p).flat.tolist() == [1, 2, 3]


@pytest.mark.parametrize("rgb,expected", [((255, 255, 255), 255), ((255, 0, 0), 76),
                                          ((0, 255, 0), 150), ((0, 0, 255), 29)])
def test_png_rgb_to_luma(tmp_path, rgb, expected):
    p = tmp_path / "px.png"
    PILImage.new("RGB", (1, 1), rgb).save(p)
    assert load_image(p).flat.tolist() == [expected]


def test_luma_rounding_matches_hand_arithmetic():
    # 0.299*255 = 76.245 -> 76 ; 0.587*255 = 149.685 -> 150
    assert rgb_to_luma(np.array([[[255, 0, 0], [0, 255, 0]]])).tolist() == [[76, 150]]


def test_png_rgba_and_palette(tmp_path):
    p = tmp_path / "rgba.png"
    PILImage.new("RGBA", (2, 1), (10, 10, 10, 0)).save(p)
    assert load_image(p).flat.tolist() == [10, 10]
    q = tmp_path / "pal.png"
    PILImage.new("L", (2, 2), 77).convert("P").save(q)
    assert load_image(q).flat.tolist() == [77] * 4


def test_png_16bit_rejected(tmp_path):
    p = tmp_path / "deep.png"
    PILImage.fromarray(np.full((2, 2), 1000, dtype=np.uint16)).save(p)
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_pgm_maxval_rejected(tmp_path):
    p = tmp_path / "deep.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n\x00\x01")
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_pgm_truncated(tmp_path):
    p = tmp_path / "short.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(CorruptFile):
        load_image(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.pgm")


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_save_load_round_trip(tmp_path, rng, suffix):
    img = Image(rng.integers(0, 256, (17, 23)))
    p = tmp_path / f"img{suffix}"
    save_image(img, p)
    assert load_image(p) == img


def test_pgm_body_size(tmp_path):
    p = tmp_path / "z.pgm"
    save_image(Image(np.zeros((512, 512), dtype=np.uint8)), p)
    header = b"P5\n512 512\n255\n"
    assert p.read_bytes().startswith(header)
    assert p.stat().st_size - len(header) == 262144


def test_lossy_refused(tmp_path):
    assert is_lossy_path("x.JPG") and is_lossy_path("y.jpeg")
    with pytest.raises(UnsupportedFormat):
        save_image(Image(np.zeros((2, 2))), tmp_path / "x.jpg")


def test_zero_pixel_image():
    with pytest.raises(InvalidDimensions):
        Image(np.zeros((0, 5), dtype=np.uint8))
    with pytest.raises(InvalidDimensions):
        Image.from_flat(0, 0, [])


def test_image_is_immutable():
    img = Image(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


@pytest.mark.parametrize("value,pos,bit", [(0b10000000, 1, 1), (0b10000000, 8, 0),
                                           (0b00000101, 7, 0), (0b00000101, 8, 1)])
def test_get_bit_examples(value, pos, bit):
    assert get_bit(value, pos) == bit


@pytest.mark.parametrize("pos", [0, 9])
def test_get_bit_range(pos):
    with pytest.raises(PositionOutOfRange):
        get_bit(3, pos)


def test_get_bit_reconstructs_every_value():
    for v in range(256):
        assert sum(get_bit(v, p) << (8 - p) for p in range(1, 9)) == v


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=8, max_size=40), st.integers(0, 2 ** 31))
def test_bit_cursor_round_trip(plan, seed):
    rng = np.random.default_rng(seed)
    img = Image(rng.integers(0, 256, (1, len(plan))))
    nbits = sum(plan)
    value = int(rng.integers(0, 2 ** 62)) & ((1 << nbits) - 1) if nbits else 0
    w = BitCursor(img, plan=np.array(plan))
    w.write_uint(value, nbits)
    out = w.image()
    assert BitCursor(out, plan=np.array(plan)).read_uint(nbits) == value
    # bits outside each pixel's k low bits stay put
    keep = np.array([(0xFF << k) & 0xFF for k in plan])
    assert np.array_equal(out.flat & keep, img.flat & keep)


def test_bit_cursor_msb_first():
    img = Image(np.zeros((1, 2), dtype=np.uint8))
    cur = BitCursor(img, plan=np.array([3, 1]))
    cur.write_uint(0b1001, 4)
    assert cur.image().flat.tolist() == [0b100, 0b1]


def test_bit_cursor_overrun():
    cur = BitCursor(Image(np.zeros((1, 1), dtype=np.uint8)), plan=1)
    cur.write(1)
    with pytest.raises(IndexError):
        cur.write(1)
