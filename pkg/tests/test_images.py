import numpy as np
import pytest

from mcsr.images import load_image, read_pgm16, read_raw, write_pgm16, write_raw


def test_pgm_round_trip_within_quantization(tmp_path, rng):
    img = rng.random((32, 24))
    path = tmp_path / "img.pgm"
    write_pgm16(path, img)
    back = read_pgm16(path)
    assert back.shape == (32, 24)
    assert np.max(np.abs(back - img)) <= 0.5 / 65535 + 1e-12


def test_raw_round_trip_exact(tmp_path, rng):
    img = rng.random((16, 20))
    path = tmp_path / "img.raw"
    write_raw(path, img)
    np.testing.assert_array_equal(read_raw(path), img)


def test_load_image_dispatches_on_magic(tmp_path, rng):
    img = rng.random((8, 8))
    p1, p2 = tmp_path / "a.pgm", tmp_path / "b.raw"
    write_pgm16(p1, img)
    write_raw(p2, img)
    assert np.max(np.abs(load_image(p1) - load_image(p2))) <= 0.5 / 65535 + 1e-12


def test_pgm_with_comment_line(tmp_path):
    path = tmp_path / "c.pgm"
    body = np.full(6, 1000, dtype=">u2").tobytes()
    path.write_bytes(b"P5\n# a comment\n3 2\n65535\n" + body)
    img = read_pgm16(path)
    assert img.shape == (2, 3)
    np.testing.assert_allclose(img, 1000 / 65535)


def test_unsupported_format_rejected(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"GARBAGE")
    with pytest.raises(ValueError, match="unsupported"):
        load_image(path)


def test_truncated_raw_rejected(tmp_path, rng):
    path = tmp_path / "t.raw"
    write_raw(path, rng.random((4, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_raw(path)
