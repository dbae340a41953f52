import numpy as np
import pytest

from mcsr.autodiff import MAGIC, load_tensors, save_tensors


def test_round_trip_preserves_values_and_order(tmp_path, rng):
    tensors = {
        "enc.w1": rng.standard_normal((4, 2, 3, 3)),
        "enc.b1": rng.standard_normal(4),
        "step": np.asarray(17.0),
    }
    path = tmp_path / "params.mcsr1"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert list(loaded) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], tensors[k])
        assert loaded[k].dtype == np.float64


def test_magic_header(tmp_path):
    path = tmp_path / "t.mcsr1"
    save_tensors(path, {"x": np.zeros(1)})
    assert path.read_bytes()[:5] == MAGIC


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE!" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_tensors(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "t.mcsr1"
    save_tensors(path, {"x": np.arange(8.0)})
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_tensors(path)


def test_scalar_rank_zero(tmp_path):
    path = tmp_path / "s.mcsr1"
    save_tensors(path, {"c": np.asarray(3.25)})
    loaded = load_tensors(path)
    assert loaded["c"].shape == ()
    assert float(loaded["c"]) == 3.25
